import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from interval_lab.cache import LevelStats, SimStats
from interval_lab.errors import AlignmentError, AllZeroActivity, SpecError
from interval_lab.phases import Interval, IntervalPlan
from interval_lab.reweight import PolicyResult, mpkilru_weights, mpkimax_weights, normalize_activity, weighted_metric

LEN = 1000


def _stats(mpki, cpi=1.0, length=LEN):
    misses = mpki * length / 1000.0
    return SimStats(length, (LevelStats("L3", misses, 0, misses),), cpi * length)


def _plan(n, weights=None):
    weights = weights or [1.0 / n] * n
    return IntervalPlan("spt", [Interval(i * LEN, LEN, w, i) for i, w in enumerate(weights)], LEN)


def _result(policy, mpkis, cpis=None):
    cpis = cpis or [1.0] * len(mpkis)
    return PolicyResult(policy, [_stats(m, c) for m, c in zip(mpkis, cpis)])


def test_mpkilru_examples():
    assert mpkilru_weights(_plan(3), _result("LRU", [4.0, 1.0, 5.0])).weights == pytest.approx([0.4, 0.1, 0.5])
    assert mpkilru_weights(_plan(4), _result("LRU", [3.0] * 4)).weights == pytest.approx([0.25] * 4)
    assert mpkilru_weights(_plan(3), _result("LRU", [0, 0, 8])).weights == [0.0, 0.0, 1.0]


def test_mpkilru_needs_lru():
    with pytest.raises(SpecError):
        mpkilru_weights(_plan(2), _result("SRRIP", [1, 2]))


def test_mpkimax_hand_example():
    per_policy = {"LRU": [2, 5], "TreeLRU": [3, 4], "SRRIP": [1, 6], "BRRIP": [2, 1]}
    plan = mpkimax_weights(_plan(2), [_result(p, v) for p, v in per_policy.items()])
    assert plan.weights == pytest.approx([1 / 3, 2 / 3])
    assert plan.strategy == "mpkimax"
    assert plan.provenance["activity"] == [3, 6]


def test_mpkimax_single_and_duplicate():
    lru = _result("LRU", [4.0, 1.0, 5.0])
    assert mpkimax_weights(_plan(3), [lru]).weights == mpkilru_weights(_plan(3), lru).weights
    other = _result("SRRIP", [1.0, 7.0, 2.0])
    assert mpkimax_weights(_plan(3), [lru, other, other]).weights == mpkimax_weights(_plan(3), [lru, other]).weights


def test_mpkimax_exclude():
    lru, rnd = _result("LRU", [1.0, 1.0]), _result("Random", [9.0, 1.0])
    assert mpkimax_weights(_plan(2), [lru, rnd], exclude=("Random",)).weights == [0.5, 0.5]
    with pytest.raises(SpecError):
        mpkimax_weights(_plan(2), [rnd], exclude=("Random",))


def test_weighted_metric_examples():
    assert weighted_metric(_plan(1), _result("LRU", [7.7])) == pytest.approx(7.7)
    assert weighted_metric(_plan(2), _result("LRU", [2, 4])) == pytest.approx(3.0)
    assert weighted_metric(_plan(2), _result("LRU", [2, 4], [1.5, 2.5]), "cpi") == pytest.approx(2.0)


def test_zero_activity_falls_back_or_raises():
    plan = _plan(2, [0.25, 0.75])
    out = mpkilru_weights(plan, _result("LRU", [0, 0]))
    assert out.weights == [0.25, 0.75]
    assert out.provenance["fallback"] is True
    with pytest.raises(AllZeroActivity):
        mpkilru_weights(plan, _result("LRU", [0, 0]), on_zero="raise")
    with pytest.raises(AllZeroActivity):
        normalize_activity([0.0])


def test_provenance_and_interval_set_preserved():
    plan = _plan(3)
    out = mpkilru_weights(plan, _result("LRU", [1, 2, 3]))
    assert out.spans == plan.spans
    assert out.provenance["source_strategy"] == "spt"
    assert out.provenance["source_weights"] == plan.weights
    assert out.provenance["fallback"] is False


def test_alignment_errors():
    with pytest.raises(AlignmentError):
        mpkilru_weights(_plan(3), _result("LRU", [1, 2]))
    bad = PolicyResult("LRU", [_stats(1.0), _stats(1.0, length=LEN + 1)])
    with pytest.raises(AlignmentError):
        weighted_metric(_plan(2), bad)


mpki_lists = st.lists(st.floats(0.0, 500.0, allow_nan=False), min_size=1, max_size=12)


@given(mpki_lists, st.floats(0.01, 100.0))
def test_normalization_and_scale_invariance(mpkis, c):
    assume(sum(mpkis) > 0)
    plan = _plan(len(mpkis))
    w = mpkilru_weights(plan, _result("LRU", mpkis)).weights
    assert abs(sum(w) - 1.0) <= 1e-9
    scaled = mpkilru_weights(plan, _result("LRU", [m * c for m in mpkis])).weights
    assert scaled == pytest.approx(w, rel=1e-9, abs=1e-12)


@given(st.lists(st.tuples(st.floats(0.1, 100), st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=10))
def test_lru_dominant_means_identical_weights(rows):
    lru = [r[0] for r in rows]
    others = [[r[0] * r[1] for r in rows], [r[0] * r[2] for r in rows]]
    plan = _plan(len(rows))
    results = [_result("LRU", lru), _result("SRRIP", others[0]), _result("BRRIP", others[1])]
    assert mpkimax_weights(plan, results).weights == mpkilru_weights(plan, results[0]).weights

import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import mem_trace, random_events, single_level
from interval_lab import cache as cs
from interval_lab.errors import ConfigError, EmptyTrace, IntervalOutOfRange
from interval_lab.synth import PhaseSpec, SyntheticWorkloadSpec, generate_synthetic
from interval_lab.trace import Trace, TraceEvent


def test_cold_miss_everywhere_then_l1_hit():
    h = cs.Hierarchy(cs.desk_hierarchy(), "LRU")
    assert h.access(0x1234) == [False, False, False]
    assert h.access(0x1234 + 8) == [True]
    assert h.access(0x1234, is_store=True) == [True]


def test_two_way_hand_trace():
    cfg = single_level(128, 2)
    assert cfg.levels[0].num_sets == 1
    st_ = cs.run_full(mem_trace([0, 1, 2, 0]), cfg, "LRU")
    assert st_.llc_misses == 4


def test_timing_formula():
    st_ = cs.run_full(mem_trace([0, 1, 2, 0]), single_level(128, 2, memory_latency=100), "LRU")
    assert st_.cycles == 4 + 4 * 100
    assert st_.cpi == 101


def test_timing_formula_three_levels():
    cfg = cs.desk_hierarchy(memory_latency=200, base_cpi=1.0)
    st_ = cs.run_full(mem_trace([0, 0]), cfg, "LRU")
    # one access misses everywhere: 8 (L2) + 37 (L3) + 200 (memory)
    assert st_.cycles == 2 + 8 + 37 + 200


@pytest.mark.parametrize("n", [2, 5, 100])
def test_single_block_mpki(n):
    st_ = cs.run_full(mem_trace([3] * n), cs.desk_hierarchy(), "LRU")
    assert st_.llc_misses == 1
    assert st_.mpki_llc == pytest.approx(1000 / n)


def test_empty_trace_rejected():
    with pytest.raises(EmptyTrace):
        cs.run_full(Trace.from_events([]), cs.desk_hierarchy(), "LRU")


def _synthetic(seed=0):
    phases = [
        PhaseSpec(30_000, range(8), 4, mix=0.3),
        PhaseSpec(30_000, range(8), 4096, mix=0.3),
    ]
    return generate_synthetic(SyntheticWorkloadSpec(phases, seed=seed))[1]


def test_full_interval_equals_run_full():
    t = _synthetic()
    cfg = cs.desk_hierarchy()
    assert cs.run_interval(t, cfg, "SRRIP", 0, len(t), 0) == cs.run_full(t, cfg, "SRRIP")


def test_cold_start_inflation():
    # a reuse-heavy phase: cold caches cost one miss per resident block
    phases = [PhaseSpec(40_000, range(8), 48, mix=0.3)]
    t = generate_synthetic(SyntheticWorkloadSpec(phases))[1]
    cfg = cs.desk_hierarchy()
    cold = cs.run_interval(t, cfg, "LRU", 20_000, 5_000, warmup=0)
    warm = cs.run_interval(t, cfg, "LRU", 20_000, 5_000, warmup=5_000)
    assert cold.mpki_llc > warm.mpki_llc


def test_tiling_with_and_without_state():
    t = _synthetic(1)
    cfg = cs.desk_hierarchy()
    full = cs.run_full(t, cfg, "LRU").llc_misses
    half = len(t) // 2
    carried = cs.run_intervals_carried(t, cfg, "LRU", [(0, half), (half, len(t) - half)])
    assert sum(s.llc_misses for s in carried) == full
    fresh = [cs.run_interval(t, cfg, "LRU", 0, half), cs.run_interval(t, cfg, "LRU", half, len(t) - half)]
    assert sum(s.llc_misses for s in fresh) >= full


def test_interval_bounds():
    t = _synthetic()
    cfg = cs.desk_hierarchy()
    with pytest.raises(IntervalOutOfRange):
        cs.run_interval(t, cfg, "LRU", len(t) - 10, 20)
    with pytest.raises(IntervalOutOfRange):
        cs.run_interval(t, cfg, "LRU", 100, 10, warmup=101)


def test_timeline_single_window_matches_full():
    t = _synthetic()
    cfg = cs.desk_hierarchy()
    tl = cs.mpki_timeline(t, cfg, "LRU", len(t))
    assert len(tl) == 1
    assert tl[0].mpki_llc == cs.run_full(t, cfg, "LRU").mpki_llc


def test_timeline_uniform_trace_is_flat():
    t = generate_synthetic(SyntheticWorkloadSpec([PhaseSpec(100_000, range(8), 4096, mix=0.3)]))[1]
    tl = cs.mpki_timeline(t, cs.desk_hierarchy(), "LRU", 10_000)
    mean = sum(p.mpki_llc for p in tl) / len(tl)
    assert all(abs(p.mpki_llc - mean) <= 0.05 * mean for p in tl)


def test_timeline_steps_at_phase_boundary():
    t = _synthetic()
    tl = cs.mpki_timeline(t, cs.desk_hierarchy(), "LRU", 5_000)
    low = [p.mpki_llc for p in tl if p.window_start_instruction < 30_000]
    high = [p.mpki_llc for p in tl if p.window_start_instruction >= 30_000]
    assert max(low) < 1.0 and min(high) > 100.0
    # the first window past the boundary already jumps
    step = next(i for i, p in enumerate(tl) if p.mpki_llc > 50)
    assert abs(tl[step].window_start_instruction - 30_000) <= 5_000


def test_timeline_conserves_misses():
    t = _synthetic(2)
    cfg = cs.desk_hierarchy()
    for policy in ("LRU", "Random", "BRRIP"):
        full, tl = cs.full_with_timeline(t, cfg, policy, 7_000, seed=3)
        assert sum(p.llc_misses for p in tl) == full.llc_misses == cs.run_full(t, cfg, policy, seed=3).llc_misses


@given(st.integers(0, 2**16), st.sampled_from(["LRU", "TreeLRU", "Random", "SRRIP", "BRRIP"]))
def test_inclusion_chain(seed, policy):
    trace = Trace.from_events(random_events(random.Random(seed), 400, n_blocks=200))
    st_ = cs.run_full(trace, cs.desk_hierarchy(), policy, seed)
    for upper, lower in zip(st_.levels, st_.levels[1:]):
        assert lower.accesses == upper.misses
    assert st_.levels[0].accesses == int(((trace.flags & 1) != 0).sum())
    for lvl in st_.levels:
        assert lvl.hits + lvl.misses == lvl.accesses


def test_llc_policy_override_only():
    cfg = cs.desk_hierarchy()
    over = cfg.with_llc_policy("BRRIP")
    assert [lvl.policy.kind for lvl in over.levels] == ["LRU", "LRU", "BRRIP"]


def test_table1_preset():
    cfg = cs.table1_hierarchy()
    l1, l2, l3 = cfg.levels
    assert (l1.size, l1.associativity, l1.hit_latency) == (64 * 1024, 4, 4)
    assert (l2.size, l2.associativity, l2.hit_latency) == (512 * 1024, 8, 8)
    assert (l3.size, l3.associativity, l3.hit_latency) == (1024 * 1024, 8, 37)
    assert {lvl.line_size for lvl in cfg.levels} == {64}
    assert l3.num_sets == 2048
    assert cs.named_hierarchy("default") == cfg


def test_config_json_roundtrip(tmp_path):
    cfg = cs.desk_hierarchy(memory_latency=150).with_llc_policy({"kind": "BRRIP", "bimodal_throttle": 16})
    p = tmp_path / "h.json"
    p.write_text(json.dumps(cfg.to_json()))
    assert cs.load_hierarchy(p) == cfg
    assert cs.HierarchyConfig.from_json("desk") == cs.desk_hierarchy()


@pytest.mark.parametrize(
    "kw",
    [
        {"size": 1000, "associativity": 2},
        {"size": 64 * 6, "associativity": 2},
        {"size": 1024, "associativity": 2, "line_size": 48},
        {"size": 1024, "associativity": 0},
        {"size": 1024, "associativity": 2, "hit_latency": 0},
    ],
)
def test_level_validation(kw):
    with pytest.raises(ConfigError):
        cs.CacheLevelConfig("L", **kw)


def test_stats_json_roundtrip():
    st_ = cs.run_full(mem_trace([0, 1, 2, 0, 5]), cs.desk_hierarchy(), "LRU")
    assert cs.SimStats.from_json(json.loads(json.dumps(st_.to_json()))) == st_
    row = st_.flat_row()
    assert row["L3_misses"] == st_.llc_misses
    text = cs.stats_rows_csv([row])
    assert text.splitlines()[0].startswith("instructions,")


def test_events_without_memory_count_as_instructions():
    evs = [TraceEvent(0, 0)] * 9 + [TraceEvent(4, 0, 0, "load")]
    st_ = cs.run_full(Trace.from_events(evs), cs.desk_hierarchy(), "LRU")
    assert st_.instructions == 10
    assert st_.mpki_llc == 100.0


@given(st.integers(0, 2**16), st.integers(0, 399), st.integers(1, 200))
def test_cold_interval_never_beats_carried_state_on_lru(seed, start, length):
    trace = Trace.from_events(random_events(random.Random(seed), 600, n_blocks=120))
    cfg = single_level(64 * 16, 4)
    cold = cs.run_interval(trace, cfg, "LRU", start, length, warmup=0)
    carried = cs.run_interval(trace, cfg, "LRU", start, length, warmup=start)
    assert cold.llc_misses >= carried.llc_misses

import random
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import mem_trace, single_level
from interval_lab import cache as cs
from interval_lab.errors import ConfigError
from interval_lab.policies import (
    BRRIPSet,
    InsertionCounter,
    LRUSet,
    PolicyKind,
    RandomSet,
    ReplacementPolicy,
    SRRIPSet,
    TreeLRUSet,
)


def test_lru_oldest_first():
    s = LRUSet(4)
    for w in range(4):
        s.touch(w)
    assert s.victim() == 0
    s.touch(0)
    assert s.victim() == 1


def test_lru_single_way():
    s = LRUSet(1)
    for _ in range(3):
        s.touch(0)
        assert s.victim() == 0


def test_treelru_fresh_and_fill_order():
    assert TreeLRUSet(4).victim() == 0
    s = TreeLRUSet(4)
    for w in range(4):
        s.touch(w)
    assert s.victim() == 0
    assert s.bits == [0, 0, 0]


def test_treelru_is_pseudo():
    # touching 0, 2, 1 leaves the root pointing left, where way 0 is stale
    s = TreeLRUSet(4)
    for w in (0, 1, 2, 3, 0, 2, 1):
        s.touch(w)
    assert s.victim() == 3


def test_treelru_needs_power_of_two():
    with pytest.raises(ConfigError):
        TreeLRUSet(3)
    with pytest.raises(ConfigError):
        cs.CacheLevel(single_level(64 * 6, 6).levels[0], PolicyKind("TreeLRU"))


@given(st.lists(st.integers(0, 1), max_size=30))
def test_treelru_two_way_tracks_lru(touches):
    a, b = LRUSet(2), TreeLRUSet(2)
    for w in (0, 1):
        a.touch(w)
        b.touch(w)
    for w in touches:
        a.touch(w)
        b.touch(w)
        assert a.victim() == b.victim()


def test_random_single_way_and_determinism():
    assert RandomSet(1, random.Random(0)).victim() == 0
    p1 = ReplacementPolicy(PolicyKind("Random"), 4, seed=3, label="L3")
    p2 = ReplacementPolicy(PolicyKind("Random"), 4, seed=3, label="L3")
    s1, s2 = p1.new_set(5), p2.new_set(5)
    assert [s1.victim() for _ in range(200)] == [s2.victim() for _ in range(200)]
    s3 = p1.new_set(6)
    assert [s3.victim() for _ in range(50)] != [p2.new_set(5).victim() for _ in range(50)]


def test_random_victims_uniform():
    s = RandomSet(4, random.Random(42))
    counts = Counter(s.victim() for _ in range(100_000))
    assert all(0.24 <= counts[w] / 100_000 <= 0.26 for w in range(4))


def test_random_policy_full_runs_repeat():
    trace = mem_trace([random.Random(1).randrange(40) for _ in range(2000)])
    cfg = single_level(64 * 16, 4)
    a = cs.run_full(trace, cfg, "Random", seed=11)
    b = cs.run_full(trace, cfg, "Random", seed=11)
    assert a == b


def test_srrip_hand_trace():
    s = SRRIPSet(2, rrpv_bits=2)
    s.on_insert(0)  # X
    s.on_insert(1)  # Y
    assert s.rrpv == [2, 2]
    s.on_hit(0)
    assert s.rrpv == [0, 2]
    victim = s.victim()  # Z arrives
    assert victim == 1
    assert s.rrpv == [1, 3]


def test_srrip_leftmost_tie():
    s = SRRIPSet(4)
    assert s.rrpv == [3, 3, 3, 3]
    assert s.victim() == 0


def test_srrip_hit_way_not_chosen_over_older():
    s = SRRIPSet(4)
    for w in range(4):
        s.on_insert(w)
    s.on_hit(2)
    assert s.victim() != 2


def test_brrip_long_insertions_at_multiples_of_throttle():
    counter = InsertionCounter()
    s = BRRIPSet(1, rrpv_bits=2, throttle=32, counter=counter)
    long_at = []
    for i in range(1, 65):
        s.on_insert(0)
        if s.rrpv[0] == 2:
            long_at.append(i)
        else:
            assert s.rrpv[0] == 3
    assert long_at == [32, 64]


def test_brrip_counter_shared_across_sets():
    p = ReplacementPolicy(PolicyKind("BRRIP", bimodal_throttle=2), 2)
    a, b = p.new_set(0), p.new_set(1)
    a.on_insert(0)
    b.on_insert(0)
    assert (a.rrpv[0], b.rrpv[0]) == (3, 2)


def test_brrip_resists_thrashing_loop():
    trace = mem_trace(list(range(32)) * 40)
    cfg = single_level(64 * 16, 4)
    lru = cs.run_full(trace, cfg, "LRU").llc_misses
    brrip = cs.run_full(trace, cfg, "BRRIP").llc_misses
    assert lru == 32 * 40
    assert brrip < lru


@given(
    st.sampled_from(["LRU", "TreeLRU", "Random", "SRRIP", "BRRIP"]),
    st.sampled_from([1, 2, 4, 8]),
    st.lists(st.integers(0, 20), max_size=200),
    st.integers(1, 3),
)
def test_policy_invariants(kind, assoc, blocks, bits):
    pk = PolicyKind(kind, rrpv_bits=bits, bimodal_throttle=3)
    level = cs.CacheLevel(cs.CacheLevelConfig("L", 64 * assoc, assoc, 64, policy=pk), pk, seed=1)
    seen = set()
    misses = 0
    for b in blocks:
        hit = level.access(b * 64)
        misses += not hit
        seen.add(b)
        m = level.maps[0]
        assert len(m) == min(len(seen), assoc)
        assert sorted(m.values()) == list(range(len(m)))
        st_ = level.states[0]
        if hasattr(st_, "rrpv"):
            assert all(0 <= r <= (1 << bits) - 1 for r in st_.rrpv)
    # a set never evicts while a way is free: first `assoc` distinct blocks all stick
    if len(seen) <= assoc:
        assert misses == len(seen)


def test_policy_kind_parsing():
    assert PolicyKind.parse("SRRIP") == PolicyKind("SRRIP")
    assert PolicyKind.parse({"kind": "BRRIP", "bimodal_throttle": 8}).bimodal_throttle == 8
    assert PolicyKind.parse(PolicyKind("LRU").to_json()) == PolicyKind("LRU")
    with pytest.raises(ConfigError):
        PolicyKind("MRU")
    with pytest.raises(ConfigError):
        PolicyKind.parse({"nokind": 1})

"""Functional multi-level cache simulator with an analytic timing model.

Lookups go L1 -> ... -> LLC; a miss at one level continues to the next and the
block is filled at every level that missed. Evictions are silent: no dirty
writebacks and no back-invalidation, so level i+1 sees exactly the misses of
level i.

Timing::

    cycles = instructions * base_cpi
             + sum over levels of misses(level) * latency(next level or memory)

The replacement policy under study applies to the LLC; upper levels keep the
policy named in their own config (LRU by default).
"""

from __future__ import annotations

import bisect
import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

from interval_lab.errors import ConfigError, EmptyTrace, IntervalOutOfRange
from interval_lab.policies import PolicyKind, ReplacementPolicy
from interval_lab.trace import Trace


def _is_pow2(n):
    return n > 0 and n & (n - 1) == 0


@dataclass(frozen=True)
class CacheLevelConfig:
    name: str
    size: int
    associativity: int
    line_size: int = 64
    hit_latency: int = 1
    policy: PolicyKind = field(default_factory=lambda: PolicyKind("LRU"))
    shared_by_upstream: bool = False
    mshrs: int | None = None  # recorded only; the timing model has no overlap

    def __post_init__(self):
        object.__setattr__(self, "policy", PolicyKind.parse(self.policy))
        if self.associativity < 1 or self.line_size < 1 or self.size < 1:
            raise ConfigError(f"{self.name}: size, associativity and line_size must be positive")
        if not _is_pow2(self.line_size):
            raise ConfigError(f"{self.name}: line_size must be a power of two")
        if self.size % (self.associativity * self.line_size):
            raise ConfigError(f"{self.name}: size not divisible by associativity x line_size")
        if not _is_pow2(self.num_sets):
            raise ConfigError(f"{self.name}: set count {self.num_sets} is not a power of two")
        if self.hit_latency < 1:
            raise ConfigError(f"{self.name}: hit_latency must be >= 1")

    @property
    def num_sets(self):
        return self.size // (self.associativity * self.line_size)

    @property
    def blocks(self):
        return self.size // self.line_size

    def to_json(self):
        d = asdict(self)
        d["policy"] = self.policy.to_json()
        return d


@dataclass(frozen=True)
class HierarchyConfig:
    levels: tuple[CacheLevelConfig, ...]
    memory_latency: int = 200
    base_cpi: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        if not self.levels:
            raise ConfigError("hierarchy needs at least one level")
        for upper, lower in zip(self.levels, self.levels[1:]):
            if lower.line_size < upper.line_size:
                raise ConfigError("line_size must be non-decreasing towards the LLC")
        if self.memory_latency < 0 or self.base_cpi < 0:
            raise ConfigError("memory_latency and base_cpi must be non-negative")

    @property
    def llc(self):
        return self.levels[-1]

    def miss_penalties(self):
        lat = [lvl.hit_latency for lvl in self.levels[1:]] + [self.memory_latency]
        return lat

    def with_llc_policy(self, policy) -> "HierarchyConfig":
        llc = replace(self.llc, policy=PolicyKind.parse(policy))
        return replace(self, levels=self.levels[:-1] + (llc,))

    def to_json(self):
        return {
            "levels": [lvl.to_json() for lvl in self.levels],
            "memory_latency": self.memory_latency,
            "base_cpi": self.base_cpi,
        }

    @classmethod
    def from_json(cls, data) -> "HierarchyConfig":
        if isinstance(data, str):
            return named_hierarchy(data)
        try:
            levels = tuple(CacheLevelConfig(**lvl) for lvl in data["levels"])
            return cls(
                levels,
                memory_latency=int(data.get("memory_latency", 200)),
                base_cpi=float(data.get("base_cpi", 1.0)),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad hierarchy config: {exc}") from None


def table1_hierarchy(memory_latency=200, base_cpi=1.0) -> HierarchyConfig:
    """Per-core hierarchy of the reference gem5 setup (private L1D/L2, shared LLC)."""
    return HierarchyConfig(
        (
            CacheLevelConfig("L1D", 64 * 1024, 4, 64, 4, mshrs=4),
            CacheLevelConfig("L2", 512 * 1024, 8, 64, 8, mshrs=20),
            CacheLevelConfig("L3", 1024 * 1024, 8, 64, 37, shared_by_upstream=True, mshrs=24),
        ),
        memory_latency=memory_latency,
        base_cpi=base_cpi,
    )


def desk_hierarchy(memory_latency=200, base_cpi=1.0) -> HierarchyConfig:
    """Scaled-down hierarchy (4 KB LLC, 64 blocks) for desk-size traces."""
    return HierarchyConfig(
        (
            CacheLevelConfig("L1D", 1024, 2, 64, 4),
            CacheLevelConfig("L2", 2048, 4, 64, 8),
            CacheLevelConfig("L3", 4096, 8, 64, 37, shared_by_upstream=True),
        ),
        memory_latency=memory_latency,
        base_cpi=base_cpi,
    )


def named_hierarchy(name) -> HierarchyConfig:
    if name in ("table1", "default"):
        return table1_hierarchy()
    if name == "desk":
        return desk_hierarchy()
    raise ConfigError(f"unknown hierarchy preset {name!r}")


def load_hierarchy(path) -> HierarchyConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return HierarchyConfig.from_json(data)


# -- statistics ------------------------------------------------------------------


@dataclass(frozen=True)
class LevelStats:
    name: str
    accesses: int
    hits: int
    misses: int


@dataclass(frozen=True)
class SimStats:
    instructions: int
    levels: tuple[LevelStats, ...]
    cycles: float

    @property
    def llc_misses(self):
        return self.levels[-1].misses

    @property
    def mpki_llc(self):
        if self.instructions <= 0:
            return math.nan
        return 1000.0 * self.llc_misses / self.instructions

    @property
    def cpi(self):
        if self.instructions <= 0:
            return math.nan
        return self.cycles / self.instructions

    def metric(self, name):
        if name == "mpki":
            return self.mpki_llc
        if name == "cpi":
            return self.cpi
        raise ValueError(f"unknown metric {name!r}")

    def to_json(self):
        return {
            "instructions": self.instructions,
            "levels": [asdict(lvl) for lvl in self.levels],
            "cycles": self.cycles,
            "mpki_llc": self.mpki_llc,
            "cpi": self.cpi,
        }

    @classmethod
    def from_json(cls, data) -> "SimStats":
        return cls(
            int(data["instructions"]),
            tuple(LevelStats(**lvl) for lvl in data["levels"]),
            float(data["cycles"]),
        )

    def flat_row(self):
        row = {"instructions": self.instructions}
        for lvl in self.levels:
            row[f"{lvl.name}_accesses"] = lvl.accesses
            row[f"{lvl.name}_hits"] = lvl.hits
            row[f"{lvl.name}_misses"] = lvl.misses
        row["cycles"] = self.cycles
        row["mpki_llc"] = self.mpki_llc
        row["cpi"] = self.cpi
        return row


@dataclass(frozen=True)
class TimelinePoint:
    window_start_instruction: int
    window_length: int
    mpki_llc: float
    llc_misses: int


def stats_from_depths(config: HierarchyConfig, instructions, depth_hist) -> SimStats:
    """Build SimStats from a histogram of how many levels each access missed."""
    levels = []
    penalties = config.miss_penalties()
    cycles = instructions * config.base_cpi
    remaining = sum(depth_hist)
    for i, lvl in enumerate(config.levels):
        hits = depth_hist[i]
        misses = remaining - hits
        levels.append(LevelStats(lvl.name, remaining, hits, misses))
        cycles += misses * penalties[i]
        remaining = misses
    return SimStats(instructions, tuple(levels), cycles)


# -- simulator -------------------------------------------------------------------


class CacheLevel:
    __slots__ = ("config", "shift", "mask", "assoc", "maps", "tags", "states", "policy")

    def __init__(self, config: CacheLevelConfig, policy: PolicyKind, seed=0):
        self.config = config
        self.shift = config.line_size.bit_length() - 1
        self.mask = config.num_sets - 1
        self.assoc = config.associativity
        n = config.num_sets
        self.maps = [None] * n
        self.tags = [None] * n
        self.states = [None] * n
        self.policy = ReplacementPolicy(policy, self.assoc, seed=seed, label=config.name)

    def access(self, addr) -> bool:
        block = addr >> self.shift
        s = block & self.mask
        m = self.maps[s]
        if m is None:
            m = self.maps[s] = {}
            self.tags[s] = [None] * self.assoc
            self.states[s] = self.policy.new_set(s)
        way = m.get(block)
        st = self.states[s]
        if way is not None:
            st.on_hit(way)
            return True
        tags = self.tags[s]
        n = len(m)
        if n < self.assoc:
            way = n
        else:
            way = st.victim()
            del m[tags[way]]
        tags[way] = block
        m[block] = way
        st.on_insert(way)
        return False

    def contains(self, addr) -> bool:
        block = addr >> self.shift
        m = self.maps[block & self.mask]
        return m is not None and block in m


class Hierarchy:
    """Mutable cache state for one simulation run."""

    def __init__(self, config: HierarchyConfig, policy=None, seed=0):
        if policy is not None:
            config = config.with_llc_policy(policy)
        self.config = config
        self.levels = [CacheLevel(cfg, cfg.policy, seed) for cfg in config.levels]

    def lookup(self, addr) -> int:
        """Access ``addr``; return the number of levels that missed."""
        depth = 0
        for lvl in self.levels:
            if lvl.access(addr):
                return depth
            depth += 1
        return depth

    def access(self, addr, is_store=False) -> list[bool]:
        """Per-level hit flags for the levels the access reached.

        Stores are write-allocate and behave like loads.
        """
        depth = self.lookup(addr)
        out = [False] * min(depth + 1, len(self.levels))
        if depth < len(self.levels):
            out[depth] = True
        return out


def run_segments(
    trace: Trace,
    config: HierarchyConfig,
    policy,
    segments: Sequence[tuple[int, int]],
    seed=0,
    warmup_start=None,
) -> list[SimStats]:
    """One continuous simulation, counters snapshotted per segment.

    ``segments`` are sorted, non-overlapping (start, length) ranges. Events from
    ``warmup_start`` (default: first segment start) up to each segment, and in
    gaps between segments, update cache state without being counted.
    """
    n = len(trace)
    if not segments:
        return []
    prev_end = segments[0][0] if warmup_start is None else warmup_start
    for start, length in segments:
        if length < 1 or start < prev_end or start + length > n:
            raise IntervalOutOfRange(f"segment ({start}, {length}) invalid for trace of {n}")
        prev_end = start + length
    if warmup_start is not None and not 0 <= warmup_start <= segments[0][0]:
        raise IntervalOutOfRange(f"warmup start {warmup_start} outside [0, {segments[0][0]}]")

    hier = Hierarchy(config, policy, seed)
    config = hier.config
    lookup = hier.lookup
    pos, addrs, _stores = trace.mem_lists()
    depth_slots = len(config.levels) + 1
    cursor = bisect.bisect_left(pos, segments[0][0] if warmup_start is None else warmup_start)
    out = []
    for start, length in segments:
        lo = bisect.bisect_left(pos, start)
        for a in addrs[cursor:lo]:
            lookup(a)
        hi = bisect.bisect_left(pos, start + length)
        hist = [0] * depth_slots
        for a in addrs[lo:hi]:
            hist[lookup(a)] += 1
        cursor = hi
        out.append(stats_from_depths(config, length, hist))
    return out


def run_full(trace: Trace, config: HierarchyConfig, policy, seed=0) -> SimStats:
    if len(trace) == 0:
        raise EmptyTrace("cannot simulate an empty trace")
    return run_segments(trace, config, policy, [(0, len(trace))], seed, warmup_start=0)[0]


def run_interval(trace, config, policy, start, length, warmup=0, seed=0) -> SimStats:
    """Measure [start, start+length) after warming on [start-warmup, start)."""
    if warmup < 0 or warmup > start:
        raise IntervalOutOfRange(f"warmup {warmup} exceeds interval start {start}")
    if length < 1 or start < 0 or start + length > len(trace):
        raise IntervalOutOfRange(f"interval ({start}, {length}) outside trace of {len(trace)}")
    return run_segments(trace, config, policy, [(start, length)], seed, warmup_start=start - warmup)[0]


def run_intervals_carried(trace, config, policy, intervals, seed=0) -> list[SimStats]:
    """Stats per interval from one run over the whole trace (state carried).

    Equivalent to ``run_interval(..., warmup=start)`` for each interval.
    Results come back in the order of ``intervals``.
    """
    order = sorted(range(len(intervals)), key=lambda i: intervals[i][0])
    stats = run_segments(trace, config, policy, [intervals[i] for i in order], seed, warmup_start=0)
    out = [None] * len(intervals)
    for i, s in zip(order, stats):
        out[i] = s
    return out


def window_segments(count, window_size):
    if window_size < 1:
        raise ConfigError("window_size must be >= 1")
    return [(s, min(window_size, count - s)) for s in range(0, count, window_size)]


def timeline_from_stats(segments, stats) -> list[TimelinePoint]:
    return [
        TimelinePoint(start, length, st.mpki_llc, st.llc_misses)
        for (start, length), st in zip(segments, stats)
    ]


def mpki_timeline(trace, config, policy, window_size, seed=0) -> list[TimelinePoint]:
    if len(trace) == 0:
        raise EmptyTrace("cannot simulate an empty trace")
    segs = window_segments(len(trace), window_size)
    return timeline_from_stats(segs, run_segments(trace, config, policy, segs, seed, warmup_start=0))


def full_with_timeline(trace, config, policy, window_size, seed=0):
    """run_full and mpki_timeline from a single pass."""
    if len(trace) == 0:
        raise EmptyTrace("cannot simulate an empty trace")
    segs = window_segments(len(trace), window_size)
    stats = run_segments(trace, config, policy, segs, seed, warmup_start=0)
    return merge_stats(config, stats), timeline_from_stats(segs, stats)


def merge_stats(config: HierarchyConfig, parts: Sequence[SimStats]) -> SimStats:
    """Sum counters of consecutive measurements of the same run."""
    instructions = sum(p.instructions for p in parts)
    hist = [0] * (len(config.levels) + 1)
    for p in parts:
        for i, lvl in enumerate(p.levels):
            hist[i] += lvl.hits
        hist[-1] += p.levels[-1].misses
    return stats_from_depths(config, instructions, hist)


# -- stats output -------------------------------------------------------------------


def stats_rows_csv(rows: Sequence[dict]) -> str:
    if not rows:
        return ""
    fields = list(rows[0])
    for r in rows[1:]:
        fields.extend(k for k in r if k not in fields)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(v) for k, v in r.items()})
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v

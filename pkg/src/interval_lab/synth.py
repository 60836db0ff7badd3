"""Phase-structured synthetic workloads.

Each phase walks its basic-block palette and touches ``footprint`` distinct
cache blocks spaced ``stride`` bytes apart. Code similarity (palette) and
cache footprint are independent knobs, so two phases can look identical to a
BBV while behaving very differently in the LLC.

Beyond the required fields a phase takes three optional knobs:

* ``pattern``: ``"cyclic"`` (default) visits blocks 0..footprint-1 in order;
  ``"reuse"`` interleaves each new block with a re-touch of the block
  ``reuse_distance`` steps back; ``"random"`` draws blocks uniformly.
* ``bb_order``: ``"cyclic"`` (default) loops over the palette; ``"random"``
  draws the next block uniformly, i.e. irregular control flow.
* ``region``: phases sharing a region share an address range. Defaults to
  the phase's position in the list.
"""

from __future__ import annotations

import random
from dataclasses import asdict, dataclass, field

import numpy as np

from interval_lab.errors import ConfigError
from interval_lab.seeds import derive_seed
from interval_lab.trace import HAS_MEM, IS_STORE, Trace, TraceMeta

CODE_BASE = 0x400000
BB_SPAN = 0x40  # bytes of code reserved per basic block
DATA_BASE = 0x10000000
REGION_SPAN = 0x10000000
STORE_EVERY = 4  # every 4th memory op is a store

PATTERNS = ("cyclic", "reuse", "random")
BB_ORDERS = ("cyclic", "random")


@dataclass(frozen=True)
class PhaseSpec:
    instruction_count: int
    bb_palette: tuple[int, ...]
    footprint: int
    stride: int = 64
    mix: float = 0.3
    pattern: str = "cyclic"
    reuse_distance: int = 8
    bb_order: str = "cyclic"
    region: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "bb_palette", tuple(int(b) for b in self.bb_palette))
        if self.instruction_count <= 0:
            raise ConfigError("phase instruction_count must be > 0")
        if not self.bb_palette:
            raise ConfigError("phase bb_palette must not be empty")
        if any(b < 0 for b in self.bb_palette):
            raise ConfigError("basic-block ids must be non-negative")
        if not 0.0 <= self.mix <= 1.0:
            raise ConfigError(f"mix {self.mix} outside [0, 1]")
        if self.footprint < 0 or (self.footprint == 0 and self.mix > 0):
            raise ConfigError("footprint must be >= 1 when the phase has memory ops")
        if self.stride <= 0:
            raise ConfigError("stride must be positive")
        if self.pattern not in PATTERNS:
            raise ConfigError(f"unknown pattern {self.pattern!r}")
        if self.bb_order not in BB_ORDERS:
            raise ConfigError(f"unknown bb_order {self.bb_order!r}")
        if self.pattern == "reuse" and self.reuse_distance < 1:
            raise ConfigError("reuse_distance must be >= 1")


@dataclass(frozen=True)
class SyntheticWorkloadSpec:
    phases: tuple[PhaseSpec, ...]
    seed: int = 0
    name: str = "synthetic"
    input_label: str = "synthetic"

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))
        if not self.phases:
            raise ConfigError("synthetic workload needs at least one phase")

    @property
    def event_count(self):
        return sum(p.instruction_count for p in self.phases)

    def to_json(self):
        d = asdict(self)
        d["phases"] = [asdict(p) for p in self.phases]
        for p in d["phases"]:
            p["bb_palette"] = list(p["bb_palette"])
        return d

    @classmethod
    def from_json(cls, data):
        try:
            phases = tuple(PhaseSpec(**p) for p in data["phases"])
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad synthetic workload spec: {exc}") from None
        return cls(
            phases,
            seed=int(data.get("seed", 0)),
            name=data.get("name", "synthetic"),
            input_label=data.get("input_label", "synthetic"),
        )


def bb_length(seed, bb_id):
    """Instructions per execution of a basic block (2..16), fixed per trace."""
    return 2 + derive_seed(seed, "bb-len", bb_id) % 15


def _phase_code(phase: PhaseSpec, rng: random.Random, seed):
    """bb_id and pc columns for one phase."""
    n = phase.instruction_count
    palette = phase.bb_palette
    bbs = np.empty(n, dtype=np.uint32)
    pcs = np.empty(n, dtype=np.uint64)
    i = 0
    k = 0
    while i < n:
        if phase.bb_order == "cyclic":
            bb = palette[k % len(palette)]
            k += 1
        else:
            bb = palette[rng.randrange(len(palette))]
        length = min(bb_length(seed, bb), n - i)
        bbs[i : i + length] = bb
        pcs[i : i + length] = CODE_BASE + bb * BB_SPAN + 4 * np.arange(length, dtype=np.uint64)
        i += length
    return bbs, pcs


def _phase_blocks(phase: PhaseSpec, n_mem: int, rng: random.Random):
    """Block index (0..footprint-1) for each memory op of a phase."""
    f = phase.footprint
    k = np.arange(n_mem, dtype=np.int64)
    if phase.pattern == "cyclic":
        return k % f
    if phase.pattern == "reuse":
        step = k // 2
        back = step - phase.reuse_distance
        # no re-touch until the walk is reuse_distance blocks in
        back = np.where(back < 0, step, back)
        return np.where(k % 2 == 0, step, back) % f
    return np.array([rng.randrange(f) for _ in range(n_mem)], dtype=np.int64)


def generate_synthetic(spec: SyntheticWorkloadSpec) -> tuple[TraceMeta, Trace]:
    pcs, bbs, flags, addrs = [], [], [], []
    for idx, phase in enumerate(spec.phases):
        rng = random.Random(derive_seed(spec.seed, "phase", idx))
        bb, pc = _phase_code(phase, rng, spec.seed)
        n = phase.instruction_count
        # exact mix fraction, evenly spread
        t = np.arange(n + 1, dtype=np.float64)
        marks = np.floor(t * phase.mix + 1e-9)
        has_mem = np.diff(marks) > 0
        n_mem = int(has_mem.sum())
        fl = np.zeros(n, dtype=np.uint8)
        addr = np.zeros(n, dtype=np.uint64)
        if n_mem:
            blocks = _phase_blocks(phase, n_mem, rng)
            region = idx if phase.region is None else phase.region
            base = DATA_BASE + region * REGION_SPAN
            addr[has_mem] = (base + blocks * phase.stride).astype(np.uint64)
            store = (np.arange(n_mem) % STORE_EVERY) == STORE_EVERY - 1
            fl[has_mem] = HAS_MEM | np.where(store, IS_STORE, 0).astype(np.uint8)
        pcs.append(pc)
        bbs.append(bb)
        flags.append(fl)
        addrs.append(addr)
    trace = Trace(
        np.concatenate(pcs),
        np.concatenate(bbs),
        np.concatenate(flags),
        np.concatenate(addrs),
        name=spec.name,
        input_label=spec.input_label,
    )
    return trace.meta, trace

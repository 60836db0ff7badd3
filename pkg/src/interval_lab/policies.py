"""Replacement policies behind a per-set interface.

A ``ReplacementPolicy`` is instantiated once per cache level and hands out one
set-state object per set. Set states implement::

    on_hit(way)      block in ``way`` was referenced again
    on_insert(way)   a new block was placed in ``way``
    victim() -> way  choose a way to evict; only called on a full set

The cache fills free ways lowest-index first and never asks for a victim while
a way is free.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from interval_lab.errors import ConfigError
from interval_lab.seeds import derive_seed

KINDS = ("LRU", "TreeLRU", "Random", "SRRIP", "BRRIP")
ORDERED_POLICIES = ("LRU", "TreeLRU", "SRRIP", "BRRIP")


@dataclass(frozen=True)
class PolicyKind:
    kind: str
    rrpv_bits: int = 2
    bimodal_throttle: int = 32

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown policy {self.kind!r}; expected one of {KINDS}")
        if self.rrpv_bits < 1:
            raise ConfigError("rrpv_bits must be >= 1")
        if self.bimodal_throttle < 1:
            raise ConfigError("bimodal_throttle must be >= 1")

    def __str__(self):
        return self.kind

    def to_json(self):
        d = {"kind": self.kind}
        if self.kind in ("SRRIP", "BRRIP"):
            d["rrpv_bits"] = self.rrpv_bits
        if self.kind == "BRRIP":
            d["bimodal_throttle"] = self.bimodal_throttle
        return d

    @classmethod
    def parse(cls, value) -> "PolicyKind":
        if isinstance(value, PolicyKind):
            return value
        if isinstance(value, str):
            return cls(value)
        try:
            return cls(
                value["kind"],
                rrpv_bits=int(value.get("rrpv_bits", 2)),
                bimodal_throttle=int(value.get("bimodal_throttle", 32)),
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise ConfigError(f"bad policy description {value!r}") from exc


# -- LRU ----------------------------------------------------------------------


class LRUSet:
    __slots__ = ("stamps", "clock")

    def __init__(self, assoc):
        self.stamps = [0] * assoc
        self.clock = 0

    def touch(self, way):
        self.clock += 1
        self.stamps[way] = self.clock

    on_hit = touch
    on_insert = touch

    def victim(self):
        stamps = self.stamps
        return stamps.index(min(stamps))


# -- Tree pseudo-LRU ------------------------------------------------------------


class TreeLRUSet:
    """Binary-tree pseudo-LRU over ``assoc - 1`` one-bit nodes (heap layout).

    Node bit 0 means "victim is in the left subtree", 1 means right. Touching a
    way points every node on its path at the other subtree.
    """

    __slots__ = ("bits", "assoc", "levels")

    def __init__(self, assoc):
        if assoc < 1 or assoc & (assoc - 1):
            raise ConfigError(f"TreeLRU needs power-of-two associativity, got {assoc}")
        self.assoc = assoc
        self.bits = [0] * (assoc - 1)
        self.levels = assoc.bit_length() - 1

    def touch(self, way):
        node = 0
        for level in range(self.levels - 1, -1, -1):
            went_right = (way >> level) & 1
            self.bits[node] = 0 if went_right else 1
            node = 2 * node + 1 + went_right

    on_hit = touch
    on_insert = touch

    def victim(self):
        node = 0
        way = 0
        for _ in range(self.levels):
            right = self.bits[node]
            way = (way << 1) | right
            node = 2 * node + 1 + right
        return way


# -- Random ---------------------------------------------------------------------


class RandomSet:
    __slots__ = ("assoc", "rng")

    def __init__(self, assoc, rng):
        self.assoc = assoc
        self.rng = rng

    def on_hit(self, way):
        pass

    def on_insert(self, way):
        pass

    def victim(self):
        if self.assoc == 1:
            return 0
        return self.rng.randrange(self.assoc)


# -- RRIP -----------------------------------------------------------------------


class SRRIPSet:
    """Hit-priority SRRIP: insert at 2^M-2, hit resets to 0."""

    __slots__ = ("rrpv", "max_rrpv")

    def __init__(self, assoc, rrpv_bits=2):
        self.max_rrpv = (1 << rrpv_bits) - 1
        self.rrpv = [self.max_rrpv] * assoc

    def on_hit(self, way):
        self.rrpv[way] = 0

    def on_insert(self, way):
        self.rrpv[way] = self.max_rrpv - 1

    def victim(self):
        rrpv = self.rrpv
        top = max(rrpv)
        if top < self.max_rrpv:
            # same outcome as repeated +1 aging rounds until some way saturates
            delta = self.max_rrpv - top
            for i in range(len(rrpv)):
                rrpv[i] += delta
        return rrpv.index(self.max_rrpv)


class InsertionCounter:
    """Per-policy-instance count of BRRIP insertions."""

    __slots__ = ("count",)

    def __init__(self):
        self.count = 0


class BRRIPSet(SRRIPSet):
    """Every ``throttle``-th insertion (1-based) is long, the rest distant."""

    __slots__ = ("counter", "throttle")

    def __init__(self, assoc, rrpv_bits=2, throttle=32, counter=None):
        super().__init__(assoc, rrpv_bits)
        self.throttle = throttle
        self.counter = counter if counter is not None else InsertionCounter()

    def on_insert(self, way):
        self.counter.count += 1
        if self.counter.count % self.throttle == 0:
            self.rrpv[way] = self.max_rrpv - 1
        else:
            self.rrpv[way] = self.max_rrpv


# -- per-level factory ------------------------------------------------------------


class ReplacementPolicy:
    def __init__(self, kind: PolicyKind, assoc: int, seed: int = 0, label: str = ""):
        self.kind = PolicyKind.parse(kind)
        self.assoc = assoc
        self.seed = seed
        self.label = label
        self.counter = InsertionCounter()
        if self.kind.kind == "TreeLRU":
            TreeLRUSet(assoc)  # validates associativity up front

    def new_set(self, set_index: int):
        k = self.kind
        if k.kind == "LRU":
            return LRUSet(self.assoc)
        if k.kind == "TreeLRU":
            return TreeLRUSet(self.assoc)
        if k.kind == "Random":
            return RandomSet(self.assoc, random.Random(derive_seed(self.seed, self.label, set_index)))
        if k.kind == "SRRIP":
            return SRRIPSet(self.assoc, k.rrpv_bits)
        return BRRIPSet(self.assoc, k.rrpv_bits, k.bimodal_throttle, self.counter)

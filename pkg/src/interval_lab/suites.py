"""Synthetic benchmark suites used by the acceptance tests and scripts.

``underestimate_workload``: a low-footprint phase interleaved with short bursts of
a thrashing phase running the same code, so code-based sampling misses most of
the LLC activity.

``ranking_shift_suite``: benchmarks whose dominant low-activity phase ranks the
policies opposite to the high-activity phases that decide the full-run ranking.
"""

from __future__ import annotations

import random

from interval_lab.cache import desk_hierarchy
from interval_lab.harness import BenchmarkSpec, ExperimentSpec, StrategySpec
from interval_lab.policies import PolicyKind
from interval_lab.seeds import derive_seed

CHUNK = 10_000
ALL_POLICIES = ("LRU", "TreeLRU", "Random", "SRRIP", "BRRIP")


def _phase(count, palette, footprint, mix, region, **kw):
    return {"instruction_count": count, "bb_palette": list(palette), "footprint": footprint, "mix": mix, "region": region, **kw}


def underestimate_workload(seed=1, chunks=40, burst_chunks=0.8, burst_share=0.25, chunk=CHUNK) -> dict:
    """Synthetic spec: every burst chunk ends with ``burst_share`` of thrashing code."""
    rng = random.Random(derive_seed(seed, "layout"))
    n_burst = round(chunks * burst_chunks)
    kinds = [True] * n_burst + [False] * (chunks - n_burst)
    rng.shuffle(kinds)
    palette = range(16)
    phases = []
    for burst in kinds:
        b = int(chunk * burst_share) if burst else 0
        phases.append(_phase(chunk - b, palette, 4, 0.3, 0))
        if b:
            phases.append(_phase(b, palette, 4096, 0.5, 1, bb_order="random"))
    return {"phases": phases, "seed": seed}


def ranking_shift_workload(
    seed,
    chunks=30,
    reuse_distance=24,
    low_mix=0.05,
    burst_mix=0.4,
    burst_footprint=96,
    burst_share=0.3,
    burst_chunks=0.6,
    distinct_chunks=0.1,
    chunk=CHUNK,
) -> dict:
    """Three phases: reuse-friendly (LRU wins), thrash bursts and a distinct thrash (BRRIP wins)."""
    rng = random.Random(derive_seed(seed, "layout"))
    n_d = max(1, round(chunks * distinct_chunks))
    n_m = round((chunks - n_d) * burst_chunks)
    kinds = [0] * (chunks - n_d - n_m) + [1] * n_m + [2] * n_d
    rng.shuffle(kinds)
    main, other = range(16), range(100, 112)
    phases = []
    for kind in kinds:
        if kind == 2:
            phases.append(_phase(chunk, other, 128, 0.3, 2, pattern="random"))
            continue
        b = int(chunk * burst_share) if kind == 1 else 0
        phases.append(_phase(chunk - b, main, 4096, low_mix, 0, pattern="reuse", reuse_distance=reuse_distance))
        if b:
            phases.append(_phase(b, main, burst_footprint, burst_mix, 1, bb_order="random"))
    return {"phases": phases, "seed": seed}


def _strategies(full_set=True, spt_warmup=0):
    spt = {"chunk": CHUNK, "dim": 15, "max_k": 10}
    if spt_warmup:
        spt["warmup"] = spt_warmup
    out = [StrategySpec("full"), StrategySpec("spt", params=spt)]
    if full_set:
        out += [
            StrategySpec("weight"),
            StrategySpec("mpkilru"),
            StrategySpec("mpkimax"),
            StrategySpec("ff", "ff50k", {"skip": 50_000, "length": 20_000}),
        ]
    else:
        out.append(StrategySpec("mpkilru"))
    return tuple(out)


def underestimate_experiment(master_seed=0, workload_seed=1, spt_warmup=0) -> ExperimentSpec:
    bench = BenchmarkSpec("burst", "ref", synthetic=underestimate_workload(workload_seed))
    return ExperimentSpec(
        (bench,),
        desk_hierarchy(),
        tuple(PolicyKind(p) for p in ("LRU", "TreeLRU", "SRRIP", "BRRIP")),
        _strategies(full_set=False, spt_warmup=spt_warmup),
        master_seed=master_seed,
        name="underestimate",
    )


def ranking_shift_suite(master_seed=0, n=8, threads=1) -> ExperimentSpec:
    """``n`` seeded benchmarks with varied phase parameters."""
    benches = []
    for i in range(n):
        rng = random.Random(derive_seed(master_seed, "suite", i))
        params = {
            "reuse_distance": rng.choice((16, 20, 24)),
            "burst_footprint": rng.choice((80, 96, 112)),
            "burst_share": rng.choice((0.25, 0.3, 0.35)),
        }
        seed = derive_seed(master_seed, "workload", i) % 10_000
        benches.append(BenchmarkSpec(f"shift{i}", "ref", synthetic=ranking_shift_workload(seed, **params)))
    return ExperimentSpec(
        tuple(benches),
        desk_hierarchy(),
        tuple(PolicyKind(p) for p in ALL_POLICIES),
        _strategies(),
        master_seed=master_seed,
        threads=threads,
        name="ranking-shift",
    )

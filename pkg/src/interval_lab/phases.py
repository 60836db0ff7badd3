"""SimPoint-style interval selection and fast-forward baseline plans."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from interval_lab.errors import ConfigError, IntervalOutOfRange, SpecError
from interval_lab.trace import ChunkIndex, Trace, slice_chunks

STRATEGIES = ("spt", "weight", "ff", "mpkilru", "mpkimax", "full")
WEIGHT_TOL = 1e-9


@dataclass(frozen=True)
class BBVMatrix:
    rows: np.ndarray  # (chunks, distinct bbs), rows sum to 1
    bb_ids: np.ndarray  # column -> bb id


@dataclass(frozen=True)
class ProjectedMatrix:
    rows: np.ndarray
    dim: int
    projection_seed: int


@dataclass(frozen=True)
class Clustering:
    k: int
    assignment: np.ndarray
    centroids: np.ndarray
    inertia: float
    iterations: int = 0

    def sizes(self):
        return np.bincount(self.assignment, minlength=self.k)


@dataclass(frozen=True)
class Interval:
    start: int
    length: int
    weight: float
    chunk_index: int | None = None

    def to_json(self):
        return {
            "chunk_index": self.chunk_index,
            "start": self.start,
            "length": self.length,
            "weight": self.weight,
        }


@dataclass(frozen=True)
class IntervalPlan:
    strategy: str
    intervals: tuple[Interval, ...]
    chunk_size: int | None = None
    seeds: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "intervals", tuple(self.intervals))
        if self.strategy not in STRATEGIES:
            raise SpecError(f"unknown strategy {self.strategy!r}")

    @property
    def weights(self):
        return [iv.weight for iv in self.intervals]

    @property
    def spans(self):
        return [(iv.start, iv.length) for iv in self.intervals]

    def __len__(self):
        return len(self.intervals)

    def validate(self, event_count=None):
        if not self.intervals:
            raise SpecError("interval plan is empty")
        total = sum(self.weights)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise SpecError(f"plan weights sum to {total!r}, expected 1")
        if any(w < 0 for w in self.weights):
            raise SpecError("negative interval weight")
        spans = sorted(self.spans)
        for (s0, l0), (s1, _) in zip(spans, spans[1:]):
            if s0 + l0 > s1:
                raise SpecError("plan intervals overlap")
        if event_count is not None:
            for s, ln in spans:
                if s < 0 or ln < 1 or s + ln > event_count:
                    raise IntervalOutOfRange(f"interval ({s}, {ln}) outside trace of {event_count}")
        return self

    def with_weights(self, weights, strategy, provenance) -> "IntervalPlan":
        ivs = tuple(replace(iv, weight=float(w)) for iv, w in zip(self.intervals, weights))
        return replace(self, strategy=strategy, intervals=ivs, provenance=provenance)

    def to_json(self):
        return {
            "strategy": self.strategy,
            "chunk_size": self.chunk_size,
            "intervals": [iv.to_json() for iv in self.intervals],
            "seeds": self.seeds,
            "provenance": self.provenance,
        }

    @classmethod
    def from_json(cls, data) -> "IntervalPlan":
        try:
            ivs = tuple(
                Interval(int(d["start"]), int(d["length"]), float(d["weight"]), d.get("chunk_index"))
                for d in data["intervals"]
            )
            return cls(
                data["strategy"],
                ivs,
                data.get("chunk_size"),
                dict(data.get("seeds", {})),
                dict(data.get("provenance", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecError(f"bad interval plan: {exc}") from None


def save_plan(plan: IntervalPlan, path):
    Path(path).write_text(json.dumps(plan.to_json(), indent=2) + "\n")


def load_plan(path) -> IntervalPlan:
    try:
        return IntervalPlan.from_json(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: {exc}") from None


def export_simpoints(plan: IntervalPlan, prefix):
    """Write ``<prefix>.simpoints`` and ``<prefix>.weights`` (SimPoint tool layout)."""
    prefix = Path(prefix)
    sp = "".join(f"{iv.chunk_index} {i}\n" for i, iv in enumerate(plan.intervals))
    wt = "".join(f"{iv.weight!r} {i}\n" for i, iv in enumerate(plan.intervals))
    prefix.with_suffix(".simpoints").write_text(sp)
    prefix.with_suffix(".weights").write_text(wt)


# -- BBVs and projection -------------------------------------------------------------


def build_bbvs(trace: Trace, chunks: ChunkIndex) -> BBVMatrix:
    if len(trace) == 0:
        raise ConfigError("cannot build BBVs for an empty trace")
    bb_ids, cols = np.unique(trace.bb, return_inverse=True)
    n = len(chunks)
    row_of = np.repeat(np.arange(n), [ln for _, ln in chunks.boundaries])
    counts = np.zeros((n, len(bb_ids)), dtype=np.float64)
    np.add.at(counts, (row_of, cols), 1.0)
    counts /= counts.sum(axis=1, keepdims=True)
    return BBVMatrix(counts, bb_ids)


def random_project(bbv, dim=15, seed=0, identity=False) -> ProjectedMatrix:
    """Multiply rows by a seeded dense matrix with Uniform[-1, 1] entries.

    ``identity=True`` skips the projection (test hook); ``dim`` must then equal
    the column count.
    """
    rows = bbv.rows if isinstance(bbv, BBVMatrix) else np.asarray(bbv, dtype=np.float64)
    if dim < 1:
        raise ConfigError("projection dim must be >= 1")
    if identity:
        if dim != rows.shape[1]:
            raise ConfigError("identity projection requires dim == column count")
        return ProjectedMatrix(rows.copy(), dim, seed)
    rng = np.random.default_rng(seed)
    proj = rng.uniform(-1.0, 1.0, size=(rows.shape[1], dim))
    return ProjectedMatrix(rows @ proj, dim, seed)


# -- k-means ---------------------------------------------------------------------------


def _sq_dists(points, centroids):
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _kmeanspp(points, k, rng):
    n = len(points)
    chosen = [int(rng.integers(n))]
    d2 = _sq_dists(points, points[chosen])[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            free = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(free))
        chosen.append(nxt)
        d2 = np.minimum(d2, _sq_dists(points, points[[nxt]])[:, 0])
    return points[chosen].copy()


def _repair_empty(points, assign, centroids, k):
    """Move the farthest member of the largest cluster into each empty cluster."""
    for c in range(k):
        sizes = np.bincount(assign, minlength=k)
        if sizes[c]:
            continue
        big = int(np.argmax(sizes))
        members = np.flatnonzero(assign == big)
        d = ((points[members] - centroids[big]) ** 2).sum(axis=1)
        far = members[int(np.argmax(d))]  # argmax ties -> lowest index
        assign[far] = c
        centroids[c] = points[far]
        centroids[big] = points[assign == big].mean(axis=0)
    return assign, centroids


def kmeans(points, k, seed=0, max_iter=100) -> Clustering:
    """Lloyd's algorithm from a seeded k-means++ start."""
    x = points.rows if isinstance(points, ProjectedMatrix) else np.asarray(points, dtype=np.float64)
    n = len(x)
    if k < 1 or k > n:
        raise ConfigError(f"k={k} must be in [1, {n}]")
    rng = np.random.default_rng(seed)
    centroids = _kmeanspp(x, k, rng)
    assign = np.argmin(_sq_dists(x, centroids), axis=1)
    it = 0
    for it in range(1, max_iter + 1):
        assign, centroids = _repair_empty(x, assign.copy(), centroids, k)
        for c in range(k):
            centroids[c] = x[assign == c].mean(axis=0)
        new = np.argmin(_sq_dists(x, centroids), axis=1)
        if np.array_equal(new, assign):
            break
        assign = new
    assign, centroids = _repair_empty(x, assign.copy(), centroids, k)
    for c in range(k):
        centroids[c] = x[assign == c].mean(axis=0)
    d2 = _sq_dists(x, centroids)
    inertia = float(d2[np.arange(n), assign].sum())
    return Clustering(k, assign, centroids, inertia, it)


def choose_k(points, max_k, seed=0, threshold=0.10, max_iter=100) -> tuple[int, list[float]]:
    """Smallest k in [2, max_k] whose inertia gain over k-1 is below ``threshold``.

    If inertia already hits zero at k-1, k-1 is returned. Falls back to max_k.
    Returns the chosen k and the inertia curve for k = 1..max_k.
    """
    x = points.rows if isinstance(points, ProjectedMatrix) else np.asarray(points)
    max_k = min(max_k, len(x))
    if max_k < 1:
        raise ConfigError("max_k must be >= 1")
    inertias = [kmeans(x, k, seed, max_iter).inertia for k in range(1, max_k + 1)]
    for k in range(2, max_k + 1):
        prev, cur = inertias[k - 2], inertias[k - 1]
        if prev <= 0:
            return k - 1, inertias
        if (prev - cur) / prev < threshold:
            return k, inertias
    return max_k, inertias


# -- plans ---------------------------------------------------------------------------


def select_representatives(clustering: Clustering, points, chunks: ChunkIndex) -> IntervalPlan:
    """One chunk per cluster: the member nearest its centroid (ties: lowest index).

    Weights are cluster sizes over total chunks.
    """
    x = points.rows if isinstance(points, ProjectedMatrix) else np.asarray(points)
    total = len(clustering.assignment)
    reps = []
    for c in range(clustering.k):
        members = np.flatnonzero(clustering.assignment == c)
        if not len(members):
            continue
        d = ((x[members] - clustering.centroids[c]) ** 2).sum(axis=1)
        rep = int(members[int(np.argmin(d))])
        reps.append((rep, c, len(members) / total))
    reps.sort()
    ivs = tuple(
        Interval(chunks.boundaries[r][0], chunks.boundaries[r][1], w, chunk_index=r)
        for r, _, w in reps
    )
    prov = {
        "method": "bbv-kmeans",
        "k": clustering.k,
        "clusters": [c for _, c, _ in reps],
        "cluster_sizes": [int(s) for s in clustering.sizes()],
        "inertia": clustering.inertia,
    }
    return IntervalPlan("spt", ivs, chunks.chunk_size, provenance=prov)


def top_weight_plan(plan: IntervalPlan) -> IntervalPlan:
    if not plan.intervals:
        raise SpecError("plan has no intervals")
    best = max(plan.intervals, key=lambda iv: (iv.weight, -(iv.chunk_index if iv.chunk_index is not None else iv.start)))
    prov = dict(plan.provenance, source_strategy=plan.strategy, source_weight=best.weight)
    return replace(plan, strategy="weight", intervals=(replace(best, weight=1.0),), provenance=prov)


def ff_plan(skip, length, event_count=None) -> IntervalPlan:
    """Fast-forward ``skip`` instructions (as state-carrying warmup), measure ``length``."""
    if skip < 0 or length < 1:
        raise IntervalOutOfRange("ff plan needs skip >= 0 and length >= 1")
    if event_count is not None and skip + length > event_count:
        raise IntervalOutOfRange(f"ff({skip}, {length}) exceeds trace of {event_count}")
    return IntervalPlan(
        "ff", (Interval(skip, length, 1.0),), provenance={"skip": skip, "length": length, "warmup": skip}
    )


def full_plan(event_count) -> IntervalPlan:
    return IntervalPlan("full", (Interval(0, event_count, 1.0),))


def simpoint_plan(
    trace: Trace,
    chunk_size=10_000,
    dim=15,
    k=None,
    max_k=10,
    projection_seed=0,
    kmeans_seed=0,
    max_iter=100,
) -> IntervalPlan:
    """Full pipeline: chunks -> BBVs -> projection -> k-means -> representatives."""
    chunks = slice_chunks(trace.meta, chunk_size)
    bbv = build_bbvs(trace, chunks)
    proj = random_project(bbv, dim, projection_seed)
    sweep = None
    if k is None:
        k, sweep = choose_k(proj, max_k, kmeans_seed, max_iter=max_iter)
    clustering = kmeans(proj, k, kmeans_seed, max_iter)
    plan = select_representatives(clustering, proj, chunks)
    prov = dict(plan.provenance, dim=dim, chunks=len(chunks))
    if sweep is not None:
        prov["k_sweep_inertia"] = sweep
    seeds = {"projection": projection_seed, "kmeans": kmeans_seed}
    return replace(plan, seeds=seeds, provenance=prov).validate(len(trace))


def plan_instructions(plan: IntervalPlan) -> int:
    return sum(iv.length for iv in plan.intervals)

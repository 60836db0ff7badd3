"""End-to-end experiments: traces -> intervals -> policy runs -> reweighting -> metrics.

Every simulation is memoised in a ``RunLedger`` (line-delimited JSON keyed by
a content hash of trace, hierarchy, policy, interval and seed), so re-running
an experiment only simulates what is missing.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from interval_lab import cache as cs
from interval_lab.cache import HierarchyConfig, SimStats, TimelinePoint
from interval_lab.errors import IntervalLabError, SpecError
from interval_lab.metrics import (
    BenchmarkRecord,
    MetricsReport,
    ScenarioParams,
    evaluate_records,
)
from interval_lab.phases import IntervalPlan, ff_plan, full_plan, simpoint_plan, top_weight_plan
from interval_lab.policies import ORDERED_POLICIES, PolicyKind
from interval_lab.reweight import PolicyResult, mpkilru_weights, mpkimax_weights, weighted_metric
from interval_lab.seeds import derive_seed
from interval_lab.synth import SyntheticWorkloadSpec, generate_synthetic
from interval_lab.trace import Trace, load_trace

log = logging.getLogger(__name__)

STRATEGY_KINDS = ("full", "ff", "spt", "weight", "mpkilru", "mpkimax")
REWEIGHTED = ("weight", "mpkilru", "mpkimax")
THREADS_ENV = "INTERVAL_LAB_THREADS"


# -- experiment description -------------------------------------------------------------


@dataclass(frozen=True)
class BenchmarkSpec:
    name: str
    input_label: str = "train"
    trace: str | None = None
    synthetic: dict | None = None

    def __post_init__(self):
        if (self.trace is None) == (self.synthetic is None):
            raise SpecError(f"benchmark {self.name}: give exactly one of 'trace' or 'synthetic'")


@dataclass(frozen=True)
class StrategySpec:
    kind: str
    name: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise SpecError(f"unknown strategy kind {self.kind!r}")
        if not self.name:
            object.__setattr__(self, "name", self.kind)

    @classmethod
    def parse(cls, value) -> "StrategySpec":
        if isinstance(value, StrategySpec):
            return value
        if isinstance(value, str):
            return cls(value)
        value = dict(value)
        kind = value.pop("kind", None)
        name = value.pop("name", "")
        if kind is None:
            raise SpecError(f"strategy without kind: {value}")
        return cls(kind, name, value)


@dataclass(frozen=True)
class ExperimentSpec:
    benchmarks: tuple[BenchmarkSpec, ...]
    hierarchy: HierarchyConfig
    policies: tuple[PolicyKind, ...]
    strategies: tuple[StrategySpec, ...]
    scenarios: ScenarioParams = ScenarioParams()
    output_dir: str | None = None
    master_seed: int = 0
    timeline_window: int | None = None
    threads: int = 1
    name: str = "experiment"

    def __post_init__(self):
        for attr in ("benchmarks", "policies", "strategies"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))
        self.validate()

    def strategy(self, kind):
        for s in self.strategies:
            if s.kind == kind:
                return s
        return None

    def validate(self):
        if not self.benchmarks:
            raise SpecError("experiment has no benchmarks")
        if not self.policies:
            raise SpecError("experiment has no policies")
        kinds = [s.kind for s in self.strategies]
        names = [s.name for s in self.strategies]
        if len(set(names)) != len(names):
            raise SpecError("strategy names must be unique")
        if kinds.count("spt") > 1:
            raise SpecError("at most one spt strategy per experiment")
        for k in REWEIGHTED:
            if k in kinds and "spt" not in kinds:
                raise SpecError(f"strategy {k} needs an spt strategy to reweight")
        policy_kinds = [p.kind for p in self.policies]
        if "mpkilru" in kinds and "LRU" not in policy_kinds:
            raise SpecError("mpkilru needs the LRU policy")
        if len(set(policy_kinds)) != len(policy_kinds):
            raise SpecError("duplicate policies")
        names = [(b.name, b.input_label) for b in self.benchmarks]
        if len(set(names)) != len(names):
            raise SpecError("duplicate benchmark/input pairs")

    @classmethod
    def from_json(cls, data, base_dir=".") -> "ExperimentSpec":
        base = Path(base_dir)
        try:
            benches = []
            for b in data["benchmarks"]:
                trace = b.get("trace")
                if trace is not None and not Path(trace).is_absolute():
                    trace = str(base / trace)
                benches.append(
                    BenchmarkSpec(b["name"], b.get("input", b.get("input_label", "train")), trace, b.get("synthetic"))
                )
            hier = data.get("hierarchy", "desk")
            hierarchy = HierarchyConfig.from_json(hier)
            policies = [PolicyKind.parse(p) for p in data.get("policies", ["LRU", "TreeLRU", "Random", "SRRIP", "BRRIP"])]
            strategies = [StrategySpec.parse(s) for s in data.get("strategies", ["full", "spt"])]
            sc = data.get("scenarios", {})
            scenarios = ScenarioParams(
                low_threshold=float(sc.get("low_threshold", 0.1)),
                high_fraction=float(sc.get("high_fraction", 0.8)),
                exclude=tuple(sc.get("exclude", ("leela", "cam4"))),
            )
            out = data.get("output_dir")
            if out is not None and not Path(out).is_absolute():
                out = str(base / out)
            return cls(
                tuple(benches),
                hierarchy,
                tuple(policies),
                tuple(strategies),
                scenarios,
                out,
                int(data.get("master_seed", 0)),
                data.get("timeline_window"),
                int(data.get("threads", 1)),
                data.get("name", "experiment"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecError(f"bad experiment spec: {exc!r}") from None


def load_experiment(path) -> ExperimentSpec:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: {exc}") from None
    return ExperimentSpec.from_json(data, base_dir=path.parent)


# -- ledger ------------------------------------------------------------------------------


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class SimJob:
    """One measured simulation: [start, start+length) after warming from warmup_start."""

    benchmark: str
    input_label: str
    trace_digest: str
    config: dict
    policy: dict
    start: int
    length: int
    warmup_start: int
    seed: int
    window: int | None = None
    tag: str = ""

    @property
    def key(self):
        payload = {
            "trace": self.trace_digest,
            "config": self.config,
            "policy": self.policy,
            "start": self.start,
            "length": self.length,
            "warmup_start": self.warmup_start,
            "seed": self.seed,
            "window": self.window,
        }
        return hashlib.sha256(_canonical(payload).encode()).hexdigest()


class RunLedger:
    """Append-only, content-addressed store of simulation results."""

    def __init__(self, path=None):
        self.path = Path(path) if path else None
        self.entries: dict[str, dict] = {}
        if self.path and self.path.exists():
            with open(self.path) as f:
                for line in f:
                    if line.strip():
                        rec = json.loads(line)
                        self.entries[rec["key"]] = rec

    def __contains__(self, key):
        return key in self.entries

    def __len__(self):
        return len(self.entries)

    def get(self, key):
        return self.entries.get(key)

    def add(self, job: SimJob, stats: SimStats, timeline=None):
        rec = {
            "key": job.key,
            "benchmark": job.benchmark,
            "input": job.input_label,
            "policy": job.policy,
            "start": job.start,
            "length": job.length,
            "warmup_start": job.warmup_start,
            "seed": job.seed,
            "tag": job.tag,
            "stats": stats.to_json(),
        }
        if timeline is not None:
            rec["timeline"] = [[p.window_start_instruction, p.window_length, p.llc_misses] for p in timeline]
        self.entries[job.key] = rec
        if self.path:
            line = json.dumps(rec, sort_keys=True) + "\n"
            fd = os.open(self.path, os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o644)
            try:
                os.write(fd, line.encode())
            finally:
                os.close(fd)

    def stats(self, key) -> SimStats:
        return SimStats.from_json(self.entries[key]["stats"])

    def timeline(self, key) -> list[TimelinePoint]:
        rec = self.entries[key]
        return [TimelinePoint(s, ln, 1000.0 * m / ln, m) for s, ln, m in rec.get("timeline", [])]


# -- planning ----------------------------------------------------------------------------


@dataclass
class Task:
    id: str
    kind: str
    deps: tuple[str, ...] = ()
    job: SimJob | None = None
    cached: bool = False


@dataclass
class BenchState:
    spec: BenchmarkSpec
    trace: Trace | None = None
    spt: IntervalPlan | None = None
    ff: dict = field(default_factory=dict)
    jobs: dict = field(default_factory=dict)  # (policy kind, role) -> SimJob
    error: str | None = None


@dataclass
class ExperimentPlan:
    spec: ExperimentSpec
    tasks: list[Task]
    benches: list[BenchState]

    @property
    def sim_tasks(self):
        return [t for t in self.tasks if t.kind == "sim"]

    @property
    def pending(self):
        return [t for t in self.sim_tasks if not t.cached]

    def task(self, task_id):
        for t in self.tasks:
            if t.id == task_id:
                return t
        raise KeyError(task_id)


def materialize_trace(bench: BenchmarkSpec, master_seed) -> Trace:
    if bench.trace is not None:
        trace = load_trace(bench.trace)
        trace.name, trace.input_label = bench.name, bench.input_label
        return trace
    data = dict(bench.synthetic)
    data.setdefault("seed", derive_seed(master_seed, "generator", bench.name, bench.input_label))
    data["name"], data["input_label"] = bench.name, bench.input_label
    _, trace = generate_synthetic(SyntheticWorkloadSpec.from_json(data))
    return trace


def _spt_from_spec(spec: ExperimentSpec, bench: BenchmarkSpec, trace: Trace) -> IntervalPlan:
    p = spec.strategy("spt").params
    return simpoint_plan(
        trace,
        chunk_size=int(p.get("chunk", 10_000)),
        dim=int(p.get("dim", 15)),
        k=p.get("k"),
        max_k=int(p.get("max_k", 10)),
        projection_seed=derive_seed(spec.master_seed, "projection", bench.name, bench.input_label),
        kmeans_seed=derive_seed(spec.master_seed, "kmeans", bench.name, bench.input_label),
        max_iter=int(p.get("max_iter", 100)),
    )


def timeline_window(spec: ExperimentSpec, n_events) -> int:
    if spec.timeline_window:
        return int(spec.timeline_window)
    spt = spec.strategy("spt")
    if spt is not None:
        return int(spt.params.get("chunk", 10_000))
    return max(1, n_events // 100)


def plan_experiment(spec: ExperimentSpec, ledger: RunLedger | None = None) -> ExperimentPlan:
    """Resolve traces and SimPoint intervals, then lay out the ordered task graph.

    Order per benchmark: trace, chunks, phases, interval runs, mpkilru, mpkimax,
    full runs; a final metrics task depends on everything.
    """
    ledger = ledger if ledger is not None else RunLedger()
    tasks: list[Task] = []
    benches = []
    kinds = [s.kind for s in spec.strategies]
    for bench in spec.benchmarks:
        b = BenchState(bench)
        benches.append(b)
        tag = f"{bench.name}/{bench.input_label}"
        tasks.append(Task(f"trace:{tag}", "trace"))
        try:
            b.trace = materialize_trace(bench, spec.master_seed)
        except IntervalLabError as exc:
            b.error = f"{type(exc).__name__}: {exc}"
            continue
        n = len(b.trace)
        digest = b.trace.digest()
        last = f"trace:{tag}"
        if "spt" in kinds:
            tasks.append(Task(f"chunks:{tag}", "chunks", (last,)))
            tasks.append(Task(f"phases:{tag}", "phases", (f"chunks:{tag}",)))
            last = f"phases:{tag}"
            try:
                b.spt = _spt_from_spec(spec, bench, b.trace)
            except IntervalLabError as exc:
                b.error = f"{type(exc).__name__}: {exc}"
                continue
        warm = int(spec.strategy("spt").params.get("warmup", 0)) if "spt" in kinds else 0

        def add_sim(policy, role, start, length, warmup_start, deps, window=None):
            job = SimJob(
                bench.name,
                bench.input_label,
                digest,
                spec.hierarchy.with_llc_policy(policy).to_json(),
                policy.to_json(),
                start,
                length,
                warmup_start,
                derive_seed(spec.master_seed, "policy", bench.name, bench.input_label, policy.kind),
                window,
                role,
            )
            b.jobs[(policy.kind, role)] = job
            tid = f"sim:{tag}:{policy.kind}:{role}"
            tasks.append(Task(tid, "sim", tuple(deps), job, job.key in ledger))
            return tid

        interval_tasks = {}
        if b.spt is not None:
            for policy in spec.policies:
                ids = []
                for iv in b.spt.intervals:
                    warmup_start = max(0, iv.start - warm)
                    ids.append(add_sim(policy, f"spt:{iv.chunk_index}", iv.start, iv.length, warmup_start, (last,)))
                interval_tasks[policy.kind] = ids
            if "mpkilru" in kinds:
                tasks.append(Task(f"reweight:{tag}:mpkilru", "reweight", tuple(interval_tasks["LRU"])))
            if "mpkimax" in kinds:
                excl = set(spec.strategy("mpkimax").params.get("exclude", ()))
                deps = [t for p, ids in interval_tasks.items() if p not in excl for t in ids]
                tasks.append(Task(f"reweight:{tag}:mpkimax", "reweight", tuple(deps)))
        for strat in spec.strategies:
            if strat.kind != "ff":
                continue
            try:
                plan = ff_plan(int(strat.params["skip"]), int(strat.params["length"]), n)
            except (KeyError, ValueError) as exc:
                raise SpecError(f"strategy {strat.name}: {exc}") from None
            except IntervalLabError as exc:
                b.error = f"{type(exc).__name__}: {exc}"
                break
            b.ff[strat.name] = plan
            iv = plan.intervals[0]
            for policy in spec.policies:
                add_sim(policy, f"ff:{strat.name}", iv.start, iv.length, 0, (f"trace:{tag}",))
        if "full" in kinds:
            window = timeline_window(spec, n)
            for policy in spec.policies:
                add_sim(policy, "full", 0, n, 0, (f"trace:{tag}",), window)
    tasks.append(Task("metrics", "metrics", tuple(t.id for t in tasks)))
    return ExperimentPlan(spec, tasks, benches)


# -- execution ---------------------------------------------------------------------------


def _run_group(trace: Trace, config_json, policy_json, seed, jobs: Sequence[SimJob]):
    """Run the jobs of one (benchmark, policy) pair; returns [(stats, timeline|None)]."""
    config = HierarchyConfig.from_json(config_json)
    policy = PolicyKind.parse(policy_json)
    out = []
    for job in jobs:
        if job.window:
            segs = cs.window_segments(job.length, job.window)
            segs = [(job.start + s, ln) for s, ln in segs]
            parts = cs.run_segments(trace, config, policy, segs, seed, warmup_start=job.warmup_start)
            out.append((cs.merge_stats(config, parts), cs.timeline_from_stats(segs, parts)))
        else:
            st = cs.run_segments(
                trace, config, policy, [(job.start, job.length)], seed, warmup_start=job.warmup_start
            )[0]
            out.append((st, None))
    return out


def resolve_threads(requested=1):
    env = os.environ.get(THREADS_ENV)
    threads = max(1, int(requested or 1))
    if env:
        threads = min(threads, max(1, int(env)))
    return threads


def execute_plan(plan: ExperimentPlan, ledger: RunLedger, threads=1) -> int:
    """Run every pending simulation; returns the number executed."""
    by_bench = {(b.spec.name, b.spec.input_label): b for b in plan.benches}
    groups: dict[tuple, list[SimJob]] = {}
    for t in plan.pending:
        j = t.job
        if j.key in ledger:
            t.cached = True
            continue
        groups.setdefault((j.benchmark, j.input_label, j.policy["kind"]), []).append(j)
    seen = set()
    work = []
    for key, jobs in groups.items():
        uniq = []
        for j in jobs:
            if j.key not in seen:
                seen.add(j.key)
                uniq.append(j)
        bench = by_bench[key[:2]]
        first = uniq[0]
        work.append((bench.trace, first.config, first.policy, first.seed, uniq))

    executed = 0
    threads = resolve_threads(threads)
    if threads > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(work))) as pool:
            futures = [pool.submit(_run_group, *w) for w in work]
            results = [f.result() for f in futures]
    else:
        results = [_run_group(*w) for w in work]
    for w, res in zip(work, results):
        for job, (st, tl) in zip(w[4], res):
            ledger.add(job, st, tl)
            executed += 1
    for t in plan.sim_tasks:
        t.cached = t.job.key in ledger
    return executed


# -- results -----------------------------------------------------------------------------


@dataclass
class BenchmarkResult:
    name: str
    input_label: str
    event_count: int
    plans: dict[str, IntervalPlan]
    values: dict[str, dict[str, dict[str, float]]]  # strategy -> policy -> {"mpki", "cpi"}
    full: dict[str, SimStats]
    timeline: list[TimelinePoint]
    interval_results: dict[str, PolicyResult]


@dataclass
class ExperimentResult:
    report: MetricsReport
    benchmarks: list[BenchmarkResult]
    records: list[BenchmarkRecord]
    budget: list[dict]
    failures: list[dict]
    executed: int
    cached: int
    files: dict[str, Path] = field(default_factory=dict)


def _subresult(result: PolicyResult, plan: IntervalPlan, source: IntervalPlan) -> PolicyResult:
    idx = {(iv.start, iv.length): i for i, iv in enumerate(source.intervals)}
    return PolicyResult(result.policy, [result.per_interval[idx[(iv.start, iv.length)]] for iv in plan.intervals], result.full)


def assemble_benchmark(spec: ExperimentSpec, b: BenchState, ledger: RunLedger) -> BenchmarkResult:
    kinds = [s.kind for s in spec.strategies]
    n = len(b.trace)
    plans: dict[str, IntervalPlan] = {}
    values: dict[str, dict[str, dict[str, float]]] = {}
    full: dict[str, SimStats] = {}
    interval_results: dict[str, PolicyResult] = {}
    timeline: list[TimelinePoint] = []

    def record(strategy, policy, mpki, cpi):
        values.setdefault(strategy, {})[policy] = {"mpki": mpki, "cpi": cpi}

    if "full" in kinds:
        for policy in spec.policies:
            job = b.jobs[(policy.kind, "full")]
            full[policy.kind] = ledger.stats(job.key)
        lru = b.jobs.get(("LRU", "full")) or b.jobs[(spec.policies[0].kind, "full")]
        timeline = ledger.timeline(lru.key)
        plans["full"] = full_plan(n)
        for p, st in full.items():
            record("full", p, st.mpki_llc, st.cpi)
    for name, plan in b.ff.items():
        plans[name] = plan
        for policy in spec.policies:
            st = ledger.stats(b.jobs[(policy.kind, f"ff:{name}")].key)
            record(name, policy.kind, st.mpki_llc, st.cpi)
    if b.spt is not None:
        spt = b.spt
        for policy in spec.policies:
            per = [ledger.stats(b.jobs[(policy.kind, f"spt:{iv.chunk_index}")].key) for iv in spt.intervals]
            interval_results[policy.kind] = PolicyResult(policy, per, full.get(policy.kind))
        if "spt" in kinds:
            plans["spt"] = spt
        if "weight" in kinds:
            plans["weight"] = top_weight_plan(spt)
        if "mpkilru" in kinds:
            plans["mpkilru"] = mpkilru_weights(spt, interval_results["LRU"])
        if "mpkimax" in kinds:
            excl = tuple(spec.strategy("mpkimax").params.get("exclude", ()))
            plans["mpkimax"] = mpkimax_weights(spt, list(interval_results.values()), exclude=excl)
        for strat in ("spt", "weight", "mpkilru", "mpkimax"):
            if strat not in plans:
                continue
            for pk, res in interval_results.items():
                sub = _subresult(res, plans[strat], spt)
                record(strat, pk, weighted_metric(plans[strat], sub, "mpki"), weighted_metric(plans[strat], sub, "cpi"))
    return BenchmarkResult(b.spec.name, b.spec.input_label, n, plans, values, full, timeline, interval_results)


def to_record(spec: ExperimentSpec, res: BenchmarkResult) -> BenchmarkRecord | None:
    if "full" not in res.values or any(p not in res.values["full"] for p in ORDERED_POLICIES):
        return None
    names = [s.name for s in spec.strategies if s.kind != "full"]
    per, per_cpi = {}, {}
    for s in names:
        if s in res.values and all(p in res.values[s] for p in ORDERED_POLICIES):
            per[s] = {p: res.values[s][p]["mpki"] for p in ORDERED_POLICIES}
            per_cpi[s] = {p: res.values[s][p]["cpi"] for p in ORDERED_POLICIES}
    return BenchmarkRecord(
        res.name,
        res.input_label,
        {p: res.values["full"][p]["mpki"] for p in ORDERED_POLICIES},
        per,
        res.values["full"]["LRU"]["mpki"],
        {p: res.values["full"][p]["cpi"] for p in ORDERED_POLICIES},
        per_cpi,
    )


def budget_row(benchmark, input_label, strategy, full_size, interval_lengths) -> dict:
    """Instructions simulated in detail by a strategy, as a percentage of the full run."""
    simulated = sum(interval_lengths)
    return {
        "benchmark": benchmark,
        "input": input_label,
        "strategy": strategy,
        "full_size": full_size,
        "intervals": len(interval_lengths),
        "simulated": simulated,
        "percent": 100.0 * simulated / full_size,
    }


def instruction_budget_report(spec: ExperimentSpec, results: Sequence[BenchmarkResult]) -> list[dict]:
    rows = []
    for res in results:
        for strat in spec.strategies:
            plan = res.plans.get(strat.name)
            if plan is None:
                continue
            rows.append(
                budget_row(res.name, res.input_label, strat.name, res.event_count, [iv.length for iv in plan.intervals])
            )
    return rows


# -- report files --------------------------------------------------------------------------


def _csv(rows, fields):
    lines = [",".join(fields)]
    for r in rows:
        lines.append(",".join(_cell(r.get(f)) for f in fields))
    return "\n".join(lines) + "\n"


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    s = str(v)
    if any(c in s for c in ',"\n'):
        s = '"' + s.replace('"', '""') + '"'
    return s


def write_reports(spec: ExperimentSpec, result: ExperimentResult, out: Path) -> dict[str, Path]:
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    policy_names = [p.kind for p in spec.policies]
    strategy_names = [s.name for s in spec.strategies]

    metric_rows = []
    bars = []
    for res in result.benchmarks:
        for strat in strategy_names:
            for p in policy_names:
                v = res.values.get(strat, {}).get(p)
                if v is None:
                    continue
                for m in ("mpki", "cpi"):
                    metric_rows.append(
                        {"benchmark": res.name, "input": res.input_label, "strategy": strat, "metric": f"{m}:{p}", "value": v[m]}
                    )
                bars.append({"benchmark": res.name, "input": res.input_label, "strategy": strat, "policy": p, **v})
    metric_rows.extend(result.report.rows)
    cols = ["benchmark", "input", "strategy", "metric", "value"]
    files["metrics"] = out / "metrics.csv"
    files["metrics"].write_text(_csv(metric_rows, cols))
    files["policy_bars"] = out / "policy_bars.csv"
    files["policy_bars"].write_text(_csv(bars, ["benchmark", "input", "strategy", "policy", "mpki", "cpi"]))

    tl_rows, marks = [], []
    for res in result.benchmarks:
        for pt in res.timeline:
            tl_rows.append(
                {
                    "benchmark": res.name,
                    "input": res.input_label,
                    "window_start": pt.window_start_instruction,
                    "window_length": pt.window_length,
                    "mpki_llc": pt.mpki_llc,
                }
            )
        for strat in ("spt", "mpkilru", "mpkimax"):
            plan = res.plans.get(strat)
            if plan is None:
                continue
            ranked = sorted(range(len(plan.intervals)), key=lambda i: (-plan.intervals[i].weight, plan.intervals[i].start))
            rank = {i: r + 1 for r, i in enumerate(ranked)}
            for i, iv in enumerate(plan.intervals):
                marks.append(
                    {
                        "benchmark": res.name,
                        "input": res.input_label,
                        "strategy": strat,
                        "chunk_index": iv.chunk_index,
                        "start": iv.start,
                        "length": iv.length,
                        "weight": iv.weight,
                        "rank": rank[i],
                    }
                )
    files["timelines"] = out / "timelines.csv"
    files["timelines"].write_text(_csv(tl_rows, ["benchmark", "input", "window_start", "window_length", "mpki_llc"]))
    files["interval_markers"] = out / "interval_markers.csv"
    files["interval_markers"].write_text(
        _csv(marks, ["benchmark", "input", "strategy", "chunk_index", "start", "length", "weight", "rank"])
    )
    files["budget"] = out / "budget.csv"
    files["budget"].write_text(
        _csv(result.budget, ["benchmark", "input", "strategy", "full_size", "intervals", "simulated", "percent"])
    )

    tables = {
        "order": result.report.grid.get("order", {}),
        "closeness_mpki": result.report.grid.get("closeness_mpki", {}),
        "closeness_cpi": result.report.grid.get("closeness_cpi", {}),
        "budget": result.budget,
        "notes": result.report.notes,
    }
    files["tables"] = out / "tables.json"
    files["tables"].write_text(json.dumps(tables, indent=2, sort_keys=True) + "\n")

    plan_dir = out / "plans"
    plan_dir.mkdir(exist_ok=True)
    for res in result.benchmarks:
        for strat, plan in res.plans.items():
            p = plan_dir / f"{res.name}__{res.input_label}.{strat}.json"
            p.write_text(json.dumps(plan.to_json(), indent=2, sort_keys=True) + "\n")
    manifest = out / "failures.json"
    if result.failures:
        manifest.write_text(json.dumps(result.failures, indent=2) + "\n")
        files["failures"] = manifest
    elif manifest.exists():
        manifest.unlink()
    return files


def run_experiment(spec: ExperimentSpec, out_dir=None, ledger: RunLedger | None = None, threads=None) -> ExperimentResult:
    out = Path(out_dir or spec.output_dir or "report")
    out.mkdir(parents=True, exist_ok=True)
    if ledger is None:
        ledger = RunLedger(out / "ledger.jsonl")
    plan = plan_experiment(spec, ledger)
    cached = len(plan.sim_tasks) - len(plan.pending)
    executed = execute_plan(plan, ledger, threads if threads is not None else spec.threads)

    results, records, failures = [], [], []
    for b in plan.benches:
        if b.error:
            failures.append({"benchmark": b.spec.name, "input": b.spec.input_label, "error": b.error})
            continue
        try:
            res = assemble_benchmark(spec, b, ledger)
        except IntervalLabError as exc:
            failures.append({"benchmark": b.spec.name, "input": b.spec.input_label, "error": f"{type(exc).__name__}: {exc}"})
            continue
        results.append(res)
        rec = to_record(spec, res)
        if rec is not None:
            records.append(rec)
    compared = [s.name for s in spec.strategies if s.kind != "full"]
    if records and compared:
        report = evaluate_records(records, compared, spec.scenarios)
    else:
        report = MetricsReport([], {}, [] if records else ["no full-simulation records with all four ordered policies"])
    budget = instruction_budget_report(spec, results)
    result = ExperimentResult(report, results, records, budget, failures, executed, cached)
    result.files = write_reports(spec, result, out)
    return result

"""Representativeness metrics: pairwise order, MPKI/CPI closeness, scenario means."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping, Sequence

from interval_lab.errors import DivisionByZeroFull, EmptyScenario, SpecError
from interval_lab.policies import ORDERED_POLICIES

TIE_RTOL = 1e-9
GEO_FLOOR = 1e-6
SCENARIOS = ("Avg", "AvgWoLow", "AvgWoLowPlusExcl", "AvgHigh", "AvgChanges")

PolicyVector = Mapping[str, float]


@dataclass(frozen=True)
class ScenarioParams:
    low_threshold: float = 0.1
    high_fraction: float = 0.8
    exclude: tuple[str, ...] = ("leela", "cam4")
    reference_strategy: str = "spt"


@dataclass
class BenchmarkRecord:
    benchmark: str
    input: str
    full: dict[str, float]
    per_strategy: dict[str, dict[str, float]]
    lru_full_mpki: float
    full_cpi: dict[str, float] = field(default_factory=dict)
    per_strategy_cpi: dict[str, dict[str, float]] = field(default_factory=dict)


def _values(vec: PolicyVector):
    try:
        vals = [float(vec[p]) for p in ORDERED_POLICIES]
    except KeyError as exc:
        raise SpecError(f"policy vector missing {exc.args[0]}") from None
    return vals


def _sign(a, b):
    diff = a - b
    if abs(diff) <= TIE_RTOL * max(abs(a), abs(b)):
        return 0
    return 1 if diff > 0 else -1


def order_metric(full: PolicyVector, proposal: PolicyVector) -> int:
    """Number of the six policy pairs whose relative order differs from full."""
    f = _values(full)
    p = _values(proposal)
    return sum(_sign(f[i], f[j]) != _sign(p[i], p[j]) for i, j in combinations(range(len(f)), 2))


def closeness(full: PolicyVector, proposal: PolicyVector) -> float:
    """Sum over policies of |(full - proposal) / full|."""
    f = _values(full)
    p = _values(proposal)
    if any(v == 0 for v in f):
        raise DivisionByZeroFull("full-simulation value of 0; closeness undefined")
    return float(sum(abs((a - b) / a) for a, b in zip(f, p)))


closeness_mpki = closeness
closeness_cpi = closeness


def scenario_filter(records: Sequence[BenchmarkRecord], scenario: str, params=ScenarioParams()):
    if scenario not in SCENARIOS:
        raise SpecError(f"unknown scenario {scenario!r}")
    if scenario == "Avg":
        out = list(records)
    elif scenario == "AvgWoLow":
        out = [r for r in records if r.lru_full_mpki >= params.low_threshold]
    elif scenario == "AvgWoLowPlusExcl":
        out = [
            r for r in records if r.lru_full_mpki >= params.low_threshold and r.benchmark not in params.exclude
        ]
    elif scenario == "AvgHigh":
        ranked = sorted(records, key=lambda r: -r.lru_full_mpki)
        total = sum(r.lru_full_mpki for r in records)
        out, acc = [], 0.0
        for r in ranked:
            if total > 0 and acc > params.high_fraction * total:
                break
            out.append(r)
            acc += r.lru_full_mpki
    else:
        ref = params.reference_strategy
        out = [r for r in records if ref in r.per_strategy and order_metric(r.full, r.per_strategy[ref]) > 0]
    if not out:
        raise EmptyScenario(f"scenario {scenario} selects no benchmarks")
    return out


def _collapse(values):
    """Pre-average multiple inputs of one benchmark; accepts floats or (benchmark, value)."""
    groups = defaultdict(list)
    order = []
    for i, v in enumerate(values):
        if isinstance(v, tuple):
            key, val = v
        else:
            key, val = i, v
        if key not in groups:
            order.append(key)
        groups[key].append(float(val))
    return [sum(groups[k]) / len(groups[k]) for k in order]


def aggregate(values, mean="arithmetic") -> float:
    """Cross-benchmark mean after collapsing multi-input benchmarks to their mean.

    Geometric means floor non-positive values at 1e-6; see ``needs_floor``.
    """
    vals = _collapse(values)
    if not vals:
        raise EmptyScenario("nothing to aggregate")
    if mean == "arithmetic":
        return float(sum(vals) / len(vals))
    if mean == "geometric":
        logs = [math.log(max(v, GEO_FLOOR)) for v in vals]
        return float(math.exp(sum(logs) / len(logs)))
    raise SpecError(f"unknown mean {mean!r}")


def needs_floor(values) -> bool:
    return any(v < GEO_FLOOR for v in _collapse(values))


@dataclass
class MetricsReport:
    """Per-benchmark metric rows plus scenario x strategy means."""

    rows: list[dict]
    grid: dict
    notes: list[str]

    def value(self, benchmark, strategy, metric, input=None):
        for r in self.rows:
            if (
                r["benchmark"] == benchmark
                and r["strategy"] == strategy
                and r["metric"] == metric
                and (input is None or r["input"] == input)
            ):
                return r["value"]
        return None


def evaluate_records(records: Sequence[BenchmarkRecord], strategies: Sequence[str], params=ScenarioParams()):
    rows, notes = [], []
    per_metric = {"order": defaultdict(list), "closeness_mpki": defaultdict(list), "closeness_cpi": defaultdict(list)}
    for rec in records:
        for strat in strategies:
            if strat not in rec.per_strategy:
                continue
            prop = rec.per_strategy[strat]
            vals = {"order": order_metric(rec.full, prop)}
            for metric, full, cur in (
                ("closeness_mpki", rec.full, prop),
                ("closeness_cpi", rec.full_cpi, rec.per_strategy_cpi.get(strat)),
            ):
                if not full or cur is None:
                    continue
                try:
                    vals[metric] = closeness(full, cur)
                except DivisionByZeroFull:
                    notes.append(f"{rec.benchmark}/{rec.input}: zero full {metric[10:]} value, excluded from {metric}")
            for metric, v in vals.items():
                rows.append({"benchmark": rec.benchmark, "input": rec.input, "strategy": strat, "metric": metric, "value": v})
                per_metric[metric][(strat, id(rec))].append(v)

    grid = {}
    notes_seen = set()
    for metric in per_metric:
        grid[metric] = {}
        for scenario in SCENARIOS:
            if metric != "order" and scenario == "AvgChanges":
                continue
            try:
                subset = scenario_filter(records, scenario, params)
            except EmptyScenario:
                note = f"scenario {scenario} is empty"
                if note not in notes_seen:
                    notes.append(note)
                    notes_seen.add(note)
                continue
            cell = {}
            for strat in strategies:
                values = [
                    (r.benchmark, per_metric[metric][(strat, id(r))][0])
                    for r in subset
                    if per_metric[metric].get((strat, id(r)))
                ]
                if not values:
                    continue
                cell[strat] = {
                    "arithmetic": aggregate(values, "arithmetic"),
                    "geometric": aggregate(values, "geometric"),
                    "n": len(_collapse(values)),
                }
                if needs_floor(values):
                    cell[strat]["geometric_floored"] = True
            if cell:
                grid[metric][scenario] = cell
    if any(len({r.input for r in records if r.benchmark == b}) > 1 for b in {r.benchmark for r in records}):
        notes.append("multi-input benchmarks pre-averaged before cross-benchmark means (all metrics)")
    return MetricsReport(rows, grid, notes)

"""LLC-activity reweighting of SimPoint intervals (mpkilru / mpkimax).

Both strategies keep the interval set of the source plan and only replace the
weights, so they cost no simulation beyond what the policies already ran:

* mpkilru: weight_s = MPKI_LRU(s) / sum_i MPKI_LRU(i)
* mpkimax: weight_s = max_p MPKI_p(s) / sum_i max_p MPKI_p(i)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

from interval_lab.cache import SimStats
from interval_lab.errors import AlignmentError, AllZeroActivity, SpecError
from interval_lab.phases import IntervalPlan
from interval_lab.policies import PolicyKind

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PolicyResult:
    policy: PolicyKind
    per_interval: tuple[SimStats, ...]
    full: SimStats | None = None

    def __post_init__(self):
        object.__setattr__(self, "policy", PolicyKind.parse(self.policy))
        object.__setattr__(self, "per_interval", tuple(self.per_interval))

    def mpkis(self):
        return [s.mpki_llc for s in self.per_interval]


def _check_aligned(plan: IntervalPlan, result: PolicyResult):
    if len(result.per_interval) != len(plan.intervals):
        raise AlignmentError(
            f"{result.policy}: {len(result.per_interval)} interval results for a plan of {len(plan.intervals)}"
        )
    for iv, st in zip(plan.intervals, result.per_interval):
        if st.instructions != iv.length:
            raise AlignmentError(f"{result.policy}: result covers {st.instructions} instructions, interval has {iv.length}")


def normalize_activity(values: Sequence[float]) -> list[float]:
    """value_s / sum(values); raises AllZeroActivity if the sum is not positive."""
    total = float(sum(values))
    if not total > 0:
        raise AllZeroActivity("all intervals report zero LLC activity")
    return [v / total for v in values]


def _reweight(plan, activity, strategy, provenance, on_zero):
    prov = dict(plan.provenance)
    prov.update(provenance)
    prov["source_strategy"] = plan.strategy
    prov["source_weights"] = plan.weights
    try:
        weights = normalize_activity(activity)
        prov["fallback"] = False
    except AllZeroActivity:
        if on_zero == "raise":
            raise
        log.warning("%s: zero LLC activity in every interval; keeping original weights", strategy)
        weights = plan.weights
        prov["fallback"] = True
    return plan.with_weights(weights, strategy, prov)


def mpkilru_weights(plan: IntervalPlan, lru_result: PolicyResult, on_zero="fallback") -> IntervalPlan:
    if lru_result.policy.kind != "LRU":
        raise SpecError(f"mpkilru needs LRU results, got {lru_result.policy}")
    _check_aligned(plan, lru_result)
    activity = lru_result.mpkis()
    return _reweight(plan, activity, "mpkilru", {"activity": activity, "policies": ["LRU"]}, on_zero)


def mpkimax_weights(
    plan: IntervalPlan, results: Sequence[PolicyResult], exclude=(), on_zero="fallback"
) -> IntervalPlan:
    used = [r for r in results if r.policy.kind not in exclude]
    if not used:
        raise SpecError("mpkimax needs at least one policy result")
    for r in used:
        _check_aligned(plan, r)
    activity = [max(vals) for vals in zip(*(r.mpkis() for r in used))]
    prov = {"activity": activity, "policies": sorted({str(r.policy) for r in used})}
    return _reweight(plan, activity, "mpkimax", prov, on_zero)


def weighted_metric(plan: IntervalPlan, result: PolicyResult, metric="mpki") -> float:
    """sum_s weight_s * metric_s over the plan's intervals."""
    _check_aligned(plan, result)
    return float(sum(iv.weight * st.metric(metric) for iv, st in zip(plan.intervals, result.per_interval)))

"""Two-stage optimizer composition: run a global stage until it stalls,
derive tightened bounds from where it stopped, then hand off to a local
stage inside the remaining budget.

The canonical pairing runs implicit filtering first and branch-and-fit
second: the last good stencil of the first stage provides the bounds the
second stage needs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    Box,
    Budget,
    ContractViolation,
    EvalRecord,
    OptimizeOutcome,
    Termination,
    best_of,
    clamp,
)
from .imfil import StallReport
from .registry import make_optimizer


@dataclass(frozen=True)
class CompositionPlan:
    first: str = "imfil"
    second: str = "snobfit"
    first_options: dict = field(default_factory=dict)
    second_options: dict = field(default_factory=dict)
    bounds_rule: str = "LastGoodStencil"  # or "BestPointRadius"
    best_point_radius: float = 0.05  # fraction of box width, BestPointRadius rule
    budget_split: str = "FirstUntilStall"  # or "FixedFraction"
    first_fraction: float = 0.5

    def __post_init__(self):
        if self.bounds_rule not in ("LastGoodStencil", "BestPointRadius"):
            raise ContractViolation("unknown bounds rule")
        if self.budget_split not in ("FirstUntilStall", "FixedFraction"):
            raise ContractViolation("unknown budget split")
        if self.budget_split == "FixedFraction" and not 0 < self.first_fraction < 1:
            raise ContractViolation("first_fraction must be in (0, 1)")


class _OffsetObjective:
    """Shift noise stream ids so stage 2 never reuses stage 1's draws."""

    def __init__(self, obj, offset: int):
        self._obj = obj
        self._offset = offset
        self.dimension = obj.dimension

    def evaluate(self, x, stream_id: int) -> float:
        return self._obj.evaluate(x, stream_id + self._offset)


def derive_bounds(report: StallReport, box: Box) -> Box:
    """Tightened box around the last good stencil, within the original."""
    center = np.asarray(report.last_good_center, dtype=float)
    h = report.last_good_scale * box.width
    lo = np.maximum(center - h, box.lower)
    hi = np.minimum(center + h, box.upper)
    for i in range(box.dimension):
        if hi[i] - lo[i] <= 0:
            half = report.failed_scale * box.width[i]
            lo[i] = max(center[i] - half, box.lower[i])
            hi[i] = min(center[i] + half, box.upper[i])
            warnings.warn(
                f"degenerate derived interval on coordinate {i}; widened to "
                f"2x failed scale", stacklevel=2)
    return Box(lo, hi)


def _radius_bounds(best_x: np.ndarray, box: Box, fraction: float) -> Box:
    h = fraction * box.width
    lo = np.maximum(best_x - h, box.lower)
    hi = np.minimum(best_x + h, box.upper)
    return Box(lo, hi)


def run_composition(obj, box: Box, x0: np.ndarray, budget: Budget,
                    plan: Optional[CompositionPlan] = None,
                    seed: int = 0) -> OptimizeOutcome:
    plan = plan or CompositionPlan()

    if plan.budget_split == "FixedFraction":
        first_budget = Budget(max(1, int(plan.first_fraction * budget.max_evals)))
    else:
        first_budget = Budget(budget.max_evals - budget.used)

    first = make_optimizer(plan.first, plan.first_options)
    result1 = first(obj, box, x0, first_budget, seed=seed)
    outcome1 = result1[0] if isinstance(result1, tuple) else result1
    report = result1[1] if isinstance(result1, tuple) else None
    budget.used += outcome1.evals_used

    if budget.exhausted or not outcome1.history:
        return outcome1

    if plan.bounds_rule == "LastGoodStencil" and report is not None:
        stage2_box = derive_bounds(report, box)
    else:
        best = best_of(outcome1.history)
        anchor = best.xvec if best is not None else np.asarray(x0, dtype=float)
        stage2_box = _radius_bounds(anchor, box, plan.best_point_radius)

    best1 = best_of(outcome1.history)
    x1 = clamp(best1.xvec if best1 is not None else np.asarray(x0, dtype=float),
               stage2_box)

    second = make_optimizer(plan.second, plan.second_options)
    stage2_budget = Budget(budget.remaining)
    stage2_obj = _OffsetObjective(obj, outcome1.evals_used)
    kwargs = {}
    if plan.second == "snobfit":
        # seed the second stage with first-stage points inside its box
        inside = [
            EvalRecord(x=r.x, f=r.f, index=10 ** 9 + r.index)
            for r in outcome1.history if stage2_box.contains(r.xvec)
        ]
        kwargs["initial_records"] = inside
    result2 = second(stage2_obj, stage2_box, x1, stage2_budget, seed=seed + 1,
                     **kwargs)
    outcome2 = result2[0] if isinstance(result2, tuple) else result2
    budget.used += outcome2.evals_used

    history = list(outcome1.history)
    offset = len(history)
    for rec in outcome2.history:
        history.append(EvalRecord(x=rec.x, f=rec.f, index=offset + rec.index,
                                  uncertainty=rec.uncertainty))
    best = best_of(history)
    return OptimizeOutcome(
        best_x=best.x if best else tuple(x0),
        best_f=best.f if best else float("nan"),
        history=tuple(history),
        termination=outcome2.termination,
    )

"""Implicit-filtering optimizer: stencil sampling with difference gradients
and a decreasing-scale schedule.

Each scale evaluates a coordinate stencil around the incumbent; the stencil
minimum drives recentering, otherwise an Armijo backtracking step along the
negative difference gradient is tried. A scale fails when neither improves,
and the next smaller scale takes over. The last improving stencil is
reported so a second-stage optimizer can derive tightened bounds from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import (
    Box,
    Budget,
    ContractViolation,
    EvalRecord,
    Evaluator,
    ObjectiveContract,
    OptimizeOutcome,
    Termination,
    clamp,
)

_DEFAULT_SCALES = tuple(2.0 ** -k for k in range(1, 10))


@dataclass(frozen=True)
class ImfilOptions:
    scales: Tuple[float, ...] = _DEFAULT_SCALES
    max_inner_iters: int = 6
    armijo_c: float = 1e-4
    max_backtracks: int = 5
    improvement_threshold: float = 0.0
    custom_directions: Optional[Tuple[Tuple[float, ...], ...]] = None

    def __post_init__(self):
        scales = tuple(float(s) for s in self.scales)
        object.__setattr__(self, "scales", scales)
        if not scales or any(s <= 0 or s > 1 for s in scales):
            raise ContractViolation("scales must lie in (0, 1]")
        if any(b <= a for a, b in zip(scales[1:], scales)):
            raise ContractViolation("scales must be strictly decreasing")
        if self.max_inner_iters < 1 or self.max_backtracks < 1:
            raise ContractViolation("iteration caps must be positive")
        if not 0 < self.armijo_c < 1:
            raise ContractViolation("armijo_c must be in (0, 1)")


@dataclass(frozen=True)
class Stencil:
    center: tuple
    scale: float
    points: Tuple[tuple, ...]
    # offsets[i] = (plus displacement, minus displacement) per coordinate,
    # None on a side where the clamped point collapsed onto the center
    coord_sides: Tuple[Tuple[Optional[int], Optional[int]], ...]


@dataclass(frozen=True)
class StallReport:
    last_good_center: tuple
    last_good_scale: float
    failed_scale: float


def build_stencil(center: np.ndarray, scale: float, box: Box,
                  custom_directions: Optional[Sequence] = None) -> Stencil:
    """Coordinate stencil center +- h*e_i (clamped), plus custom directions."""
    center = np.asarray(center, dtype=float)
    if not box.contains(center):
        raise ContractViolation("stencil center outside box")
    if scale <= 0:
        raise ContractViolation("scale must be positive")
    h = scale * box.width
    points: List[tuple] = []
    coord_sides: List[Tuple[Optional[int], Optional[int]]] = []
    for i in range(box.dimension):
        sides: List[Optional[int]] = [None, None]
        for side, sign in ((0, 1.0), (1, -1.0)):
            p = center.copy()
            p[i] += sign * h[i]
            p = clamp(p, box)
            if not np.array_equal(p, center):
                sides[side] = len(points)
                points.append(tuple(p))
        coord_sides.append((sides[0], sides[1]))
    if custom_directions:
        for d in custom_directions:
            d = np.asarray(d, dtype=float)
            for sign in (1.0, -1.0):
                p = clamp(center + sign * scale * box.width * d, box)
                if not np.array_equal(p, center):
                    points.append(tuple(p))
    return Stencil(
        center=tuple(center), scale=scale,
        points=tuple(points), coord_sides=tuple(coord_sides),
    )


def stencil_gradient(stencil: Stencil, center_f: float,
                     values: Sequence[float]) -> Optional[np.ndarray]:
    """Difference gradient from stencil evaluations.

    Central difference per coordinate when both sides are finite, one-sided
    when one side is missing or NaN, zero when neither is usable. Returns
    None when every stencil value is NaN (stencil failure).
    """
    if all(not math.isfinite(v) for v in values):
        return None
    center = np.asarray(stencil.center)
    grad = np.zeros(center.size)
    for i, (plus, minus) in enumerate(stencil.coord_sides):
        fp = values[plus] if plus is not None and math.isfinite(values[plus]) else None
        fm = values[minus] if minus is not None and math.isfinite(values[minus]) else None
        xp = stencil.points[plus][i] if plus is not None else None
        xm = stencil.points[minus][i] if minus is not None else None
        if fp is not None and fm is not None:
            grad[i] = (fp - fm) / (xp - xm)
        elif fp is not None and math.isfinite(center_f):
            grad[i] = (fp - center_f) / (xp - center[i])
        elif fm is not None and math.isfinite(center_f):
            grad[i] = (center_f - fm) / (center[i] - xm)
        else:
            grad[i] = 0.0
    return grad


def imfil_minimize(obj: ObjectiveContract, box: Box, x0: np.ndarray,
                   budget: Budget,
                   options: Optional[ImfilOptions] = None
                   ) -> Tuple[OptimizeOutcome, StallReport]:
    options = options or ImfilOptions()
    x0 = np.asarray(x0, dtype=float)
    if not box.contains(x0):
        raise ContractViolation("x0 outside box")
    ev = Evaluator(obj, box, budget)

    center_rec = ev.single(x0)
    if center_rec is None:
        return ev.outcome(Termination.BUDGET_EXHAUSTED, x0), StallReport(
            tuple(x0), options.scales[0], options.scales[0])

    center = x0.copy()
    center_f = center_rec.f
    last_good_center = tuple(center)
    last_good_scale = options.scales[0]
    termination = Termination.SCALE_EXHAUSTED
    failed_scale = options.scales[-1]
    stencil_failed = False

    for scale in options.scales:
        scale_improved = False
        for _ in range(options.max_inner_iters):
            stencil = build_stencil(center, scale, box, options.custom_directions)
            if not stencil.points:
                break
            records = ev.batch([np.asarray(p) for p in stencil.points])
            if len(records) < len(stencil.points):
                termination = Termination.BUDGET_EXHAUSTED
                break
            values = [r.f for r in records]
            improved = False

            finite = [(v, k) for k, v in enumerate(values) if math.isfinite(v)]
            if not finite:
                termination = Termination.STENCIL_FAILURE
                stencil_failed = True
                break
            best_v, best_k = min(finite)
            threshold = options.improvement_threshold
            if not math.isfinite(center_f) or best_v < center_f - threshold:
                center = np.asarray(stencil.points[best_k])
                center_f = best_v
                improved = True
            else:
                grad = stencil_gradient(stencil, center_f, values)
                if grad is not None and np.any(grad != 0) and math.isfinite(center_f):
                    gnorm2 = float(np.dot(grad, grad))
                    t = float(np.max(scale * box.width) / np.max(np.abs(grad)))
                    for _ in range(options.max_backtracks):
                        cand = clamp(center - t * grad, box)
                        if np.array_equal(cand, center):
                            break
                        rec = ev.single(cand)
                        if rec is None:
                            termination = Termination.BUDGET_EXHAUSTED
                            break
                        if (math.isfinite(rec.f)
                                and rec.f <= center_f - options.armijo_c * t * gnorm2
                                and rec.f < center_f - threshold):
                            center = cand
                            center_f = rec.f
                            improved = True
                            break
                        t *= 0.5
            if improved:
                scale_improved = True
                last_good_center = tuple(center)
                last_good_scale = scale
            if termination == Termination.BUDGET_EXHAUSTED or not improved:
                break
        if termination == Termination.BUDGET_EXHAUSTED or stencil_failed:
            failed_scale = scale
            break
        if not scale_improved:
            failed_scale = scale
            # fall through to the next smaller scale
        if ev.exhausted:
            termination = Termination.BUDGET_EXHAUSTED
            break

    report = StallReport(
        last_good_center=last_good_center,
        last_good_scale=last_good_scale,
        failed_scale=failed_scale,
    )
    return ev.outcome(termination, x0), report

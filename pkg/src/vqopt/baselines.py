"""Reference optimizers: finite-difference BFGS and Nelder-Mead simplex.

These are the noise-fragile baselines. BFGS treats every difference
gradient as exact, so small objective noise derails it; that failure mode
is intentional and the finite-difference step defaults are chosen to expose
it rather than hide it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .core import (
    Box,
    Budget,
    ContractViolation,
    Evaluator,
    ObjectiveContract,
    OptimizeOutcome,
    Termination,
    clamp,
)


@dataclass(frozen=True)
class BfgsOptions:
    fd_step_fraction: float = 1e-6  # of box width, per coordinate
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    grad_tol: float = 1e-8
    max_line_steps: int = 20

    def __post_init__(self):
        if not 0 < self.wolfe_c1 < self.wolfe_c2 < 1:
            raise ContractViolation("need 0 < c1 < c2 < 1")
        if self.fd_step_fraction <= 0:
            raise ContractViolation("fd_step_fraction must be positive")


@dataclass(frozen=True)
class SimplexOptions:
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    init_spread_fraction: float = 0.05  # of box width
    f_tol: float = 1e-8

    def __post_init__(self):
        if not (self.reflection > 0 and self.expansion > 1
                and 0 < self.contraction < 1 and 0 < self.shrink < 1):
            raise ContractViolation("invalid Nelder-Mead coefficients")


def _fd_gradient(ev: Evaluator, x: np.ndarray, fx: float,
                 steps: np.ndarray) -> Optional[np.ndarray]:
    """Forward-difference gradient; None when the budget runs out."""
    n = x.size
    points = []
    actual = np.empty(n)
    for i in range(n):
        p = x.copy()
        # step backwards off the upper bound so the probe stays in the box
        if p[i] + steps[i] <= ev.box.upper[i]:
            p[i] += steps[i]
        else:
            p[i] -= steps[i]
        actual[i] = p[i] - x[i]
        points.append(p)
    records = ev.batch(points)
    if len(records) < n:
        return None
    grad = np.array([(records[i].f - fx) / actual[i] for i in range(n)])
    return grad


def bfgs_minimize(obj: ObjectiveContract, box: Box, x0: np.ndarray,
                  budget: Budget,
                  options: Optional[BfgsOptions] = None) -> OptimizeOutcome:
    options = options or BfgsOptions()
    x = clamp(np.asarray(x0, dtype=float), box)
    n = x.size
    steps = options.fd_step_fraction * box.width
    ev = Evaluator(obj, box, budget)

    rec = ev.single(x)
    if rec is None:
        return ev.outcome(Termination.BUDGET_EXHAUSTED, x)
    fx = rec.f
    grad = _fd_gradient(ev, x, fx, steps)
    if grad is None:
        return ev.outcome(Termination.BUDGET_EXHAUSTED, x)
    hinv = np.eye(n)
    termination = Termination.BUDGET_EXHAUSTED

    while not ev.exhausted:
        if not np.all(np.isfinite(grad)) or np.linalg.norm(grad) <= options.grad_tol:
            termination = Termination.IMPROVEMENT_BELOW_THRESHOLD
            break
        direction = -hinv @ grad
        slope = float(grad @ direction)
        if slope >= 0:
            hinv = np.eye(n)
            direction = -grad
            slope = float(grad @ direction)

        # backtracking Armijo line search with a Wolfe curvature check on accept
        t = 1.0
        accepted = None
        for _ in range(options.max_line_steps):
            cand = clamp(x + t * direction, box)
            if np.array_equal(cand, x):
                break
            rec = ev.single(cand)
            if rec is None:
                accepted = None
                break
            if math.isfinite(rec.f) and rec.f <= fx + options.wolfe_c1 * t * slope:
                accepted = (cand, rec.f)
                break
            t *= 0.5
        if accepted is None:
            if ev.exhausted:
                termination = Termination.BUDGET_EXHAUSTED
            else:
                termination = Termination.IMPROVEMENT_BELOW_THRESHOLD
            break

        x_new, f_new = accepted
        grad_new = _fd_gradient(ev, x_new, f_new, steps)
        if grad_new is None:
            termination = Termination.BUDGET_EXHAUSTED
            break
        if np.all(np.isfinite(grad_new)):
            # Wolfe curvature condition gates the Hessian update only
            s = x_new - x
            y = grad_new - grad
            sy = float(s @ y)
            if sy > 1e-12 and float(grad_new @ direction) >= options.wolfe_c2 * slope:
                rho = 1.0 / sy
                i_mat = np.eye(n)
                hinv = ((i_mat - rho * np.outer(s, y)) @ hinv
                        @ (i_mat - rho * np.outer(y, s)) + rho * np.outer(s, s))
        x, fx, grad = x_new, f_new, grad_new

    return ev.outcome(termination, x0)


def nelder_mead_minimize(obj: ObjectiveContract, box: Box, x0: np.ndarray,
                         budget: Budget,
                         options: Optional[SimplexOptions] = None
                         ) -> OptimizeOutcome:
    options = options or SimplexOptions()
    x0 = clamp(np.asarray(x0, dtype=float), box)
    n = x0.size
    ev = Evaluator(obj, box, budget)

    # initial simplex: x0 plus one displaced vertex per coordinate
    verts = [x0]
    for i in range(n):
        v = x0.copy()
        step = options.init_spread_fraction * box.width[i]
        v[i] = v[i] + step if v[i] + step <= box.upper[i] else v[i] - step
        verts.append(clamp(v, box))
    records = ev.batch(verts)
    if len(records) < n + 1:
        return ev.outcome(Termination.BUDGET_EXHAUSTED, x0)
    fvals = [r.f if math.isfinite(r.f) else float("inf") for r in records]
    simplex = list(zip([np.asarray(v) for v in verts], fvals))

    def sort_simplex():
        simplex.sort(key=lambda vf: vf[1])

    termination = Termination.BUDGET_EXHAUSTED
    while not ev.exhausted:
        sort_simplex()
        spread = simplex[-1][1] - simplex[0][1]
        if math.isfinite(spread) and spread < options.f_tol:
            termination = Termination.IMPROVEMENT_BELOW_THRESHOLD
            break
        centroid = np.mean([v for v, _ in simplex[:-1]], axis=0)
        worst_x, worst_f = simplex[-1]

        def try_point(coef: float):
            cand = clamp(centroid + coef * (centroid - worst_x), box)
            rec = ev.single(cand)
            if rec is None:
                return None
            return cand, (rec.f if math.isfinite(rec.f) else float("inf"))

        res = try_point(options.reflection)
        if res is None:
            break
        xr, fr = res
        if fr < simplex[0][1]:
            res = try_point(options.reflection * options.expansion)
            if res is None:
                break
            xe, fe = res
            simplex[-1] = (xe, fe) if fe < fr else (xr, fr)
            continue
        if fr < simplex[-2][1]:
            simplex[-1] = (xr, fr)
            continue
        # contraction (outside if reflection improved on worst, else inside)
        coef = (options.reflection * options.contraction
                if fr < worst_f else -options.contraction)
        res = try_point(coef)
        if res is None:
            break
        xc, fc = res
        if fc < min(fr, worst_f):
            simplex[-1] = (xc, fc)
            continue
        # shrink toward the best vertex
        best_x = simplex[0][0]
        shrunk = [clamp(best_x + options.shrink * (v - best_x), box)
                  for v, _ in simplex[1:]]
        recs = ev.batch(shrunk)
        if len(recs) < len(shrunk):
            break
        simplex[1:] = [
            (np.asarray(p), r.f if math.isfinite(r.f) else float("inf"))
            for p, r in zip(shrunk, recs)
        ]

    return ev.outcome(termination, x0)

"""Bound-constrained quadratic-interpolation trust-region optimizer.

A quadratic model is fitted to an adaptively maintained interpolation set
(least-squares when the set determines a full quadratic, minimum-Frobenius-
norm Hessian change otherwise) and minimized over the trust ball intersected
with the box via a projected truncated conjugate-gradient. When the proposed
step is too short to inform the model, an alternative iteration replaces the
interpolation point farthest from the incumbent with one maximizing the
associated Lagrange polynomial, restoring geometry.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import List, Optional, Tuple

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

_NAN_SURROGATE = 1e8  # NaN objective values enter the model as this
_RHO_REDUCE = 0.1  # resolution reduction factor between levels


@dataclass(frozen=True)
class TrOptions:
    rho_begin_fraction: float = 0.1  # of min box width
    rho_end_fraction: float = 1e-4
    m_points: Optional[int] = None  # default 2n+1
    eta_accept: float = 0.1
    eta_grow: float = 0.7
    gamma_shrink: float = 0.5
    gamma_grow: float = 2.0
    alt_step_fraction: float = 0.5  # short-step threshold, fraction of rho

    def __post_init__(self):
        if self.rho_end_fraction >= self.rho_begin_fraction:
            raise ContractViolation("rho_end must be below rho_begin")
        if not 0 < self.gamma_shrink < 1 or self.gamma_grow <= 1:
            raise ContractViolation("invalid radius update factors")


@dataclass
class QuadModel:
    const: float
    grad: np.ndarray
    hess: np.ndarray

    def value(self, s: np.ndarray) -> float:
        return float(self.const + self.grad @ s + 0.5 * s @ self.hess @ s)


def full_quadratic_size(n: int) -> int:
    return (n + 1) * (n + 2) // 2


def init_interpolation(x0: np.ndarray, box: Box, rho_begin: float,
                       m_points: int) -> List[np.ndarray]:
    """Initial interpolation points: shifted x0 plus coordinate/diagonal probes."""
    n = box.dimension
    if not n + 2 <= m_points <= full_quadratic_size(n):
        raise ContractViolation("m_points must be in [n+2, (n+1)(n+2)/2]")
    x0 = clamp(np.asarray(x0, dtype=float), box)
    rho = np.full(n, rho_begin)
    for i in range(n):
        if box.width[i] < 2 * rho_begin:
            rho[i] = 0.5 * box.width[i]
            warnings.warn(
                f"initial trust radius reduced to {rho[i]:g} on coordinate {i}"
                " (box too narrow)", stacklevel=2)
    base = x0.copy()
    for i in range(n):
        base[i] = min(max(base[i], box.lower[i] + rho[i]), box.upper[i] - rho[i])

    points = [base.copy()]
    for i in range(n):
        p = base.copy()
        p[i] += rho[i]
        points.append(p)
    for i in range(n):
        p = base.copy()
        p[i] -= rho[i]
        points.append(p)
    for i in range(n):
        for j in range(i + 1, n):
            p = base.copy()
            p[i] += rho[i]
            p[j] += rho[j]
            points.append(p)
    return [clamp(p, box) for p in points[:m_points]]


def _design_row(s: np.ndarray) -> np.ndarray:
    """Row of the interpolation system for displacement s: [1, s, vech terms]."""
    n = s.size
    quad = []
    for i in range(n):
        quad.append(0.5 * s[i] * s[i])
        for j in range(i + 1, n):
            quad.append(s[i] * s[j])
    return np.concatenate(([1.0], s, np.asarray(quad)))


def _unpack(z: np.ndarray, n: int) -> QuadModel:
    const = float(z[0])
    grad = z[1:n + 1].copy()
    hess = np.zeros((n, n))
    k = n + 1
    for i in range(n):
        hess[i, i] = z[k]
        k += 1
        for j in range(i + 1, n):
            hess[i, j] = hess[j, i] = z[k]
            k += 1
    return QuadModel(const, grad, hess)


def _pack_hessian(hess: np.ndarray, n: int) -> np.ndarray:
    z = np.zeros(1 + n + n * (n + 1) // 2)
    k = n + 1
    for i in range(n):
        z[k] = hess[i, i]
        k += 1
        for j in range(i + 1, n):
            z[k] = hess[i, j]
            k += 1
    return z


def fit_model(displacements: List[np.ndarray], values: List[float],
              prev_hess: Optional[np.ndarray] = None) -> Optional[QuadModel]:
    """Interpolating quadratic; min-Frobenius-norm Hessian change when
    underdetermined. Returns None on a degenerate system."""
    n = displacements[0].size
    m = len(displacements)
    p = 1 + n + n * (n + 1) // 2
    a = np.vstack([_design_row(s) for s in displacements])
    f = np.asarray(values, dtype=float)
    f = np.where(np.isfinite(f), f, _NAN_SURROGATE)

    if m >= p:
        sol, _, rank, _ = np.linalg.lstsq(a, f, rcond=None)
        if rank < p:
            return None
        return _unpack(sol, n)

    # weights: 0 on (const, grad), 1 on diagonal, 2 on off-diagonal entries
    w = np.zeros(p)
    k = n + 1
    for i in range(n):
        w[k] = 1.0
        k += 1
        for j in range(i + 1, n):
            w[k] = 2.0
            k += 1
    z0 = (_pack_hessian(prev_hess, n) if prev_hess is not None
          else np.zeros(p))
    kkt = np.zeros((p + m, p + m))
    kkt[:p, :p] = np.diag(w)
    kkt[:p, p:] = a.T
    kkt[p:, :p] = a
    rhs = np.concatenate((w * z0, f))
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(sol)):
        return None
    model = _unpack(sol[:p], n)
    # reject fits that fail to interpolate (near-singular KKT)
    resid = a @ sol[:p] - f
    scale = max(1.0, float(np.max(np.abs(f))))
    if np.max(np.abs(resid)) > 1e-6 * scale:
        return None
    return model


def solve_tr_subproblem(model: QuadModel, center: np.ndarray, radius: float,
                        box: Box) -> np.ndarray:
    """Approximate minimizer of the model over {|s| <= radius} in box-center.

    Projected truncated CG: conjugate-gradient steps in the free coordinates,
    truncated at the trust-sphere boundary, with box faces activated as they
    are hit. The returned step satisfies both constraints exactly.
    """
    n = center.size
    lo = box.lower - center
    hi = box.upper - center
    g, b = model.grad, model.hess
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(b))):
        raise ContractViolation("model must be finite")

    s = np.zeros(n)
    active = np.zeros(n, dtype=bool)

    def ball_exit(s_cur, d):
        # largest alpha >= 0 with |s_cur + alpha d| = radius
        dd = float(d @ d)
        if dd == 0:
            return 0.0
        sd = float(s_cur @ d)
        ss = float(s_cur @ s_cur)
        disc = sd * sd + dd * (radius * radius - ss)
        return (-sd + math.sqrt(max(disc, 0.0))) / dd

    for _ in range(2 * n + 2):  # outer restarts on face activation
        grad = g + b @ s
        grad = np.where(active, 0.0, grad)
        if np.linalg.norm(grad) <= 1e-14:
            break
        d = -grad
        r = grad.copy()
        hit_boundary = False
        for _ in range(n + 1):  # CG iterations
            bd = b @ d
            bd = np.where(active, 0.0, bd)
            curv = float(d @ bd)
            alpha_ball = ball_exit(s, d)
            if curv <= 1e-14 * float(d @ d):
                alpha = alpha_ball
                hit_boundary = True
            else:
                alpha = float(r @ r) / curv
                if alpha >= alpha_ball:
                    alpha = alpha_ball
                    hit_boundary = True
            # box intersection
            face = -1
            for i in range(n):
                if active[i] or d[i] == 0:
                    continue
                lim = (hi[i] - s[i]) / d[i] if d[i] > 0 else (lo[i] - s[i]) / d[i]
                if lim < alpha:
                    alpha = lim
                    face = i
                    hit_boundary = False
            s = s + alpha * d
            if face >= 0:
                s[face] = hi[face] if d[face] > 0 else lo[face]
                active[face] = True
                break  # restart CG with the face fixed
            if hit_boundary:
                break
            r_new = r + alpha * bd
            r_new = np.where(active, 0.0, r_new)
            if np.linalg.norm(r_new) <= 1e-12 * max(1.0, np.linalg.norm(g)):
                face = -2
                break
            beta = float(r_new @ r_new) / float(r @ r)
            d = -r_new + beta * d
            r = r_new
        else:
            break
        if hit_boundary or face == -2:
            break

    # enforce constraints exactly
    s = np.minimum(hi, np.maximum(lo, s))
    norm = np.linalg.norm(s)
    if norm > radius:
        s *= radius / norm
    return s


def _lagrange_point(displacements: List[np.ndarray], j: int,
                    radius: float, center: np.ndarray, box: Box
                    ) -> Optional[np.ndarray]:
    """Point in the trust region maximizing |l_j|, the j-th Lagrange poly."""
    values = [0.0] * len(displacements)
    values[j] = 1.0
    lag = fit_model(displacements, values)
    if lag is None:
        return None
    s_min = solve_tr_subproblem(lag, center, radius, box)
    neg = QuadModel(-lag.const, -lag.grad, -lag.hess)
    s_max = solve_tr_subproblem(neg, center, radius, box)
    cand = s_max if abs(lag.value(s_max)) >= abs(lag.value(s_min)) else s_min
    if abs(lag.value(cand)) < 1e-12:
        return None
    return cand


def tr_minimize(obj: ObjectiveContract, box: Box, x0: np.ndarray,
                budget: Budget,
                options: Optional[TrOptions] = None) -> OptimizeOutcome:
    options = options or TrOptions()
    n = box.dimension
    min_width = float(np.min(box.width))
    rho_begin = options.rho_begin_fraction * min_width
    rho_end = options.rho_end_fraction * min_width
    m = options.m_points if options.m_points is not None else 2 * n + 1

    ev = Evaluator(obj, box, budget)
    points = init_interpolation(np.asarray(x0, dtype=float), box, rho_begin, m)
    records = ev.batch(points)
    if len(records) < len(points):
        return ev.outcome(Termination.BUDGET_EXHAUSTED, x0)

    ys = [r.xvec for r in records]
    fs = [r.f if math.isfinite(r.f) else _NAN_SURROGATE for r in records]
    # two-level sizing: trust radius (delta) never drops below the current
    # resolution (rho); rho only decreases when the model step is short,
    # i.e. the model says this resolution is exhausted.
    rho = rho_begin
    radius = rho_begin
    prev_hess: Optional[np.ndarray] = None
    termination = Termination.BUDGET_EXHAUSTED
    refit_failures = 0

    def shrink(r: float) -> float:
        return max(options.gamma_shrink * r, rho)

    while not ev.exhausted:
        inc = int(np.argmin(fs))
        x_inc = ys[inc]
        f_inc = fs[inc]
        disp = [y - x_inc for y in ys]
        model = fit_model(disp, fs, prev_hess)
        if model is None:
            refit_failures += 1
            if refit_failures > 1:
                termination = Termination.MODEL_DEGENERATE
                break
            # regenerate geometry around the incumbent
            fresh = init_interpolation(x_inc, box, max(radius, rho_end), m)
            keep = [p for p in fresh if not any(np.allclose(p, y) for y in ys)]
            recs = ev.batch(keep)
            if len(recs) < len(keep):
                termination = Termination.BUDGET_EXHAUSTED
                break
            order = np.argsort([np.linalg.norm(y - x_inc) for y in ys])
            for r in recs:
                far = int(order[-1])
                ys[far] = r.xvec
                fs[far] = r.f if math.isfinite(r.f) else _NAN_SURROGATE
                order = np.argsort([np.linalg.norm(y - x_inc) for y in ys])
            prev_hess = None
            continue
        refit_failures = 0
        prev_hess = model.hess

        step = solve_tr_subproblem(model, x_inc, radius, box)
        step_norm = float(np.linalg.norm(step))

        if step_norm < options.alt_step_fraction * rho:
            # model converged at this resolution; fix geometry or refine rho
            dists = [np.linalg.norm(y - x_inc) for y in ys]
            far = int(np.argmax(dists))
            if far == inc:
                far = int(np.argsort(dists)[-2])
            cand = None
            if dists[far] > 2.0 * radius:
                # alternative iteration: refresh the farthest point
                s_new = _lagrange_point(disp, far, radius, x_inc, box)
                if s_new is not None and np.linalg.norm(s_new) >= 1e-14:
                    p = clamp(x_inc + s_new, box)
                    if not any(np.allclose(p, y) for y in ys):
                        cand = p
            if cand is not None:
                rec = ev.single(cand)
                if rec is None:
                    termination = Termination.BUDGET_EXHAUSTED
                    break
                ys[far] = rec.xvec
                fs[far] = rec.f if math.isfinite(rec.f) else _NAN_SURROGATE
                continue
            # rho may only descend once the objective is shown to be
            # reproducible at the incumbent: a noisy objective fails the
            # check, its values get averaged into the model, and the loop
            # keeps sampling at this resolution until the budget runs out.
            rec = ev.single(x_inc)
            if rec is None:
                termination = Termination.BUDGET_EXHAUSTED
                break
            f_re = rec.f if math.isfinite(rec.f) else _NAN_SURROGATE
            if abs(f_re - f_inc) > 1e-8 * max(1.0, abs(f_inc)):
                fs[inc] = 0.5 * (f_inc + f_re)
                continue
            # geometry is already local: descend one resolution level
            rho *= _RHO_REDUCE
            if rho < rho_end:
                termination = Termination.IMPROVEMENT_BELOW_THRESHOLD
                break
            radius = max(options.gamma_shrink * radius, rho)
            continue

        predicted = f_inc - model.value(step)
        cand = clamp(x_inc + step, box)
        if any(np.allclose(cand, y, atol=1e-15) for y in ys):
            if radius <= rho:  # cannot shrink further at this resolution
                rec = ev.single(x_inc)
                if rec is None:
                    termination = Termination.BUDGET_EXHAUSTED
                    break
                f_re = rec.f if math.isfinite(rec.f) else _NAN_SURROGATE
                if abs(f_re - f_inc) > 1e-8 * max(1.0, abs(f_inc)):
                    fs[inc] = 0.5 * (f_inc + f_re)
                    continue
                rho *= _RHO_REDUCE
                if rho < rho_end:
                    termination = Termination.IMPROVEMENT_BELOW_THRESHOLD
                    break
            radius = shrink(radius)
            continue
        rec = ev.single(cand)
        if rec is None:
            termination = Termination.BUDGET_EXHAUSTED
            break
        f_new = rec.f if math.isfinite(rec.f) else _NAN_SURROGATE
        ratio = (f_inc - f_new) / predicted if predicted > 0 else -1.0

        # replace the farthest non-incumbent point with the new one
        dists = [np.linalg.norm(y - x_inc) for y in ys]
        far = int(np.argmax(dists))
        if far == inc:
            far = int(np.argsort(dists)[-2])
        ys[far] = rec.xvec
        fs[far] = f_new

        if ratio >= options.eta_grow:
            radius *= options.gamma_grow
        elif ratio < options.eta_accept:
            radius = shrink(radius)

    return ev.outcome(termination, x0)

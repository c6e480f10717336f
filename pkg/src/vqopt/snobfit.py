"""Branch-and-fit optimizer: recursive box partitioning plus safeguarded
local quadratic models, driven through a request/response batch protocol.

The step function is a pure state transition: feed it newly evaluated
records, get back the next batch of points to evaluate. Each batch mixes
local points (suggested by a quadratic model around the incumbent best,
clamped to the span of its nearest neighbors) with exploration points
placed in the largest, least explored subboxes of the partition. The
protocol is public so external evaluators (e.g. hardware queues) can drive
it directly.
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
    substream,
    uniform_design,
)


class ModelDegenerateError(RuntimeError):
    """Local model (or initial design) cannot be built from the data."""


@dataclass(frozen=True)
class SnobOptions:
    batch_size: Optional[int] = None  # default max(6, n+2)
    local_fraction: float = 0.5
    uncertainty_floor: float = 0.0
    stall_window: int = 5

    def __post_init__(self):
        if self.batch_size is not None and self.batch_size < 1:
            raise ContractViolation("batch_size must be >= 1")
        if not 0.0 <= self.local_fraction <= 1.0:
            raise ContractViolation("local_fraction must be in [0, 1]")
        if self.uncertainty_floor < 0:
            raise ContractViolation("uncertainty_floor must be nonnegative")

    def resolved_batch(self, n: int) -> int:
        return self.batch_size if self.batch_size is not None else max(6, n + 2)


@dataclass(eq=False)
class SubBox:
    lower: np.ndarray
    upper: np.ndarray
    records: List[EvalRecord] = field(default_factory=list)

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def contains(self, x: np.ndarray) -> bool:
        return bool(np.all(x >= self.lower - 1e-12) and np.all(x <= self.upper + 1e-12))


@dataclass
class SnobState:
    box: Box
    boxes: List[SubBox]
    best: Optional[EvalRecord]
    generation: int
    seed: int

    @property
    def records(self) -> List[EvalRecord]:
        out = []
        for sb in self.boxes:
            out.extend(sb.records)
        return out


def new_state(box: Box, seed: int = 0) -> SnobState:
    root = SubBox(box.lower.copy(), box.upper.copy())
    return SnobState(box=box, boxes=[root], best=None, generation=0, seed=seed)


def _owning_box(state: SnobState, x: np.ndarray) -> SubBox:
    best_sb, best_margin = None, -np.inf
    for sb in state.boxes:
        if sb.contains(x):
            margin = float(np.min(np.minimum(x - sb.lower, sb.upper - x)))
            if margin > best_margin:
                best_sb, best_margin = sb, margin
    if best_sb is None:
        raise ContractViolation("point outside the search box")
    return best_sb


def _split(state: SnobState, sb: SubBox) -> None:
    """Split until every subbox holds at most one distinct point.

    Iterative with an explicit work stack: seeding a state from a long
    evaluation history can require a split chain linear in its length.
    """
    width = state.box.width
    stack = [sb]
    while stack:
        sb = stack.pop()
        if len(sb.records) < 2:
            continue
        a = sb.records[0].xvec
        # pick the record farthest from the first, then the separating
        # coordinate
        dists = [float(np.max(np.abs(r.xvec - a) / width))
                 for r in sb.records[1:]]
        b = sb.records[1 + int(np.argmax(dists))].xvec
        diff = np.abs(a - b) / width
        if np.max(diff) <= 1e-15:
            continue  # coincident points share the box
        scaled_edge = (sb.upper - sb.lower) / width
        i = int(np.argmax(np.where(diff > 1e-15, scaled_edge, -np.inf)))
        mid = 0.5 * (a[i] + b[i])
        sides = [rec.xvec[i] <= mid for rec in sb.records]
        if all(sides) or not any(sides):
            continue  # midpoint rounded onto a point; share the box
        low = SubBox(sb.lower.copy(), sb.upper.copy())
        high = SubBox(sb.lower.copy(), sb.upper.copy())
        low.upper[i] = mid
        high.lower[i] = mid
        for rec, side in zip(sb.records, sides):
            (low if side else high).records.append(rec)
        state.boxes.remove(sb)
        state.boxes.extend([low, high])
        stack.extend([low, high])


def _insert(state: SnobState, rec: EvalRecord) -> None:
    sb = _owning_box(state, rec.xvec)
    sb.records.append(rec)
    _split(state, sb)
    if rec.finite and (state.best is None or rec.f < state.best.f):
        state.best = rec


def fit_local_quadratic(best: EvalRecord, neighbors: Sequence[EvalRecord],
                        search_box: Box):
    """Least-squares local model around the best point.

    Full quadratic, diagonal quadratic or gradient-only depending on how
    many finite neighbors are available. Returns (model_coeffs,
    suggested_point) or None when the fit is degenerate; the suggestion is
    clamped to the bounding box of the neighbors (safeguard) intersected
    with the search box.
    """
    n = best.xvec.size
    finite = [r for r in neighbors if r.finite]
    if len(finite) < n + 1:
        return None
    xs = np.array([r.xvec for r in finite])
    fs = np.array([r.f for r in finite])
    s = xs - best.xvec
    k = len(finite)

    full = (n + 1) * (n + 2) // 2
    if k >= full:
        cols = [np.ones(k)] + [s[:, i] for i in range(n)]
        for i in range(n):
            cols.append(0.5 * s[:, i] ** 2)
            for j in range(i + 1, n):
                cols.append(s[:, i] * s[:, j])
        kind = "full"
    elif k >= 2 * n + 1:
        cols = [np.ones(k)] + [s[:, i] for i in range(n)] \
            + [0.5 * s[:, i] ** 2 for i in range(n)]
        kind = "diag"
    else:
        cols = [np.ones(k)] + [s[:, i] for i in range(n)]
        kind = "linear"
    a = np.column_stack(cols)
    sol, _, rank, _ = np.linalg.lstsq(a, fs, rcond=None)
    if rank < a.shape[1]:
        return None

    grad = sol[1:n + 1]
    span_lo = np.minimum(xs.min(axis=0), best.xvec)
    span_hi = np.maximum(xs.max(axis=0), best.xvec)
    span_lo = np.maximum(span_lo, search_box.lower)
    span_hi = np.minimum(span_hi, search_box.upper)
    span_width = np.maximum(span_hi - span_lo, 0.0)

    if kind == "linear":
        step = np.where(grad > 0, span_lo - best.xvec,
                        np.where(grad < 0, span_hi - best.xvec, 0.0))
        suggested = best.xvec + step
    else:
        if kind == "diag":
            hess = np.diag(sol[n + 1:])
        else:
            hess = np.zeros((n, n))
            idx = n + 1
            for i in range(n):
                hess[i, i] = sol[idx]
                idx += 1
                for j in range(i + 1, n):
                    hess[i, j] = hess[j, i] = sol[idx]
                    idx += 1
        try:
            eigvals = np.linalg.eigvalsh(hess)
            if np.min(eigvals) > 1e-12:
                step = np.linalg.solve(hess, -grad)
            else:
                # saddle or flat model: take the steepest-descent corner
                scale = float(np.max(span_width)) or 1.0
                gnorm = float(np.linalg.norm(grad)) or 1.0
                step = -grad / gnorm * scale
        except np.linalg.LinAlgError:
            return None
        suggested = best.xvec + step
    suggested = np.minimum(span_hi, np.maximum(span_lo, suggested))
    return (sol, kind), suggested


def _dedupe(point: np.ndarray, state: SnobState, sb: SubBox) -> np.ndarray:
    """Nudge a proposal off any already evaluated point."""
    existing = np.array([r.xvec for r in state.records])
    p = point.copy()
    center = 0.5 * (sb.lower + sb.upper)
    for _ in range(8):
        if existing.size == 0 or np.min(np.max(np.abs(existing - p), axis=1)) > 1e-12:
            return p
        p = 0.5 * (p + center)
    return p


def snobfit_step(state: SnobState, new_evals: Sequence[EvalRecord],
                 options: Optional[SnobOptions] = None
                 ) -> Tuple[SnobState, List[np.ndarray]]:
    """Insert new evaluations and return the next batch of points."""
    options = options or SnobOptions()
    n = state.box.dimension
    batch = options.resolved_batch(n)

    if state.generation == 0:
        if not new_evals:
            raise ContractViolation("generation 0 requires the initial design")
        if all(not r.finite for r in new_evals):
            raise ModelDegenerateError("all initial evaluations are NaN")
    for rec in new_evals:
        _insert(state, rec)
    if new_evals:
        state.generation += 1

    n_local = math.ceil(options.local_fraction * batch)
    if options.local_fraction < 1.0 and n_local >= batch:
        n_local = batch - 1  # keep at least one exploration point
    n_explore = batch - n_local
    request: List[np.ndarray] = []
    rng = substream(state.seed, 500_000 + state.generation)

    if state.best is not None and n_local > 0:
        records = [r for r in state.records if r.finite]
        others = [r for r in records if r.index != state.best.index]
        others.sort(key=lambda r: float(np.linalg.norm(r.xvec - state.best.xvec)))
        k_want = min(len(others), max(2 * n + 4, n + 1))
        fit = fit_local_quadratic(state.best, others[:k_want], state.box)
        owner = _owning_box(state, state.best.xvec)
        if fit is not None:
            _, suggested = fit
            request.append(_dedupe(clamp(suggested, state.box), state, owner))
        # remaining local points: shrinking perturbations of the best
        while len(request) < n_local:
            spread = 0.25 ** len(request) * (owner.upper - owner.lower)
            p = state.best.xvec + rng.uniform(-1, 1, size=n) * spread
            request.append(_dedupe(clamp(p, state.box), state, owner))
    elif n_local > 0:
        # no finite best yet: fall back to exploration for the local share
        n_explore += n_local

    # exploration: centers of the largest gaps in the biggest subboxes
    order = sorted(state.boxes, key=lambda sb: -sb.volume)
    i = 0
    while n_explore > 0 and order:
        sb = order[i % len(order)]
        i += 1
        if sb.records:
            resident = sb.records[0].xvec
            gap_low = resident - sb.lower
            gap_high = sb.upper - resident
            p = np.where(gap_low > gap_high,
                         0.5 * (sb.lower + resident),
                         0.5 * (resident + sb.upper))
        else:
            p = 0.5 * (sb.lower + sb.upper)
        request.append(_dedupe(clamp(p, state.box), state, sb))
        n_explore -= 1

    return state, request


def snobfit_minimize(obj: ObjectiveContract, box: Box,
                     x0: Optional[np.ndarray], budget: Budget,
                     options: Optional[SnobOptions] = None,
                     seed: int = 0,
                     initial_records: Optional[Sequence[EvalRecord]] = None
                     ) -> OptimizeOutcome:
    """Drive the request/response protocol until the budget runs out or the
    best value stalls below the uncertainty floor over the stall window."""
    options = options or SnobOptions()
    n = box.dimension
    batch = options.resolved_batch(n)
    ev = Evaluator(obj, box, budget)
    state = new_state(box, seed=seed)

    design = uniform_design(box, batch, seed)
    if x0 is not None:
        design[0] = clamp(np.asarray(x0, dtype=float), box)
    if initial_records:
        for rec in initial_records:
            _insert(state, rec)
    records = ev.batch(design)
    if not records:
        return ev.outcome(Termination.BUDGET_EXHAUSTED, x0)

    gen_best: List[float] = []
    termination = Termination.BUDGET_EXHAUSTED
    while True:
        try:
            state, request = snobfit_step(state, records, options)
        except ModelDegenerateError:
            termination = Termination.MODEL_DEGENERATE
            break
        gen_best.append(state.best.f if state.best is not None else float("inf"))
        window = options.stall_window
        if len(gen_best) > window:
            improvement = gen_best[-window - 1] - gen_best[-1]
            if improvement < options.uncertainty_floor:
                termination = Termination.IMPROVEMENT_BELOW_THRESHOLD
                break
        if ev.exhausted:
            break
        records = ev.batch(request)
        if not records:
            break

    return ev.outcome(termination, x0 if x0 is not None else box.lower)

"""Mesh-adaptive direct search: alternating search and poll steps on an
adaptive mesh.

The poll step generates a positive spanning set from a fresh random
orthonormal basis and its negation, scaled to the frame and snapped onto
the mesh anchored at the incumbent. On improvement the frame doubles
(capped), on failure it halves with the mesh size following
delta = min(Delta, Delta^2).

The search step first retries the doubled last successful step
(speculative search), then falls back to a mesh-snapped uniform design
inside the frame. Candidates are evaluated opportunistically, best-aligned
with the last successful direction first.
"""

from __future__ import annotations

import math
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
    substream,
    uniform_design,
)


@dataclass(frozen=True)
class MadsOptions:
    poll_directions: str = "OrthogonalBasis2n"  # or "RandomUnit2n"
    initial_frame_fraction: float = 0.25  # of max box width
    max_consecutive_failures: int = 12
    search_enabled: bool = True
    mesh_floor_fraction: float = 1e-6  # of max box width
    direction_scaling: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.poll_directions not in ("OrthogonalBasis2n", "RandomUnit2n"):
            raise ContractViolation("unknown poll direction scheme")
        if self.max_consecutive_failures < 1:
            raise ContractViolation("max_consecutive_failures must be positive")


@dataclass
class MadsState:
    incumbent_x: np.ndarray
    incumbent_f: float
    mesh_size: float  # delta
    frame_size: float  # Delta
    consecutive_failures: int = 0


def _snap_to_mesh(points: List[np.ndarray], anchor: np.ndarray, delta: float,
                  box: Box) -> List[np.ndarray]:
    """Round points to the delta-mesh at the anchor, staying inside the box."""
    lo_steps = np.ceil((box.lower - anchor) / delta - 1e-12)
    hi_steps = np.floor((box.upper - anchor) / delta + 1e-12)
    snapped = []
    for p in points:
        k = np.rint((p - anchor) / delta)
        k = np.minimum(hi_steps, np.maximum(lo_steps, k))
        snapped.append(anchor + k * delta)
    return snapped


def _random_directions(n: int, scheme: str, rng: np.random.Generator,
                       scaling: Optional[np.ndarray]) -> np.ndarray:
    if scheme == "OrthogonalBasis2n":
        m = rng.standard_normal((n, n))
        q, _ = np.linalg.qr(m)
        basis = q.T
    else:
        basis = rng.standard_normal((n, n))
        basis /= np.linalg.norm(basis, axis=1, keepdims=True)
    if scaling is not None:
        basis = basis * scaling
    return np.vstack([basis, -basis])


def poll_points(state: MadsState, box: Box, options: MadsOptions,
                seed: int, iteration: int) -> List[np.ndarray]:
    """Positive spanning poll set, mesh-snapped and deduplicated."""
    n = box.dimension
    rng = substream(seed, 1_000_000 + iteration)
    scaling = (np.asarray(options.direction_scaling, dtype=float)
               if options.direction_scaling else None)
    dirs = _random_directions(n, options.poll_directions, rng, scaling)
    raw = [state.incumbent_x + state.frame_size * d for d in dirs]
    snapped = _snap_to_mesh(raw, state.incumbent_x, state.mesh_size, box)
    out, seen = [], set()
    for p in snapped:
        key = tuple(np.rint((p - state.incumbent_x) / state.mesh_size).astype(int))
        if key == (0,) * n or key in seen:
            continue
        seen.add(key)
        out.append(p)
    return out


def mads_minimize(obj: ObjectiveContract, box: Box, x0: np.ndarray,
                  budget: Budget, options: Optional[MadsOptions] = None,
                  seed: int = 0) -> OptimizeOutcome:
    options = options or MadsOptions()
    x0 = np.asarray(x0, dtype=float)
    if not box.contains(x0):
        raise ContractViolation("x0 outside box")
    ev = Evaluator(obj, box, budget)

    rec = ev.single(x0)
    if rec is None:
        return ev.outcome(Termination.BUDGET_EXHAUSTED, x0)

    max_width = float(np.max(box.width))
    frame0 = options.initial_frame_fraction * max_width
    mesh_floor = options.mesh_floor_fraction * max_width
    state = MadsState(
        incumbent_x=x0.copy(),
        incumbent_f=rec.f if math.isfinite(rec.f) else float("inf"),
        mesh_size=min(frame0, frame0 ** 2),
        frame_size=frame0,
    )

    termination = Termination.BUDGET_EXHAUSTED
    iteration = 0
    last_step: Optional[np.ndarray] = None

    def accept(rec) -> bool:
        nonlocal last_step
        if rec is not None and math.isfinite(rec.f) and rec.f < state.incumbent_f:
            last_step = rec.xvec - state.incumbent_x
            state.incumbent_x = rec.xvec
            state.incumbent_f = rec.f
            return True
        return False

    def sweep(points) -> bool:
        # opportunistic: most promising first, stop at the first improvement
        if last_step is not None:
            norm = float(np.linalg.norm(last_step)) or 1.0
            points = sorted(
                points,
                key=lambda p: -float((p - state.incumbent_x) @ last_step) / norm)
        for p in points:
            rec = ev.single(p)
            if rec is None:
                return False
            if accept(rec):
                return True
        return False

    while not ev.exhausted:
        iteration += 1
        improved = False

        if options.search_enabled and ev.remaining > 0:
            # speculative step: retry the doubled last successful step
            if last_step is not None:
                p = _snap_to_mesh([state.incumbent_x + 2.0 * last_step],
                                  state.incumbent_x, state.mesh_size, box)[0]
                if not np.array_equal(p, state.incumbent_x):
                    improved = accept(ev.single(p))
            if not improved and not ev.exhausted:
                frame_box = Box(
                    np.maximum(state.incumbent_x - state.frame_size, box.lower),
                    np.minimum(state.incumbent_x + state.frame_size, box.upper))
                sample = uniform_design(frame_box, box.dimension,
                                        seed * 7919 + iteration)
                sample = _snap_to_mesh(sample, state.incumbent_x,
                                       state.mesh_size, box)
                sample = [p for p in sample
                          if not np.array_equal(p, state.incumbent_x)]
                improved = sweep(sample)

        if not improved and not ev.exhausted:
            improved = sweep(poll_points(state, box, options, seed, iteration))

        if improved:
            state.consecutive_failures = 0
            state.frame_size = min(2.0 * state.frame_size, frame0)
        else:
            state.consecutive_failures += 1
            state.frame_size *= 0.5
        state.mesh_size = min(state.frame_size, state.frame_size ** 2)

        if state.mesh_size < mesh_floor:
            termination = Termination.IMPROVEMENT_BELOW_THRESHOLD
            break
        if state.consecutive_failures >= options.max_consecutive_failures:
            termination = Termination.IMPROVEMENT_BELOW_THRESHOLD
            break

    return ev.outcome(termination, x0)

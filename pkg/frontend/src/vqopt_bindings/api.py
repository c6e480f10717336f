"""Callback-objective front end over the native optimizer registry.

Callbacks are invoked serially, one point at a time, because user callables
cannot be assumed reentrant. A callable that can score a whole batch of
points in one call may opt in via ``BoundObjective(batched=True)``; it then
receives a ``(k, n)`` array and must return ``k`` values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from vqopt.core import Box, Budget
from vqopt.harness import problem_ids
from vqopt.registry import make_optimizer, optimizer_ids


class CallbackError(RuntimeError):
    """A user callback raised; the original exception is chained as cause."""


@dataclass(frozen=True)
class BoundObjective:
    """A user objective: callable plus the dimension it expects.

    The callable receives a 1-D float array (or, with ``batched=True``, a
    2-D array of points) and returns a real number per point; NaN marks a
    failed evaluation and is handled by the optimizers, not treated as an
    error.
    """

    func: Callable
    dimension: int
    batched: bool = False

    def __post_init__(self):
        if not callable(self.func):
            raise ValueError("objective func must be callable")
        if int(self.dimension) < 1:
            raise ValueError("objective dimension must be >= 1")
        object.__setattr__(self, "dimension", int(self.dimension))


class _CallbackObjective:
    """Adapter giving a BoundObjective the native evaluate() interface."""

    def __init__(self, bound: BoundObjective):
        self._bound = bound
        self.dimension = bound.dimension

    def evaluate(self, x: np.ndarray, stream_id: int) -> float:
        point = np.asarray(x, dtype=float)
        try:
            if self._bound.batched:
                value = self._bound.func(point[np.newaxis, :])[0]
            else:
                value = self._bound.func(point)
            return float(value)
        except Exception as exc:
            raise CallbackError(
                f"objective callback failed at x={point.tolist()}: {exc}"
            ) from exc


def available_methods() -> list:
    """Optimizer ids accepted by minimize()."""
    return optimizer_ids()


def available_problems() -> list:
    """Benchmark problem ids registered in the native harness."""
    return problem_ids()


def _as_box(bounds: Sequence, dimension: int) -> Box:
    arr = np.asarray(bounds, dtype=float)
    if arr.shape != (dimension, 2):
        raise ValueError(
            f"bounds must be {dimension} (lower, upper) pairs, got shape "
            f"{arr.shape}")
    return Box(arr[:, 0].copy(), arr[:, 1].copy())


def minimize(objective: BoundObjective, x0: Sequence, bounds: Sequence,
             budget: int, method: str = "imfil",
             options: Optional[Mapping] = None, seed: int = 0) -> dict:
    """Minimize a callback objective inside box bounds.

    Returns a mapping with ``best_x``, ``best_f``, ``evals_used``,
    ``termination`` and the full evaluation ``history`` as
    ``(index, x, f)`` tuples.
    """
    if method not in optimizer_ids():
        raise ValueError(
            f"unknown method {method!r}; valid methods: "
            f"{', '.join(available_methods())}")
    box = _as_box(bounds, objective.dimension)
    start = np.asarray(x0, dtype=float)
    obj = _CallbackObjective(objective)
    opts = dict(options) if options else None
    result = make_optimizer(method, opts)(
        obj, box, start, Budget(int(budget)), seed=int(seed))
    outcome = result[0] if isinstance(result, tuple) else result
    return {
        "best_x": tuple(outcome.best_x),
        "best_f": outcome.best_f,
        "evals_used": outcome.evals_used,
        "termination": outcome.termination.value,
        "history": [(rec.index, rec.x, rec.f) for rec in outcome.history],
    }

"""Shared domain types, bounded-domain utilities and the evaluation engine.

Every optimizer in this package consumes objectives through the same
contract: a bounded box domain, a hard evaluation budget, and a
deterministic per-evaluation noise stream so that runs are bit-reproducible
regardless of evaluation order.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

_MASK64 = (1 << 64) - 1


class ContractViolation(ValueError):
    """Raised when a caller breaks a documented precondition."""


class Termination(enum.Enum):
    BUDGET_EXHAUSTED = "BudgetExhausted"
    SCALE_EXHAUSTED = "ScaleExhausted"
    IMPROVEMENT_BELOW_THRESHOLD = "ImprovementBelowThreshold"
    STENCIL_FAILURE = "StencilFailure"
    MODEL_DEGENERATE = "ModelDegenerate"
    USER_STOP = "UserStop"


@dataclass(frozen=True)
class Box:
    """Axis-aligned search domain with per-parameter lower/upper bounds."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if lo.ndim != 1 or hi.shape != lo.shape or lo.size < 1:
            raise ContractViolation("bounds must be 1-d vectors of equal, nonzero length")
        if not np.all(lo < hi):
            raise ContractViolation("lower[i] < upper[i] required for all i")

    @property
    def dimension(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def volume(self) -> float:
        return float(np.prod(self.width))

    def contains(self, x: np.ndarray, tol: float = 1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(
            x.shape == self.lower.shape
            and np.all(x >= self.lower - tol)
            and np.all(x <= self.upper + tol)
        )

    def intersect(self, other: "Box") -> "Box":
        lo = np.maximum(self.lower, other.lower)
        hi = np.minimum(self.upper, other.upper)
        if not np.all(lo < hi):
            raise ContractViolation("empty box intersection")
        return Box(lo, hi)


@dataclass(frozen=True)
class EvalRecord:
    """One objective evaluation: point, value, optional uncertainty, order index.

    ``f`` may be NaN to mark an inaccessible region; NaN records are kept in
    the history but never win best-tracking.
    """

    x: tuple
    f: float
    index: int
    uncertainty: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        if self.index < 0:
            raise ContractViolation("index must be nonnegative")
        if self.uncertainty is not None and self.uncertainty < 0:
            raise ContractViolation("uncertainty must be nonnegative")

    @property
    def xvec(self) -> np.ndarray:
        return np.asarray(self.x, dtype=float)

    @property
    def finite(self) -> bool:
        return math.isfinite(self.f)


@dataclass
class Budget:
    """Evaluation budget; ``used`` never exceeds ``max_evals``."""

    max_evals: int
    used: int = 0

    def __post_init__(self):
        if self.max_evals < 1:
            raise ContractViolation("max_evals must be positive")
        if not 0 <= self.used <= self.max_evals:
            raise ContractViolation("used must lie in [0, max_evals]")

    @property
    def remaining(self) -> int:
        return self.max_evals - self.used

    @property
    def exhausted(self) -> bool:
        return self.used >= self.max_evals


@dataclass(frozen=True)
class OptimizeOutcome:
    best_x: tuple
    best_f: float
    history: tuple
    termination: Termination

    @property
    def evals_used(self) -> int:
        return len(self.history)


class ObjectiveContract(Protocol):
    """Objective seen by optimizers: pure in (x, stream_id) for a fixed seed."""

    dimension: int

    def evaluate(self, x: np.ndarray, stream_id: int) -> float: ...


@dataclass
class FunctionObjective:
    """Wrap a plain callable (optionally noise-stream aware) as an objective."""

    dimension: int
    fn: Callable
    uses_stream: bool = False

    def evaluate(self, x: np.ndarray, stream_id: int) -> float:
        if self.uses_stream:
            return float(self.fn(np.asarray(x, dtype=float), stream_id))
        return float(self.fn(np.asarray(x, dtype=float)))


def substream(seed: int, stream_id: int) -> np.random.Generator:
    """Independent counter-based RNG substream for (run seed, stream id).

    Philox keyed on both integers gives schedule-independent draws: the same
    (seed, stream_id) yields the same sequence no matter when or on which
    worker it is consumed.
    """
    if stream_id < 0:
        raise ContractViolation("stream_id must be nonnegative")
    key = np.array([seed & _MASK64, stream_id & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def clamp(x: np.ndarray, box: Box) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != box.lower.shape:
        raise ContractViolation("dimension mismatch in clamp")
    return np.minimum(box.upper, np.maximum(box.lower, x))


def uniform_design(box: Box, n: int, seed: int) -> list:
    """Latin-hypercube sample of n points inside the box (deterministic per seed)."""
    if n < 1:
        raise ContractViolation("n must be >= 1")
    rng = substream(seed, 0)
    dim = box.dimension
    points = np.empty((n, dim))
    for j in range(dim):
        strata = rng.permutation(n)
        offsets = rng.random(n)
        u = (strata + offsets) / n
        points[:, j] = box.lower[j] + u * (box.upper[j] - box.lower[j])
    return [points[i].copy() for i in range(n)]


def evaluate_batch(
    obj: ObjectiveContract,
    points: Sequence[np.ndarray],
    budget: Budget,
    base_index: int,
) -> list:
    """Evaluate up to the remaining budget; stream_id of point k is base_index+k.

    Tying the noise stream to the evaluation index makes the records
    identical whether the batch runs serially or concurrently.
    """
    if len(points) == 0:
        raise ContractViolation("points must be nonempty")
    take = min(len(points), budget.remaining)
    records = []
    for k in range(take):
        idx = base_index + k
        f = float(obj.evaluate(np.asarray(points[k], dtype=float), idx))
        records.append(EvalRecord(x=tuple(points[k]), f=f, index=idx))
    budget.used += take
    return records


def best_of(history: Sequence[EvalRecord]):
    """Earliest record attaining the minimum finite f; None if no finite value."""
    best = None
    for rec in history:
        if rec.finite and (best is None or rec.f < best.f):
            best = rec
    return best


class Evaluator:
    """Per-run evaluation engine: budget accounting plus ordered history.

    All optimizers funnel their evaluations through one of these so budget
    safety and best-tracking are enforced in a single place.
    """

    def __init__(self, obj: ObjectiveContract, box: Box, budget: Budget):
        self.obj = obj
        self.box = box
        self.budget = budget
        self.history: list = []

    @property
    def exhausted(self) -> bool:
        return self.budget.exhausted

    @property
    def remaining(self) -> int:
        return self.budget.remaining

    def batch(self, points: Sequence[np.ndarray]) -> list:
        if len(points) == 0:
            return []
        for p in points:
            if not self.box.contains(p):
                raise ContractViolation("evaluation point outside box")
        if self.budget.exhausted:
            return []
        records = evaluate_batch(self.obj, points, self.budget, len(self.history))
        self.history.extend(records)
        return records

    def single(self, point: np.ndarray) -> Optional[EvalRecord]:
        recs = self.batch([point])
        return recs[0] if recs else None

    def outcome(self, termination: Termination, fallback_x=None) -> OptimizeOutcome:
        best = best_of(self.history)
        if best is None:
            x = tuple(fallback_x) if fallback_x is not None else ()
            return OptimizeOutcome(
                best_x=x, best_f=float("nan"),
                history=tuple(self.history), termination=termination,
            )
        return OptimizeOutcome(
            best_x=best.x, best_f=best.f,
            history=tuple(self.history), termination=termination,
        )

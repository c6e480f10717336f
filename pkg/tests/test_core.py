import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vqopt.core import (
    Box,
    Budget,
    ContractViolation,
    EvalRecord,
    Evaluator,
    FunctionObjective,
    Termination,
    best_of,
    clamp,
    evaluate_batch,
    substream,
    uniform_design,
)


def sphere_obj(n):
    return FunctionObjective(n, lambda x: float(np.dot(x, x)))


class TestBox:
    def test_basic_properties(self):
        box = Box(np.array([-1.0, 0.0]), np.array([1.0, 4.0]))
        assert box.dimension == 2
        assert np.allclose(box.width, [2.0, 4.0])
        assert box.volume == pytest.approx(8.0)

    def test_invalid_bounds_rejected(self):
        with pytest.raises(ContractViolation):
            Box(np.array([0.0, 0.0]), np.array([1.0, 0.0]))
        with pytest.raises(ContractViolation):
            Box(np.array([0.0]), np.array([1.0, 2.0]))
        with pytest.raises(ContractViolation):
            Box(np.array([]), np.array([]))

    def test_contains_with_tolerance(self):
        box = Box(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
        assert box.contains(np.array([0.5, -0.5]))
        assert box.contains(np.array([1.0 + 1e-13, 0.0]))
        assert not box.contains(np.array([1.1, 0.0]))
        assert not box.contains(np.array([0.0]))

    def test_intersect(self):
        a = Box(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
        b = Box(np.array([0.0, -2.0]), np.array([2.0, 0.5]))
        c = a.intersect(b)
        assert np.allclose(c.lower, [0.0, -1.0])
        assert np.allclose(c.upper, [1.0, 0.5])

    def test_empty_intersection_rejected(self):
        a = Box(np.array([0.0]), np.array([1.0]))
        b = Box(np.array([2.0]), np.array([3.0]))
        with pytest.raises(ContractViolation):
            a.intersect(b)


class TestClamp:
    def test_saturation(self):
        box = Box(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
        assert np.allclose(clamp(np.array([2.0, -2.0]), box), [1.0, -1.0])

    def test_identity_inside(self):
        box = Box(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
        assert np.allclose(clamp(np.array([0.1, 0.1]), box), [0.1, 0.1])
        box2 = Box(np.array([0.0, -1.0]), np.array([1.0, 0.0]))
        assert np.allclose(clamp(np.array([0.3, -0.3]), box2), [0.3, -0.3])

    def test_dimension_mismatch(self):
        box = Box(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
        with pytest.raises(ContractViolation):
            clamp(np.array([0.0]), box)


class TestSubstream:
    def test_deterministic_per_key(self):
        a = substream(42, 7).standard_normal(10)
        b = substream(42, 7).standard_normal(10)
        assert np.array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = substream(42, 7).standard_normal(10)
        b = substream(42, 8).standard_normal(10)
        c = substream(43, 7).standard_normal(10)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_negative_stream_rejected(self):
        with pytest.raises(ContractViolation):
            substream(0, -1)


class TestUniformDesign:
    def test_quartile_stratification(self):
        box = Box(np.array([0.0]), np.array([1.0]))
        pts = uniform_design(box, 4, seed=7)
        assert len(pts) == 4
        bins = sorted(int(p[0] * 4) for p in pts)
        assert bins == [0, 1, 2, 3]

    def test_single_point_inside(self):
        box = Box(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
        (p,) = uniform_design(box, 1, seed=0)
        assert box.contains(p)

    def test_determinism(self):
        box = Box(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
        a = uniform_design(box, 5, seed=3)
        b = uniform_design(box, 5, seed=3)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_zero_points_rejected(self):
        box = Box(np.array([0.0]), np.array([1.0]))
        with pytest.raises(ContractViolation):
            uniform_design(box, 0, seed=0)

    @given(n=st.integers(1, 20), seed=st.integers(0, 1000))
    @settings(max_examples=25, deadline=None)
    def test_stratified_every_coordinate(self, n, seed):
        box = Box(np.array([-2.0, 3.0]), np.array([2.0, 5.0]))
        pts = np.array(uniform_design(box, n, seed))
        for j in range(2):
            u = (pts[:, j] - box.lower[j]) / box.width[j]
            bins = sorted(np.minimum((u * n).astype(int), n - 1))
            assert bins == list(range(n))


class TestEvaluateBatch:
    def test_truncates_to_remaining_budget(self):
        obj = sphere_obj(1)
        budget = Budget(3)
        pts = [np.array([float(i)]) for i in range(5)]
        recs = evaluate_batch(obj, pts, budget, 0)
        assert len(recs) == 3
        assert budget.used == 3

    def test_stream_ids_follow_base_index(self):
        seen = []

        class Spy:
            dimension = 1

            def evaluate(self, x, stream_id):
                seen.append(stream_id)
                return 0.0

        evaluate_batch(Spy(), [np.zeros(1)] * 3, Budget(10), base_index=4)
        assert seen == [4, 5, 6]

    def test_nan_record_kept(self):
        obj = FunctionObjective(1, lambda x: float("nan"))
        recs = evaluate_batch(obj, [np.zeros(1)], Budget(1), 0)
        assert len(recs) == 1
        assert math.isnan(recs[0].f)
        assert best_of(recs) is None

    def test_empty_points_rejected(self):
        with pytest.raises(ContractViolation):
            evaluate_batch(sphere_obj(1), [], Budget(1), 0)


class TestEvalRecord:
    def test_validation(self):
        with pytest.raises(ContractViolation):
            EvalRecord(x=(0.0,), f=0.0, index=-1)
        with pytest.raises(ContractViolation):
            EvalRecord(x=(0.0,), f=0.0, index=0, uncertainty=-0.1)

    def test_finite_flag(self):
        assert EvalRecord(x=(0.0,), f=1.0, index=0).finite
        assert not EvalRecord(x=(0.0,), f=float("nan"), index=0).finite


class TestBudget:
    def test_validation(self):
        with pytest.raises(ContractViolation):
            Budget(0)
        with pytest.raises(ContractViolation):
            Budget(2, used=3)

    def test_accounting(self):
        b = Budget(2)
        assert b.remaining == 2 and not b.exhausted
        b.used += 2
        assert b.exhausted


class TestBestOf:
    def test_earliest_tie_wins(self):
        recs = [
            EvalRecord(x=(0.0,), f=1.0, index=0),
            EvalRecord(x=(1.0,), f=1.0, index=1),
            EvalRecord(x=(2.0,), f=float("nan"), index=2),
        ]
        assert best_of(recs).index == 0

    def test_nan_never_wins(self):
        recs = [
            EvalRecord(x=(0.0,), f=float("nan"), index=0),
            EvalRecord(x=(1.0,), f=5.0, index=1),
        ]
        assert best_of(recs).index == 1


class TestEvaluator:
    def test_rejects_points_outside_box(self):
        box = Box(np.array([-1.0]), np.array([1.0]))
        ev = Evaluator(sphere_obj(1), box, Budget(5))
        with pytest.raises(ContractViolation):
            ev.batch([np.array([2.0])])

    def test_budget_safety_and_history_order(self):
        box = Box(np.array([-1.0]), np.array([1.0]))
        ev = Evaluator(sphere_obj(1), box, Budget(3))
        ev.batch([np.array([0.5]), np.array([-0.5])])
        ev.batch([np.array([0.1]), np.array([0.2])])
        assert ev.budget.used == 3
        assert [r.index for r in ev.history] == [0, 1, 2]
        assert ev.single(np.zeros(1)) is None

    def test_outcome_matches_best_of(self):
        box = Box(np.array([-1.0]), np.array([1.0]))
        ev = Evaluator(sphere_obj(1), box, Budget(4))
        ev.batch([np.array([0.5]), np.array([-0.2]), np.array([0.9])])
        out = ev.outcome(Termination.BUDGET_EXHAUSTED)
        assert out.best_f == pytest.approx(0.04)
        assert out.best_x == (-0.2,)
        assert out.evals_used == 3

    def test_outcome_fallback_when_no_finite(self):
        box = Box(np.array([-1.0]), np.array([1.0]))
        ev = Evaluator(FunctionObjective(1, lambda x: float("nan")), box, Budget(2))
        ev.batch([np.zeros(1)])
        out = ev.outcome(Termination.STENCIL_FAILURE, fallback_x=np.array([0.3]))
        assert math.isnan(out.best_f)
        assert out.best_x == (0.3,)


@given(
    values=st.lists(
        st.one_of(st.floats(-1e6, 1e6), st.just(float("nan"))), min_size=1, max_size=30
    )
)
@settings(max_examples=50, deadline=None)
def test_best_of_matches_min_of_finite(values):
    recs = [EvalRecord(x=(0.0,), f=v, index=i) for i, v in enumerate(values)]
    best = best_of(recs)
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        assert best is None
    else:
        assert best.f == min(finite)
        assert values[best.index] == best.f
        assert best.index == values.index(best.f)

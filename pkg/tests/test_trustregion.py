import numpy as np
import pytest

from vqopt.core import (
    Box,
    Budget,
    ContractViolation,
    FunctionObjective,
    Termination,
    substream,
)
from vqopt.trustregion import (
    QuadModel,
    TrOptions,
    fit_model,
    full_quadratic_size,
    init_interpolation,
    solve_tr_subproblem,
    tr_minimize,
)

BOX2 = Box(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))


class TestTrOptions:
    def test_validation(self):
        with pytest.raises(ContractViolation):
            TrOptions(rho_begin_fraction=0.1, rho_end_fraction=0.1)
        with pytest.raises(ContractViolation):
            TrOptions(gamma_shrink=1.5)
        with pytest.raises(ContractViolation):
            TrOptions(gamma_grow=0.5)


class TestInitInterpolation:
    def test_boundary_start_shifted_inward(self):
        pts = init_interpolation(np.array([1.0, 0.0]), BOX2, 0.2, 5)
        assert np.allclose(pts[0], [0.8, 0.0])
        assert all(BOX2.contains(p) for p in pts)

    def test_centered_coordinate_displacements(self):
        pts = init_interpolation(np.zeros(2), BOX2, 0.2, 5)
        got = {tuple(np.round(p, 12)) for p in pts}
        assert got == {(0.0, 0.0), (0.2, 0.0), (0.0, 0.2), (-0.2, 0.0), (0.0, -0.2)}

    def test_extra_diagonal_point(self):
        pts = init_interpolation(np.zeros(2), BOX2, 0.2, 6)
        assert len(pts) == 6
        assert np.allclose(pts[5], [0.2, 0.2])

    def test_narrow_box_warns_and_reduces(self):
        box = Box(np.array([-0.05, -1.0]), np.array([0.05, 1.0]))
        with pytest.warns(UserWarning):
            pts = init_interpolation(np.zeros(2), box, 0.2, 5)
        assert all(box.contains(p) for p in pts)

    def test_m_points_range_enforced(self):
        with pytest.raises(ContractViolation):
            init_interpolation(np.zeros(2), BOX2, 0.2, 3)
        with pytest.raises(ContractViolation):
            init_interpolation(np.zeros(2), BOX2, 0.2, 7)


class TestFitModel:
    def test_exact_on_quadratic_with_full_set(self):
        # with a full interpolation set the fitted model reproduces the
        # quadratic's coefficients
        rng = substream(0, 0)
        n = 2
        a_mat = rng.standard_normal((n, n))
        hess = a_mat + a_mat.T + 3 * np.eye(n)
        grad = rng.standard_normal(n)
        const = 1.3
        f = lambda s: const + grad @ s + 0.5 * s @ hess @ s
        disp = [rng.uniform(-1, 1, n) for _ in range(full_quadratic_size(n))]
        model = fit_model(disp, [f(s) for s in disp])
        assert model is not None
        assert model.const == pytest.approx(const, abs=1e-8)
        assert np.allclose(model.grad, grad, atol=1e-8)
        assert np.allclose(model.hess, hess, atol=1e-8)

    def test_underdetermined_interpolates(self):
        rng = substream(0, 1)
        n = 3
        disp = [np.zeros(n)] + [rng.uniform(-1, 1, n) for _ in range(2 * n)]
        values = [float(rng.standard_normal()) for _ in disp]
        model = fit_model(disp, values)
        assert model is not None
        for s, v in zip(disp, values):
            assert model.value(s) == pytest.approx(v, abs=1e-7)

    def test_degenerate_set_returns_none(self):
        # collinear points cannot determine even the gradient
        disp = [np.array([t, 0.0]) for t in (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)]
        assert fit_model(disp, [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]) is None


class TestSolveTrSubproblem:
    def test_linear_model_steps_to_ball_boundary(self):
        model = QuadModel(0.0, np.array([1.0, 0.0]), np.zeros((2, 2)))
        step = solve_tr_subproblem(model, np.zeros(2), 0.5, BOX2)
        assert np.allclose(step, [-0.5, 0.0], atol=1e-10)

    def test_interior_minimizer_reached(self):
        hess = np.array([[4.0, 1.0], [1.0, 3.0]])
        grad = np.array([0.4, -0.2])
        model = QuadModel(0.0, grad, hess)
        step = solve_tr_subproblem(model, np.zeros(2), 1.0, BOX2)
        oracle = np.linalg.solve(hess, -grad)  # interior, within the radius
        assert np.allclose(step, oracle, atol=1e-8)
        assert model.value(step) == pytest.approx(model.value(oracle), abs=1e-10)

    def test_box_face_respected(self):
        model = QuadModel(0.0, np.array([1.0, 0.0]), np.zeros((2, 2)))
        step = solve_tr_subproblem(model, np.array([-0.9, 0.0]), 0.5, BOX2)
        assert step[0] == pytest.approx(-0.1)
        assert np.linalg.norm(step) <= 0.5 + 1e-12

    def test_nonfinite_model_rejected(self):
        model = QuadModel(0.0, np.array([np.nan, 0.0]), np.zeros((2, 2)))
        with pytest.raises(ContractViolation):
            solve_tr_subproblem(model, np.zeros(2), 0.5, BOX2)


class TestTrMinimize:
    def test_sphere_high_accuracy(self):
        obj = FunctionObjective(2, lambda x: float(np.dot(x, x)))
        out = tr_minimize(obj, BOX2, np.array([0.1, 0.1]), Budget(100))
        assert out.best_f <= 1e-6

    def test_all_steps_inside_box(self):
        obj = FunctionObjective(2, lambda x: float((x[0] - 0.9) ** 2 + 2 * x[1] ** 2))
        out = tr_minimize(obj, BOX2, np.array([-0.5, 0.5]), Budget(120))
        assert all(BOX2.contains(r.xvec) for r in out.history)
        assert out.best_f <= 1e-6

    def test_noisy_objective_runs_to_full_budget(self):
        # a fixed acceptance threshold cannot distinguish noise from progress,
        # so the loop keeps resampling instead of declaring convergence
        def f(x, stream_id):
            noise = float(substream(3, stream_id).standard_normal())
            return float(np.dot(x, x)) + 0.05 * noise

        obj = FunctionObjective(2, f, uses_stream=True)
        budget = Budget(150)
        out = tr_minimize(obj, BOX2, np.array([0.3, -0.3]), budget)
        assert out.evals_used == 150
        assert out.termination is Termination.BUDGET_EXHAUSTED

    def test_quartic_converges(self):
        obj = FunctionObjective(2, lambda x: float(np.sum((x - 0.2) ** 4)))
        out = tr_minimize(obj, BOX2, np.array([-0.4, 0.6]), Budget(300))
        assert out.best_f <= 1e-10

    def test_budget_safety(self):
        obj = FunctionObjective(2, lambda x: float(np.dot(x, x)))
        budget = Budget(9)
        out = tr_minimize(obj, BOX2, np.array([0.4, 0.4]), budget)
        assert budget.used <= 9
        assert out.evals_used <= 9

    def test_deterministic(self):
        obj = FunctionObjective(2, lambda x: float(np.dot(x, x)))
        a = tr_minimize(obj, BOX2, np.array([0.3, -0.3]), Budget(60))
        b = tr_minimize(obj, BOX2, np.array([0.3, -0.3]), Budget(60))
        assert a.history == b.history

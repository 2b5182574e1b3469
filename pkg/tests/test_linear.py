import numpy as np
import pytest

from isa2.features import apply_standardization, fit_standardization
from isa2.regressors import (
    LinearModel,
    SingularSystemError,
    destandardize_linear,
    fit_lasso,
    fit_ols,
    fit_svr,
    lasso_lambda_max,
    predict,
    soft_threshold,
    svr_objective,
)


def standardized_problem(rng, n, d, noise=0.1):
    X = rng.normal(0, 1.0, (n, d))
    X = apply_standardization(X, fit_standardization(X))
    w = rng.normal(0, 2.0, d)
    y = X @ w + 1.5 + rng.normal(0, noise, n)
    return X, y


class TestOLS:
    def test_exact_line(self):
        model = fit_ols(np.array([[0.0], [1.0], [2.0]]), np.array([1.0, 3.0, 5.0]))
        assert model.weights[0] == pytest.approx(2.0, abs=1e-12)
        assert model.bias == pytest.approx(1.0, abs=1e-12)

    def test_constant_target(self):
        rng = np.random.default_rng(0)
        X = rng.normal(0, 1, (10, 3))
        model = fit_ols(X, np.full(10, 4.25))
        np.testing.assert_allclose(model.weights, 0.0, atol=1e-12)
        assert model.bias == pytest.approx(4.25, abs=1e-12)

    @pytest.mark.parametrize("lam", [0.0, 0.5])
    def test_stationarity(self, lam):
        """Gradient of sum((y-Xw-b)^2) + lam*||w||^2 vanishes at the solution."""
        rng = np.random.default_rng(1)
        X = rng.normal(0, 1, (40, 5))
        y = rng.normal(0, 3, 40)
        model = fit_ols(X, y, lam)
        r = y - X @ model.weights - model.bias
        grad_w = -2.0 * X.T @ r + 2.0 * lam * model.weights
        grad_b = -2.0 * r.sum()
        assert np.sqrt((grad_w**2).sum() + grad_b**2) < 1e-8

    def test_singular_requires_ridge(self):
        X = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        y = np.array([1.0, 2.0, 3.0])
        with pytest.raises(SingularSystemError, match="ridge"):
            fit_ols(X, y, 0.0)
        model = fit_ols(X, y, 1e-6)
        assert model.kind == "ridge"
        assert np.isfinite(model.weights).all()

    def test_rejects_negative_lambda(self):
        with pytest.raises(ValueError):
            fit_ols(np.eye(2), np.ones(2), -1.0)


class TestSoftThreshold:
    @pytest.mark.parametrize(
        "z,gamma,expected",
        [(1.5, 1.0, 0.5), (-0.3, 1.0, 0.0), (-2.0, 0.5, -1.5), (0.0, 0.0, 0.0)],
    )
    def test_formula(self, z, gamma, expected):
        assert soft_threshold(z, gamma) == pytest.approx(expected, abs=1e-15)


def lasso_kkt_violation(X, y, model, lam):
    """Worst violation of the stationarity conditions, 0 when optimal."""
    n = X.shape[0]
    r = y - X @ model.weights - model.bias
    grad = -(X.T @ r) / n
    worst = abs(float(r.mean()))
    for j in range(X.shape[1]):
        if X[:, j].std() == 0:
            continue
        if model.weights[j] == 0.0:
            worst = max(worst, abs(grad[j]) - lam)
        else:
            worst = max(worst, abs(grad[j] + lam * np.sign(model.weights[j])))
    return worst


class TestLasso:
    def test_all_zero_at_lambda_max(self):
        rng = np.random.default_rng(2)
        X, y = standardized_problem(rng, 30, 6)
        lam_max = lasso_lambda_max(X, y)
        model = fit_lasso(X, y, lam_max)
        assert (model.weights == 0.0).all()
        assert model.bias == pytest.approx(y.mean())
        barely = fit_lasso(X, y, lam_max * 0.95, tol=1e-12, max_sweeps=5000)
        assert (barely.weights != 0.0).any()

    def test_kkt_conditions(self):
        rng = np.random.default_rng(3)
        X, y = standardized_problem(rng, 60, 10, noise=1.0)
        lam = 0.1
        model = fit_lasso(X, y, lam, tol=1e-12, max_sweeps=10_000)
        assert model.converged
        assert lasso_kkt_violation(X, y, model, lam) < 1e-6

    def test_approaches_ols_as_lambda_vanishes(self):
        rng = np.random.default_rng(4)
        X, y = standardized_problem(rng, 50, 5)
        ols = fit_ols(X, y)
        lasso = fit_lasso(X, y, 1e-8, tol=1e-13, max_sweeps=20_000)
        delta = np.concatenate((lasso.weights - ols.weights, [lasso.bias - ols.bias]))
        assert np.linalg.norm(delta) < 1e-3

    def test_convergence_flag_when_starved(self):
        rng = np.random.default_rng(5)
        X, y = standardized_problem(rng, 40, 8, noise=1.0)
        model = fit_lasso(X, y, 0.01, tol=1e-14, max_sweeps=1)
        assert not model.converged

    def test_requires_standardized_columns(self):
        X = np.array([[10.0, 0.0], [12.0, 1.0], [14.0, -1.0]])
        with pytest.raises(ValueError, match="standardized"):
            fit_lasso(X, np.ones(3), 0.1)

    def test_degenerate_column_stays_zero(self):
        rng = np.random.default_rng(6)
        X, y = standardized_problem(rng, 30, 4)
        X = np.column_stack([X, np.zeros(30)])
        model = fit_lasso(X, y, 0.05)
        assert model.weights[-1] == 0.0


class TestSVR:
    def test_tube_feasible_minimum_norm(self):
        """Collinear targets: the solver approaches the analytic tube optimum."""
        xs = np.linspace(-2.0, 2.0, 9)
        y = 2.0 * xs + 1.0
        eps, cost = 0.5, 5.0
        w_star = 2.0 - 2.0 * eps / (xs.max() - xs.min())
        obj_star = 0.5 * w_star**2
        model = fit_svr(xs[:, None], y, cost, eps, epochs=3000, seed=0)
        obj = svr_objective(xs[:, None], y, model.weights, model.bias, cost, eps)
        assert obj >= obj_star - 1e-9
        assert obj <= obj_star * 1.01

    def test_wide_tube_collapses_to_constant(self):
        rng = np.random.default_rng(7)
        xs = rng.normal(0, 1, 12)
        y = 5.0 + rng.uniform(-0.4, 0.4, 12)
        cost, eps = 2.0, 1.0
        model = fit_svr(xs[:, None], y, cost, eps, epochs=800, seed=0)
        # Brute force over the bias of the zero-slope model.
        grid = np.linspace(y.min(), y.max(), 2001)
        objs = [
            svr_objective(xs[:, None], y, np.zeros(1), b, cost, eps) for b in grid
        ]
        grid_min = min(objs)
        obj = svr_objective(xs[:, None], y, model.weights, model.bias, cost, eps)
        assert abs(model.weights[0]) < 0.05
        assert obj <= grid_min + 0.01 * max(1.0, grid_min)

    def test_matches_grid_on_noisy_line(self):
        rng = np.random.default_rng(8)
        xs = np.linspace(-1.5, 1.5, 16)
        y = 2.0 * xs + 1.0 + rng.uniform(-1.5, 1.5, 16)
        cost, eps = 2.0, 0.3
        ws = np.linspace(0.0, 4.0, 401)
        bs = np.linspace(-1.0, 3.0, 401)
        W, B = np.meshgrid(ws, bs, indexing="ij")
        resid = np.abs(y[None, None, :] - (W[..., None] * xs[None, None, :] + B[..., None]))
        grid_min = float(
            (0.5 * W**2 + cost * np.maximum(resid - eps, 0.0).sum(axis=2)).min()
        )
        model = fit_svr(xs[:, None], y, cost, eps, epochs=1500, seed=0)
        obj = svr_objective(xs[:, None], y, model.weights, model.bias, cost, eps)
        assert obj <= grid_min * 1.01
        assert obj >= grid_min * 0.99

    def test_objective_beats_zero_model(self):
        rng = np.random.default_rng(9)
        for trial in range(4):
            X = rng.normal(0, 1, (25, 3))
            y = X @ rng.normal(0, 2, 3) + rng.normal(0, 1, 25)
            model = fit_svr(X, y, 1.0, 0.5, epochs=400, seed=trial)
            obj = svr_objective(X, y, model.weights, model.bias, 1.0, 0.5)
            zero = svr_objective(X, y, np.zeros(3), float(y.mean()), 1.0, 0.5)
            assert obj <= zero + 1e-9

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(10)
        X = rng.normal(0, 1, (20, 4))
        y = rng.normal(0, 5, 20)
        a = fit_svr(X, y, 1.0, 0.2, epochs=50, seed=3)
        b = fit_svr(X, y, 1.0, 0.2, epochs=50, seed=3)
        assert a.weights.tobytes() == b.weights.tobytes()
        assert a.bias == b.bias

    def test_rejects_bad_hyperparameters(self):
        with pytest.raises(ValueError):
            fit_svr(np.eye(2), np.ones(2), cost=0.0, epsilon=0.1)
        with pytest.raises(ValueError):
            fit_svr(np.eye(2), np.ones(2), cost=1.0, epsilon=-0.1)


class TestPredict:
    def test_affine_evaluation(self):
        model = LinearModel(np.array([2.0]), 1.0, "ols", {})
        assert predict(model, np.array([3.0])) == 7.0

    def test_clamps_at_zero(self):
        model = LinearModel(np.array([-10.0]), 1.0, "ols", {})
        assert predict(model, np.array([3.0])) == 0.0

    def test_dimension_mismatch(self):
        model = LinearModel(np.array([2.0, 1.0]), 0.0, "ols", {})
        with pytest.raises(ValueError, match="dimension"):
            predict(model, np.array([1.0, 2.0, 3.0]))

    def test_standardized_and_raw_predictions_agree(self):
        rng = np.random.default_rng(11)
        X = rng.normal(5.0, 3.0, (40, 6))
        X[:, 2] = 7.0  # degenerate dimension
        y = X[:, 0] * 2 + rng.normal(0, 0.5, 40)
        s = fit_standardization(X)
        Z = apply_standardization(X, s)
        model_std = fit_ols(Z, y, 1e-9)
        model_raw = destandardize_linear(model_std, s)
        np.testing.assert_allclose(
            np.asarray(predict(model_std, Z)),
            np.asarray(predict(model_raw, X)),
            atol=1e-8,
        )

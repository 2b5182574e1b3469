"""Linear regression family: OLS/ridge, lasso, and linear epsilon-SVR.

All solvers operate on dense float64 matrices and return a LinearModel
whose prediction is w.x + b clamped below at 0 km/h.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..features import Standardization


class NumericalError(RuntimeError):
    """Numerical failure inside a solver."""


class SingularSystemError(NumericalError):
    """Normal equations are singular at ridge strength 0."""


class DivergenceError(NumericalError):
    """Training loss became non-finite."""


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    bias: float
    kind: str  # "ols" | "ridge" | "lasso" | "svr"
    hyperparameters: dict[str, float]
    converged: bool = True

    def raw(self, X: np.ndarray) -> np.ndarray | float:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.weights.shape[0]:
            raise ValueError(
                f"feature dimension {X.shape[-1]} does not match model "
                f"dimension {self.weights.shape[0]}"
            )
        return X @ self.weights + self.bias


def fit_ols(X: np.ndarray, y: np.ndarray, ridge_lambda: float = 0.0) -> LinearModel:
    """Least squares with optional ridge penalty on the weights (not the bias).

    Minimizes sum((y - Xw - b)^2) + ridge_lambda * ||w||^2 via the centered
    normal equations and a Cholesky factorization.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if ridge_lambda < 0:
        raise ValueError(f"ridge_lambda must be >= 0, got {ridge_lambda}")
    n, d = X.shape
    if n < 1 or y.shape != (n,):
        raise ValueError(f"bad problem shape X={X.shape} y={y.shape}")
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    xc = X - x_mean
    gram = xc.T @ xc + ridge_lambda * np.eye(d)
    rhs = xc.T @ (y - y_mean)
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        if ridge_lambda == 0.0:
            raise SingularSystemError(
                "normal equations are singular; supply ridge lambda > 0"
            ) from None
        raise NumericalError(
            f"cholesky factorization failed at ridge lambda {ridge_lambda}"
        ) from None
    # Rounding can slip an exactly singular matrix past the factorization;
    # a collapsed pivot is the telltale.
    pivots = np.diag(chol)
    if ridge_lambda == 0.0 and pivots.min() <= pivots.max() * 1e-6:
        raise SingularSystemError(
            "normal equations are singular; supply ridge lambda > 0"
        )
    w = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
    bias = y_mean - float(w @ x_mean)
    kind = "ols" if ridge_lambda == 0.0 else "ridge"
    return LinearModel(w, bias, kind, {"ridge_lambda": float(ridge_lambda)})


def soft_threshold(z: float, gamma: float) -> float:
    """S(z, gamma) = sign(z) * max(|z| - gamma, 0)."""
    return float(np.sign(z) * max(abs(z) - gamma, 0.0))


def _check_standardized(X: np.ndarray) -> None:
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    ok = (np.abs(means) < 1e-6) & ((np.abs(stds - 1.0) < 1e-6) | (stds < 1e-12))
    if not ok.all():
        j = int(np.flatnonzero(~ok)[0])
        raise ValueError(
            f"lasso requires standardized columns; column {j} has "
            f"mean {means[j]:.3g}, std {stds[j]:.3g}"
        )


def lasso_lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    """Smallest penalty at which every lasso coefficient is exactly zero."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return float(np.abs(X.T @ (y - y.mean())).max() / X.shape[0])


def fit_lasso(
    X: np.ndarray,
    y: np.ndarray,
    lasso_lambda: float,
    tol: float = 1e-9,
    max_sweeps: int = 1000,
) -> LinearModel:
    """Cyclic coordinate descent on (1/2N)||y - Xw - b||^2 + lambda*||w||_1.

    Columns must be standardized beforehand (degenerate columns may be
    all-zero). Stops when the largest coordinate update in a sweep falls
    below `tol`; if `max_sweeps` is exhausted first, the model is returned
    with its `converged` flag set to False.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if lasso_lambda <= 0:
        raise ValueError(f"lasso_lambda must be > 0, got {lasso_lambda}")
    n, d = X.shape
    _check_standardized(X)
    col_sq = (X * X).sum(axis=0) / n
    w = np.zeros(d)
    bias = float(y.mean())
    r = y - bias
    converged = False
    for _ in range(max_sweeps):
        max_step = 0.0
        for j in range(d):
            if col_sq[j] == 0.0:
                continue
            w_old = w[j]
            if w_old != 0.0:
                r += X[:, j] * w_old
            rho = float(X[:, j] @ r) / n
            w[j] = soft_threshold(rho, lasso_lambda) / col_sq[j]
            if w[j] != 0.0:
                r -= X[:, j] * w[j]
            max_step = max(max_step, abs(w[j] - w_old))
        shift = float(r.mean())
        if shift != 0.0:
            bias += shift
            r -= shift
        if max_step < tol:
            converged = True
            break
    return LinearModel(
        w,
        bias,
        "lasso",
        {
            "lasso_lambda": float(lasso_lambda),
            "tol": float(tol),
            "max_sweeps": float(max_sweeps),
        },
        converged=converged,
    )


def svr_objective(
    X: np.ndarray, y: np.ndarray, w: np.ndarray, bias: float, cost: float, epsilon: float
) -> float:
    """(1/2)||w||^2 + cost * sum of epsilon-insensitive residuals."""
    residual = np.abs(np.asarray(y) - (np.asarray(X) @ w + bias))
    return float(0.5 * w @ w + cost * np.maximum(residual - epsilon, 0.0).sum())


def fit_svr(
    X: np.ndarray,
    y: np.ndarray,
    cost: float,
    epsilon: float,
    epochs: int = 60,
    seed: int = 0,
    step_scale: float = 1.0,
) -> LinearModel:
    """Primal epsilon-insensitive SVR by averaged stochastic subgradient descent.

    Minimizes (1/2)||w||^2 + cost * sum(max(0, |y - w.x - b| - epsilon)) over
    a seed-fixed shuffle of the rows; the returned parameters are the average
    of the iterates over the second half of the run.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if cost <= 0 or epsilon < 0 or epochs < 1:
        raise ValueError(
            f"need cost > 0, epsilon >= 0, epochs >= 1; "
            f"got {cost}, {epsilon}, {epochs}"
        )
    n, d = X.shape
    rng = np.random.default_rng(seed)
    w = np.zeros(d)
    bias = 0.0
    # Offset keeps early steps bounded when cost * ||x||^2 is large; the tail
    # decays like n/t, the 1/(mu*t) schedule for the (1/n)-strongly-convex
    # per-sample objective.
    mean_sq = float((X * X).sum(axis=1).mean()) + 1.0
    t0 = n * max(1.0, cost * mean_sq)
    total = epochs * n
    avg_from = total // 2
    w_avg = np.zeros(d)
    bias_avg = 0.0
    averaged = 0
    t = 0
    for _ in range(epochs):
        order = rng.permutation(n)
        for i in order:
            t += 1
            eta = step_scale * n / (t + t0)
            err = float(w @ X[i] + bias - y[i])
            w *= 1.0 - eta / n
            if abs(err) > epsilon:
                sign = 1.0 if err > 0 else -1.0
                w -= eta * cost * sign * X[i]
                bias -= eta * cost * sign
            if t > avg_from:
                averaged += 1
                w_avg += (w - w_avg) / averaged
                bias_avg += (bias - bias_avg) / averaged
    if averaged == 0:
        w_avg, bias_avg = w, bias
    return LinearModel(
        w_avg,
        float(bias_avg),
        "svr",
        {
            "cost": float(cost),
            "epsilon": float(epsilon),
            "epochs": float(epochs),
            "step_scale": float(step_scale),
            "seed": float(seed),
        },
    )


def destandardize_linear(model: LinearModel, s: Standardization) -> LinearModel:
    """Rewrite a model trained on standardized inputs to act on raw inputs."""
    w_std = model.weights
    w_raw = np.where(s.degenerate, 0.0, w_std / s.std)
    bias = model.bias - float((w_raw * s.mean).sum())
    return LinearModel(w_raw, bias, model.kind, dict(model.hyperparameters),
                       model.converged)

"""Solver hyperparameters and the kind-keyed fit/predict dispatch."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .boosting import BoostedModel, fit_boosting
from .linear import LinearModel, fit_lasso, fit_ols, fit_svr
from .mlp import DEFAULT_LR_SCHEDULE, MLPModel, fit_mlp

SOLVER_KINDS = ("ols", "lasso", "svr", "boosting", "mlp")

# Solvers whose inputs are standardized before fitting. Boosted trees are
# split-point invariant under monotone feature maps, so they are excluded.
STANDARDIZED_KINDS = ("ols", "lasso", "svr", "mlp")

Model = LinearModel | BoostedModel | MLPModel


@dataclass(frozen=True)
class TrainConfig:
    ridge_lambda: float = 0.0
    lasso_lambda: float = 0.01
    lasso_tol: float = 1e-9
    lasso_max_sweeps: int = 1000
    svr_cost: float = 1.0
    svr_epsilon: float = 0.5
    svr_epochs: int = 60
    svr_step_scale: float = 1.0
    boosting_trees: int = 100
    boosting_depth: int = 3
    boosting_shrinkage: float = 0.1
    mlp_hidden: int = 32
    mlp_iterations: int = 4000
    mlp_batch: int = 20
    mlp_momentum: float = 0.9
    mlp_lr_schedule: tuple[tuple[int, float], ...] = DEFAULT_LR_SCHEDULE
    rng_seed: int = 0


def fit(kind: str, X: np.ndarray, y: np.ndarray, config: TrainConfig) -> Model:
    if kind == "ols":
        return fit_ols(X, y, config.ridge_lambda)
    if kind == "lasso":
        return fit_lasso(
            X, y, config.lasso_lambda, config.lasso_tol, config.lasso_max_sweeps
        )
    if kind == "svr":
        return fit_svr(
            X,
            y,
            config.svr_cost,
            config.svr_epsilon,
            config.svr_epochs,
            config.rng_seed,
            config.svr_step_scale,
        )
    if kind == "boosting":
        return fit_boosting(
            X,
            y,
            config.boosting_trees,
            config.boosting_depth,
            config.boosting_shrinkage,
            config.rng_seed,
        )
    if kind == "mlp":
        return fit_mlp(
            X,
            y,
            hidden=config.mlp_hidden,
            iterations=config.mlp_iterations,
            batch_size=config.mlp_batch,
            momentum=config.mlp_momentum,
            lr_schedule=config.mlp_lr_schedule,
            seed=config.rng_seed,
        )
    raise ValueError(f"unknown solver kind {kind!r}; expected one of {SOLVER_KINDS}")


def predict(model: Model, x: np.ndarray) -> np.ndarray | float:
    """Model forward pass, clamped below at 0 km/h."""
    raw = model.raw(x)
    if np.isscalar(raw) or getattr(raw, "ndim", 1) == 0:
        return max(float(raw), 0.0)
    return np.maximum(raw, 0.0)


def hyperparameters_for(kind: str, config: TrainConfig) -> dict[str, float]:
    """The subset of `config` that actually drives solver `kind`."""
    if kind == "ols":
        return {"ridge_lambda": config.ridge_lambda}
    if kind == "lasso":
        return {
            "lasso_lambda": config.lasso_lambda,
            "lasso_tol": config.lasso_tol,
            "lasso_max_sweeps": config.lasso_max_sweeps,
        }
    if kind == "svr":
        return {
            "svr_cost": config.svr_cost,
            "svr_epsilon": config.svr_epsilon,
            "svr_epochs": config.svr_epochs,
            "svr_step_scale": config.svr_step_scale,
            "rng_seed": config.rng_seed,
        }
    if kind == "boosting":
        return {
            "boosting_trees": config.boosting_trees,
            "boosting_depth": config.boosting_depth,
            "boosting_shrinkage": config.boosting_shrinkage,
        }
    if kind == "mlp":
        return {
            "mlp_hidden": config.mlp_hidden,
            "mlp_iterations": config.mlp_iterations,
            "mlp_batch": config.mlp_batch,
            "mlp_momentum": config.mlp_momentum,
            "mlp_lr_schedule": config.mlp_lr_schedule,
            "rng_seed": config.rng_seed,
        }
    raise ValueError(f"unknown solver kind {kind!r}")


def model_size(model: Model) -> tuple[int, int]:
    """(nonzero weights, tree count) used for cross-validation tie-breaking."""
    if isinstance(model, LinearModel):
        return int(np.count_nonzero(model.weights)), 0
    if isinstance(model, BoostedModel):
        return 0, len(model.trees)
    if isinstance(model, MLPModel):
        return int(model.w1.size + model.b1.size + model.w2.size + 1), 0
    raise TypeError(f"unknown model type {type(model)!r}")

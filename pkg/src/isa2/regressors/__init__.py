"""Regression suite: OLS/ridge, lasso, linear SVR, boosted trees, MLP."""

from .boosting import BoostedModel, Tree, fit_boosting
from .config import (
    SOLVER_KINDS,
    STANDARDIZED_KINDS,
    Model,
    TrainConfig,
    fit,
    hyperparameters_for,
    model_size,
    predict,
)
from .linear import (
    DivergenceError,
    LinearModel,
    NumericalError,
    SingularSystemError,
    destandardize_linear,
    fit_lasso,
    fit_ols,
    fit_svr,
    lasso_lambda_max,
    soft_threshold,
    svr_objective,
)
from .mlp import DEFAULT_LR_SCHEDULE, MLPModel, fit_mlp, mlp_loss_and_grads
from .selection import CVResult, cross_validate
from .serialize import ModelBundle, ModelFormatError, load_model, save_model

__all__ = [
    "BoostedModel",
    "CVResult",
    "DEFAULT_LR_SCHEDULE",
    "DivergenceError",
    "LinearModel",
    "MLPModel",
    "Model",
    "ModelBundle",
    "ModelFormatError",
    "NumericalError",
    "SOLVER_KINDS",
    "STANDARDIZED_KINDS",
    "SingularSystemError",
    "TrainConfig",
    "Tree",
    "cross_validate",
    "destandardize_linear",
    "fit",
    "fit_boosting",
    "fit_lasso",
    "fit_mlp",
    "fit_ols",
    "fit_svr",
    "hyperparameters_for",
    "lasso_lambda_max",
    "load_model",
    "model_size",
    "mlp_loss_and_grads",
    "predict",
    "save_model",
    "soft_threshold",
    "svr_objective",
]

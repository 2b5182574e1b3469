"""Cross-validation over solver hyperparameters and pyramid levels.

Frames come from video, so neighbouring rows are near-duplicates; folds
are contiguous blocks of the (time-ordered) training rows rather than an
i.i.d. shuffle, which would leak across folds.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from ..features import apply_standardization, fit_standardization
from .config import STANDARDIZED_KINDS, TrainConfig, fit, model_size, predict


@dataclass(frozen=True)
class CVResult:
    config: TrainConfig
    levels: int
    mean_mae: float
    fold_maes: tuple[float, ...]


def _fold_bounds(n: int, folds: int) -> list[tuple[int, int]]:
    return [(i * n // folds, (i + 1) * n // folds) for i in range(folds)]


def cross_validate(
    features_by_level: Mapping[int, np.ndarray],
    y: np.ndarray,
    kind: str,
    grid: Sequence[TrainConfig],
    levels_grid: Sequence[int],
    folds: int,
    seed: int = 0,
) -> CVResult:
    """Pick the (config, levels) pair with the lowest mean validation MAE.

    Ties go to the smaller model: fewer nonzero weights, then fewer trees,
    then lower pyramid levels. The seed overrides each candidate config's
    rng_seed so the whole search is reproducible from one number.
    """
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    if n < folds:
        raise ValueError(f"{n} rows cannot fill {folds} folds")
    if not grid or not levels_grid:
        raise ValueError("hyperparameter and levels grids must be non-empty")
    for levels in levels_grid:
        if levels not in features_by_level:
            raise ValueError(f"no feature matrix supplied for levels={levels}")
        if features_by_level[levels].shape[0] != n:
            raise ValueError(f"feature matrix for levels={levels} has wrong row count")

    bounds = _fold_bounds(n, folds)
    best: tuple | None = None
    best_result: CVResult | None = None
    for order, (config, levels) in enumerate(
        (replace(c, rng_seed=seed), lv) for lv in levels_grid for c in grid
    ):
        X = features_by_level[levels]
        maes: list[float] = []
        nonzeros: list[int] = []
        tree_counts: list[int] = []
        for lo, hi in bounds:
            train_rows = np.concatenate([np.arange(0, lo), np.arange(hi, n)])
            val_rows = np.arange(lo, hi)
            X_train, X_val = X[train_rows], X[val_rows]
            if kind in STANDARDIZED_KINDS:
                s = fit_standardization(X_train)
                X_train = apply_standardization(X_train, s)
                X_val = apply_standardization(X_val, s)
            model = fit(kind, X_train, y[train_rows], config)
            pred = predict(model, X_val)
            maes.append(float(np.abs(pred - y[val_rows]).mean()))
            nz, trees = model_size(model)
            nonzeros.append(nz)
            tree_counts.append(trees)
        mean_mae = float(np.mean(maes))
        key = (
            mean_mae,
            float(np.mean(nonzeros)),
            float(np.mean(tree_counts)),
            levels,
            order,
        )
        if best is None or key < best:
            best = key
            best_result = CVResult(config, levels, mean_mae, tuple(maes))
    assert best_result is not None
    return best_result

"""Least-squares gradient boosting with exact greedy axis-aligned splits.

Every tree fits the current residuals; candidate thresholds are the
midpoints between consecutive distinct sorted feature values, enumerated
exhaustively. Desk-scale dimensions make histogram approximations
unnecessary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Tree:
    """Flat node arrays; children of -1 mark a leaf, whose value is `value`."""

    feature: np.ndarray  # int32, -1 for leaves
    threshold: np.ndarray  # float64
    left: np.ndarray  # int32 child index, -1 for leaves
    right: np.ndarray  # int32
    value: np.ndarray  # float64 leaf prediction (internal nodes carry 0)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.zeros(X.shape[0])
        stack = [(0, np.arange(X.shape[0]))]
        while stack:
            node, rows = stack.pop()
            if rows.size == 0:
                continue
            if self.feature[node] < 0:
                out[rows] = self.value[node]
                continue
            go_left = X[rows, self.feature[node]] <= self.threshold[node]
            stack.append((int(self.left[node]), rows[go_left]))
            stack.append((int(self.right[node]), rows[~go_left]))
        return out


@dataclass(frozen=True)
class BoostedModel:
    trees: tuple[Tree, ...]
    shrinkage: float
    base_prediction: float
    max_depth: int
    tree_count: int
    train_mse: tuple[float, ...] = field(default=())

    def raw(self, X: np.ndarray) -> np.ndarray | float:
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X2 = np.atleast_2d(X)
        out = np.full(X2.shape[0], self.base_prediction)
        for tree in self.trees:
            out += self.shrinkage * tree.predict(X2)
        return float(out[0]) if single else out


def _best_split(X: np.ndarray, residual: np.ndarray) -> tuple[int, float] | None:
    """Exact greedy split minimizing child SSE; None if nothing reduces it."""
    n, d = X.shape
    if n < 2:
        return None
    order = np.argsort(X, axis=0, kind="stable")
    x_sorted = np.take_along_axis(X, order, axis=0)
    r_sorted = residual[order]
    prefix = np.cumsum(r_sorted, axis=0)
    total = prefix[-1]
    left_n = np.arange(1, n, dtype=np.float64)[:, None]
    left_sum = prefix[:-1]
    right_sum = total[None, :] - left_sum
    # Maximizing sum_L^2/n_L + sum_R^2/n_R minimizes the split SSE.
    score = left_sum**2 / left_n + right_sum**2 / (n - left_n)
    valid = x_sorted[:-1] < x_sorted[1:]
    if not valid.any():
        return None
    score = np.where(valid, score, -np.inf)
    flat = int(np.argmax(score))
    k, j = divmod(flat, d)
    base = float(total[j] ** 2) / n
    if score[k, j] <= base + 1e-12:
        return None
    threshold = 0.5 * (x_sorted[k, j] + x_sorted[k + 1, j])
    return j, float(threshold)


def _grow_tree(X: np.ndarray, residual: np.ndarray, max_depth: int) -> Tree:
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def add_node(rows: np.ndarray, depth: int) -> int:
        idx = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        split = _best_split(X[rows], residual[rows]) if depth < max_depth else None
        if split is None:
            value[idx] = float(residual[rows].mean())
            return idx
        j, thr = split
        feature[idx] = j
        threshold[idx] = thr
        go_left = X[rows, j] <= thr
        left[idx] = add_node(rows[go_left], depth + 1)
        right[idx] = add_node(rows[~go_left], depth + 1)
        return idx

    add_node(np.arange(X.shape[0]), 0)
    return Tree(
        np.array(feature, dtype=np.int32),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int32),
        np.array(right, dtype=np.int32),
        np.array(value, dtype=np.float64),
    )


def fit_boosting(
    X: np.ndarray,
    y: np.ndarray,
    tree_count: int,
    max_depth: int,
    shrinkage: float,
    seed: int = 0,
) -> BoostedModel:
    """Boost `tree_count` residual trees from the training-target mean.

    `seed` is accepted for interface uniformity; exact greedy splitting is
    fully deterministic, so it is unused. The per-round training MSE is
    recorded on the model and is non-increasing by construction.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if tree_count < 1 or max_depth < 1 or not (0.0 < shrinkage <= 1.0):
        raise ValueError(
            f"need tree_count >= 1, max_depth >= 1, shrinkage in (0, 1]; "
            f"got {tree_count}, {max_depth}, {shrinkage}"
        )
    base = float(y.mean())
    residual = y - base
    trees: list[Tree] = []
    mse: list[float] = []
    for _ in range(tree_count):
        tree = _grow_tree(X, residual, max_depth)
        residual = residual - shrinkage * tree.predict(X)
        trees.append(tree)
        mse.append(float((residual**2).mean()))
    return BoostedModel(
        trees=tuple(trees),
        shrinkage=float(shrinkage),
        base_prediction=base,
        max_depth=max_depth,
        tree_count=tree_count,
        train_mse=tuple(mse),
    )

"""Single-hidden-layer perceptron trained with mini-batch SGD + momentum.

Rectifier hidden activation, identity output, mean squared (Euclidean)
loss. The default schedule is 4000 iterations at learning rate 1e-4 for
the first 2000 and 1e-5 afterwards, momentum 0.9, batch size 20.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linear import DivergenceError

DEFAULT_LR_SCHEDULE = ((2000, 1e-4), (4000, 1e-5))


@dataclass(frozen=True)
class MLPModel:
    w1: np.ndarray  # (D, H)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (H,)
    b2: float
    loss_curve: tuple[float, ...] = ()

    @property
    def hidden_width(self) -> int:
        return self.w1.shape[1]

    def raw(self, X: np.ndarray) -> np.ndarray | float:
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X2 = np.atleast_2d(X)
        if X2.shape[1] != self.w1.shape[0]:
            raise ValueError(
                f"feature dimension {X2.shape[1]} does not match model "
                f"dimension {self.w1.shape[0]}"
            )
        hidden = np.maximum(X2 @ self.w1 + self.b1, 0.0)
        out = hidden @ self.w2 + self.b2
        return float(out[0]) if single else out


def mlp_loss_and_grads(
    model: MLPModel, X: np.ndarray, y: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean squared loss and its analytic gradients on one batch."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    z = X @ model.w1 + model.b1
    hidden = np.maximum(z, 0.0)
    pred = hidden @ model.w2 + model.b2
    err = pred - y
    loss = float((err**2).mean())
    dout = 2.0 * err / n
    g_w2 = hidden.T @ dout
    g_b2 = float(dout.sum())
    dhidden = np.outer(dout, model.w2)
    dhidden[z <= 0.0] = 0.0
    g_w1 = X.T @ dhidden
    g_b1 = dhidden.sum(axis=0)
    return loss, {"w1": g_w1, "b1": g_b1, "w2": g_w2, "b2": np.float64(g_b2)}


def _lr_at(iteration: int, schedule: tuple[tuple[int, float], ...]) -> float:
    for until, lr in schedule:
        if iteration < until:
            return lr
    return schedule[-1][1]


def fit_mlp(
    X: np.ndarray,
    y: np.ndarray,
    hidden: int = 32,
    iterations: int = 4000,
    batch_size: int = 20,
    momentum: float = 0.9,
    lr_schedule: tuple[tuple[int, float], ...] = DEFAULT_LR_SCHEDULE,
    seed: int = 0,
) -> MLPModel:
    """Train by seed-fixed shuffled mini-batches; batches wrap when N < batch.

    Raises DivergenceError naming the iteration if the loss stops being
    finite. The per-iteration batch loss is recorded on the model.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    if hidden < 1 or iterations < 1 or batch_size < 1:
        raise ValueError("hidden, iterations and batch_size must be >= 1")
    rng = np.random.default_rng(seed)
    w1 = rng.normal(0.0, np.sqrt(2.0 / d), size=(d, hidden))
    b1 = np.zeros(hidden)
    w2 = rng.normal(0.0, np.sqrt(1.0 / hidden), size=hidden)
    b2 = 0.0
    v_w1 = np.zeros_like(w1)
    v_b1 = np.zeros_like(b1)
    v_w2 = np.zeros_like(w2)
    v_b2 = 0.0
    order = rng.permutation(n)
    cursor = 0
    losses: list[float] = []
    for it in range(iterations):
        take: list[np.ndarray] = []
        need = batch_size
        while need > 0:
            if cursor == n:
                order = rng.permutation(n)
                cursor = 0
            grab = min(need, n - cursor)
            take.append(order[cursor : cursor + grab])
            cursor += grab
            need -= grab
        batch = np.concatenate(take)
        model = MLPModel(w1, b1, w2, b2)
        loss, grads = mlp_loss_and_grads(model, X[batch], y[batch])
        if not np.isfinite(loss):
            raise DivergenceError(f"mlp loss diverged at iteration {it}")
        losses.append(loss)
        lr = _lr_at(it, lr_schedule)
        v_w1 = momentum * v_w1 - lr * grads["w1"]
        v_b1 = momentum * v_b1 - lr * grads["b1"]
        v_w2 = momentum * v_w2 - lr * grads["w2"]
        v_b2 = momentum * v_b2 - lr * float(grads["b2"])
        w1 = w1 + v_w1
        b1 = b1 + v_b1
        w2 = w2 + v_w2
        b2 = b2 + v_b2
    return MLPModel(w1, b1, w2, float(b2), loss_curve=tuple(losses))

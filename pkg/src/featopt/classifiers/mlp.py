"""Single-hidden-layer network: ReLU, softmax output, Adam on mini-batches."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..rng import Rng
from .linear import softmax


@dataclass
class MlpModel:
    W1: np.ndarray  # (hidden, d)
    b1: np.ndarray
    W2: np.ndarray  # (K, hidden)
    b2: np.ndarray
    loss_history: list = field(default_factory=list, compare=False)

    def scores(self, X: np.ndarray) -> np.ndarray:
        H = np.maximum(X @ self.W1.T + self.b1, 0.0)
        return H @ self.W2.T + self.b2

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.scores(X), axis=1)


def loss_and_grad(params, X, Y):
    """Mean cross-entropy and analytic gradients; exposed for gradient checks."""
    W1, b1, W2, b2 = params
    n = X.shape[0]
    A = X @ W1.T + b1
    H = np.maximum(A, 0.0)
    P = softmax(H @ W2.T + b2)
    loss = -np.log(np.clip((P * Y).sum(axis=1), 1e-300, None)).mean()
    D = (P - Y) / n                      # (n, K)
    gW2 = D.T @ H
    gb2 = D.sum(axis=0)
    DH = (D @ W2) * (A > 0.0)            # (n, hidden)
    gW1 = DH.T @ X
    gb1 = DH.sum(axis=0)
    return loss, (gW1, gb1, gW2, gb2)


def fit_mlp(X, y, hidden: int = 128, lr: float = 1e-3, epochs: int = 200,
            patience: int = 20, batch_size: int = 64, seed: int = 0,
            n_classes=None) -> MlpModel:
    """Adam training with early stopping on the epoch's mean batch loss."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n, d = X.shape
    K = int(n_classes if n_classes is not None else y.max() + 1)
    Y = np.equal.outer(y, np.arange(K)).astype(np.float64)
    rng = Rng(seed)

    W1 = rng.normals(hidden * d).reshape(hidden, d) * np.sqrt(2.0 / d)
    b1 = np.zeros(hidden)
    W2 = rng.normals(K * hidden).reshape(K, hidden) * np.sqrt(1.0 / hidden)
    b2 = np.zeros(K)
    params = [W1, b1, W2, b2]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8

    best = np.inf
    stale = 0
    history = []
    step = 0
    for _ in range(epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            loss, grads = loss_and_grad(params, X[idx], Y[idx])
            epoch_loss += loss
            n_batches += 1
            step += 1
            for j, g in enumerate(grads):
                m[j] = beta1 * m[j] + (1 - beta1) * g
                v[j] = beta2 * v[j] + (1 - beta2) * g * g
                mhat = m[j] / (1 - beta1 ** step)
                vhat = v[j] / (1 - beta2 ** step)
                params[j] -= lr * mhat / (np.sqrt(vhat) + eps)
        epoch_loss /= max(n_batches, 1)
        history.append(epoch_loss)
        if epoch_loss < best - 1e-6:
            best = epoch_loss
            stale = 0
        else:
            stale += 1
            if stale >= patience:
                break
    return MlpModel(*params, loss_history=history)

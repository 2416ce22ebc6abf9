"""Multinomial logistic regression with L2 penalty, accelerated first-order fit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GRAD_TOL = 1e-6
MAX_PASSES = 2000


def softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class LogisticModel:
    W: np.ndarray  # (K, d)
    b: np.ndarray  # (K,)

    def scores(self, X: np.ndarray) -> np.ndarray:
        return X @ self.W.T + self.b

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.scores(X), axis=1)


def _loss_grad(W, b, X, Y, lam):
    n = X.shape[0]
    P = softmax(X @ W.T + b)
    # clip keeps log finite on confidently-wrong rows
    ce = -np.log(np.clip((P * Y).sum(axis=1), 1e-300, None)).mean()
    loss = ce + 0.5 * lam * (W ** 2).sum()
    D = (P - Y) / n
    gW = D.T @ X + lam * W
    gb = D.sum(axis=0)
    return loss, gW, gb


def fit_logistic(X, y, C: float = 1.0, n_classes=None, grad_tol: float = GRAD_TOL,
                 max_passes: int = MAX_PASSES) -> LogisticModel:
    """FISTA-style accelerated gradient descent with backtracking.

    Stops when the max-abs gradient entry at the evaluation point drops to
    grad_tol, or after max_passes gradient evaluations.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n, d = X.shape
    K = int(n_classes if n_classes is not None else y.max() + 1)
    Y = np.equal.outer(y, np.arange(K)).astype(np.float64)
    lam = 1.0 / (C * n)

    W = np.zeros((K, d))
    b = np.zeros(K)
    Wv, bv = W.copy(), b.copy()
    theta = 1.0
    L = 1.0
    for _ in range(max_passes):
        loss_v, gW, gb = _loss_grad(Wv, bv, X, Y, lam)
        gmax = max(np.abs(gW).max(), np.abs(gb).max())
        if gmax <= grad_tol:
            W, b = Wv, bv
            break
        gsq = (gW ** 2).sum() + (gb ** 2).sum()
        while True:
            Wn = Wv - gW / L
            bn = bv - gb / L
            loss_n, _, _ = _loss_grad(Wn, bn, X, Y, lam)
            if loss_n <= loss_v - 0.5 * gsq / L or L > 1e15:
                break
            L *= 2.0
        theta_n = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
        mom = (theta - 1.0) / theta_n
        Wv = Wn + mom * (Wn - W)
        bv = bn + mom * (bn - b)
        # restart momentum if it points uphill
        if (gW * (Wn - W)).sum() + (gb * (bn - b)).sum() > 0:
            Wv, bv = Wn.copy(), bn.copy()
            theta_n = 1.0
        W, b = Wn, bn
        theta = theta_n
        L *= 0.9
    return LogisticModel(W, b)

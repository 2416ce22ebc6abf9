"""One-vs-rest soft-margin SVM trained by kernelized dual coordinate ascent.

The bias is folded into the kernel (K + 1), which removes the dual equality
constraint and lets each alpha be optimized in closed form. Update order is
a seeded permutation per sweep (much faster than cyclic order on correlated
rows); a machine is converged once the worst KKT violation over a full
sweep drops below tol.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..rng import Rng

TOL = 1e-4
MAX_PASSES = 1000


def kernel_matrix(A: np.ndarray, B: np.ndarray, kernel: str, gamma: float) -> np.ndarray:
    if kernel == "linear":
        return A @ B.T
    if kernel == "rbf":
        d2 = ((A ** 2).sum(1)[:, None] + (B ** 2).sum(1)[None, :] - 2.0 * A @ B.T)
        return np.exp(-gamma * np.maximum(d2, 0.0))
    raise ValueError(f"unknown kernel {kernel!r}")


def _train_binary(Kb: np.ndarray, ysign: np.ndarray, C: float, rng: Rng,
                  tol: float = TOL, max_passes: int = MAX_PASSES):
    """Maximize the box-constrained dual for one binary machine.

    Kb is the bias-augmented kernel (K + 1). Returns (alpha, passes, max_kkt).
    """
    n = Kb.shape[0]
    alpha = np.zeros(n)
    f = np.zeros(n)  # f_j = sum_i alpha_i y_i Kb[i, j]
    diag = Kb.diagonal().copy()
    ys = ysign
    worst = np.inf
    passes = 0
    while passes < max_passes and worst > tol:
        worst = 0.0
        for i in rng.permutation(n):
            yi = ys[i]
            g = 1.0 - yi * f[i]  # dual gradient wrt alpha_i
            a = alpha[i]
            if a <= 0.0:
                viol = g if g > 0.0 else 0.0
            elif a >= C:
                viol = -g if g < 0.0 else 0.0
            else:
                viol = g if g > 0.0 else -g
            if viol > worst:
                worst = viol
            if viol <= tol:
                continue
            new = a + g / diag[i]
            if new < 0.0:
                new = 0.0
            elif new > C:
                new = C
            delta = new - a
            if delta != 0.0:
                alpha[i] = new
                f += (delta * yi) * Kb[i]
        passes += 1
    return alpha, passes, worst


@dataclass
class SvmModel:
    X: np.ndarray          # support vectors (union over machines)
    dual_coef: np.ndarray  # (K, n_support): alpha_i * y_i per machine
    kernel: str
    gamma: float
    C: float
    n_classes: int

    def decision(self, X: np.ndarray) -> np.ndarray:
        Kt = kernel_matrix(np.asarray(X, dtype=np.float64), self.X,
                           self.kernel, self.gamma) + 1.0
        return Kt @ self.dual_coef.T

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.decision(X), axis=1)


def fit_svm(X, y, C: float = 1.0, kernel: str = "rbf", gamma: float | None = None,
            n_classes=None, tol: float = TOL, seed: int = 0) -> SvmModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n, d = X.shape
    K = int(n_classes if n_classes is not None else y.max() + 1)
    if gamma is None:
        gamma = 1.0 / d
    Kb = kernel_matrix(X, X, kernel, gamma) + 1.0
    coefs = np.zeros((K, n))
    for c in range(K):
        ysign = np.where(y == c, 1.0, -1.0)
        rng = Rng(seed).spawn("svm-machine", c)
        alpha, _, _ = _train_binary(Kb, ysign, C, rng, tol=tol)
        coefs[c] = alpha * ysign
    support = np.flatnonzero(np.abs(coefs).sum(axis=0) > 0)
    if support.size == 0:
        support = np.array([0])
    return SvmModel(X[support].copy(), coefs[:, support].copy(),
                    kernel, float(gamma), float(C), K)

"""K-nearest-neighbors by brute-force scan with deterministic tie-breaking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_CHUNK_BUDGET = 2 ** 24  # elements per manhattan distance block


@dataclass
class KnnModel:
    X: np.ndarray
    y: np.ndarray
    k: int
    metric: str  # 'euclidean' | 'manhattan'
    n_classes: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.empty(X.shape[0], dtype=np.int64)
        if self.metric == "euclidean":
            chunk = 256
        else:  # |q - x| broadcasting materializes chunk*n*d floats
            chunk = max(1, min(256, _CHUNK_BUDGET // max(self.X.size, 1)))
        for start in range(0, X.shape[0], chunk):
            q = X[start:start + chunk]
            if self.metric == "euclidean":
                d2 = ((q ** 2).sum(1)[:, None] + (self.X ** 2).sum(1)[None, :]
                      - 2.0 * q @ self.X.T)
                dist = np.maximum(d2, 0.0)
            else:
                dist = np.abs(q[:, None, :] - self.X[None, :, :]).sum(axis=2)
            # stable sort: equal distances resolve to the lower training index
            nn = np.argsort(dist, axis=1, kind="stable")[:, :self.k]
            votes = self.y[nn]
            flat = votes + np.arange(votes.shape[0])[:, None] * self.n_classes
            counts = np.bincount(flat.ravel(),
                                 minlength=votes.shape[0] * self.n_classes)
            counts = counts.reshape(votes.shape[0], self.n_classes)
            out[start:start + votes.shape[0]] = np.argmax(counts, axis=1)
        return out


def fit_knn(X, y, k: int = 5, metric: str = "euclidean", n_classes=None) -> KnnModel:
    if metric not in ("euclidean", "manhattan"):
        raise ValueError(f"unknown metric {metric!r}")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    K = int(n_classes if n_classes is not None else y.max() + 1)
    k = min(int(k), X.shape[0])
    return KnnModel(X.copy(), y.copy(), k, metric, K)

"""Synthetic Gaussian datasets used by the test benchmarks and the demo fixture."""

from __future__ import annotations

import numpy as np

from .rng import Rng


def gaussian_blobs(n: int, d: int, n_classes: int = 3, separation: float = 4.0,
                   seed: int = 42, informative: int | None = None,
                   class_weights=None):
    """Isotropic unit-variance Gaussian classes with mean separation in sigmas.

    Class means are separation-apart random unit directions scaled so that
    pairwise mean distances are close to `separation`. Only the first
    `informative` coordinates carry the means; the rest are pure noise.
    Returns (X, y) with rows grouped sample-by-sample in a seeded shuffle.
    """
    rng = Rng(seed)
    informative = d if informative is None else min(informative, d)
    means = np.zeros((n_classes, d))
    raw = rng.normals(n_classes * informative).reshape(n_classes, informative)
    raw -= raw.mean(axis=0, keepdims=True)
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    means[:, :informative] = raw / norms * (separation / np.sqrt(2.0))
    if class_weights is None:
        counts = [n // n_classes] * n_classes
        for i in range(n - sum(counts)):
            counts[i] += 1
    else:
        counts = [int(round(w * n)) for w in class_weights]
        counts[-1] = n - sum(counts[:-1])
    ys = np.concatenate([np.full(c, k, dtype=np.int64)
                         for k, c in enumerate(counts)])
    X = rng.normals(n * d).reshape(n, d)
    X += means[ys]
    order = rng.permutation(n)
    return X[order], ys[order]


def benchmark_3class(seed: int = 42):
    """The fixed 3-class benchmark: n=600, d=20, 4-sigma mean separation."""
    return gaussian_blobs(600, 20, n_classes=3, separation=4.0, seed=seed)

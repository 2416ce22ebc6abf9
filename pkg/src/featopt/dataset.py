"""Labeled feature matrices, the stratified holdout split, and scaling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import Rng


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class SplitIndices:
    """Disjoint train/val/test row indices covering the whole dataset."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def as_dict(self):
        return {"train": self.train.tolist(), "val": self.val.tolist(),
                "test": self.test.tolist()}


def stratified_split(labels: np.ndarray, ratios, seed: int) -> SplitIndices:
    """Per-class floor/floor/remainder split with a seed-determined shuffle.

    Within each class of size m, train takes floor(m*r_train) samples, val
    floor(m*r_val), test the remainder; assignment follows a per-class
    permutation derived from (seed, "split", class index).
    """
    r_train, r_val, r_test = ratios
    if min(r_train, r_val, r_test) <= 0:
        raise SplitError(f"ratios must be positive, got {ratios}")
    if abs(r_train + r_val + r_test - 1.0) > 1e-9:
        raise SplitError(f"ratios must sum to 1, got sum {r_train + r_val + r_test!r}")
    labels = np.asarray(labels)
    classes = np.unique(labels)
    train, val, test = [], [], []
    root = Rng(seed)
    for c in classes:
        idx = np.flatnonzero(labels == c)
        m = len(idx)
        if m < 3:
            raise SplitError(f"class {c} has only {m} samples; need at least 3")
        rng = root.spawn("split", int(c))
        rng.shuffle(idx)
        n_train = int(m * r_train)
        n_val = int(m * r_val)
        train.append(idx[:n_train])
        val.append(idx[n_train:n_train + n_val])
        test.append(idx[n_train + n_val:])
    return SplitIndices(np.sort(np.concatenate(train)),
                        np.sort(np.concatenate(val)),
                        np.sort(np.concatenate(test)))


_STD_FLOOR = 1e-12


@dataclass(frozen=True)
class Standardizer:
    """Column-wise z-scoring fit on training rows only.

    Columns whose training stdev falls below 1e-12 are centered but not
    divided, so constant features survive without blowing up.
    """

    mean: np.ndarray
    std: np.ndarray  # 1.0 substituted where the raw stdev was degenerate

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.std


def standardize_fit(X_train: np.ndarray) -> Standardizer:
    X_train = np.asarray(X_train, dtype=np.float64)
    mean = X_train.mean(axis=0)
    std = X_train.std(axis=0)
    std = np.where(std < _STD_FLOOR, 1.0, std)
    return Standardizer(mean, std)


def standardize_apply(s: Standardizer, X: np.ndarray) -> np.ndarray:
    return s.apply(X)

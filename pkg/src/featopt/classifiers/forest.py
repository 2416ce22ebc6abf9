"""Bagged and extremely-randomized tree ensembles over the shared tree core.

Each tree draws its randomness from a child stream keyed by (seed, "tree",
index), so results are identical no matter how tree training is scheduled.
Growth itself runs through the level-synchronous batched engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._batched_forest import grow_forest


@dataclass
class ForestModel:
    trees: list
    n_classes: int
    n_features: int
    bootstrap: bool

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        votes = np.zeros((X.shape[0], self.n_classes), dtype=np.int64)
        for tree in self.trees:
            pred = np.argmax(tree.leaf_dist(X), axis=1)
            votes[np.arange(X.shape[0]), pred] += 1
        return np.argmax(votes, axis=1)  # tie -> smallest class index

    def feature_importance(self) -> np.ndarray:
        """Mean impurity decrease, normalized to sum 1 when any split exists."""
        total = np.zeros(self.n_features)
        for tree in self.trees:
            total += tree.feature_gain_sums(weighted=True)
        if self.trees:
            total /= len(self.trees)
        s = total.sum()
        return total / s if s > 0 else total


def fit_forest(X, y, trees: int = 300, max_depth=None, min_leaf: int = 1,
               bootstrap: bool = True, seed: int = 0, n_classes=None,
               feature_subset_size=None) -> ForestModel:
    """bootstrap=True gives the bagged forest (exhaustive thresholds);
    bootstrap=False gives extra-trees (full sample, random thresholds)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n, d = X.shape
    K = int(n_classes if n_classes is not None else y.max() + 1)
    if feature_subset_size is None:
        feature_subset_size = max(1, math.isqrt(d) + (0 if math.isqrt(d) ** 2 == d else 1))
    mode = "exhaustive" if bootstrap else "random"
    grown = grow_forest(X, y, trees, bootstrap, feature_subset_size, mode,
                        min_leaf, max_depth, seed, K)
    return ForestModel(grown, K, d, bootstrap)

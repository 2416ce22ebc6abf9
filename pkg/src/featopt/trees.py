"""Binary decision trees with Gini splitting, exhaustive or random thresholds.

The grower is vectorized per node: candidate features are evaluated with a
handful of numpy operations on (rows x features) slices, which keeps a
300-tree forest on a few hundred samples in the tens of milliseconds.

Determinism rules: candidate features are scanned in ascending index order,
thresholds in ascending value order, and a new best split must strictly
improve on the incumbent, so ties resolve to the smallest feature index and
then the smallest threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import Rng

LEAF = -1


def route_to_leaves(feature, threshold, left, right, X) -> np.ndarray:
    """Walk rows of X down a flat-array tree; returns each row's leaf index."""
    node = np.zeros(X.shape[0], dtype=np.int32)
    active = np.flatnonzero(feature[node] != LEAF)
    while active.size:
        nd = node[active]
        go_left = X[active, feature[nd]] <= threshold[nd]
        node[active] = np.where(go_left, left[nd], right[nd])
        active = active[feature[node[active]] != LEAF]
    return node


@dataclass
class DecisionTree:
    """Flat-array tree; `feature == -1` marks leaves.

    `gain` holds each internal node's Gini impurity decrease and `n_node`
    its training row count, which together feed importance aggregation.
    """

    feature: np.ndarray    # int32, LEAF for leaf nodes
    threshold: np.ndarray  # float64
    left: np.ndarray       # int32
    right: np.ndarray      # int32
    dist: np.ndarray       # (n_nodes, K) leaf class distributions
    gain: np.ndarray       # float64 per-node impurity decrease (0 at leaves)
    n_node: np.ndarray     # int64 training rows that reached the node
    n_features: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def leaf_dist(self, X: np.ndarray) -> np.ndarray:
        """Route rows to leaves; returns (n, K) class distributions."""
        node = route_to_leaves(self.feature, self.threshold, self.left,
                               self.right, X)
        return self.dist[node]

    def feature_gain_sums(self, weighted: bool = True) -> np.ndarray:
        """Total impurity decrease per feature over the tree's splits."""
        out = np.zeros(self.n_features)
        internal = self.feature != LEAF
        if not internal.any():
            return out
        w = self.n_node[internal] / self.n_node[0] if weighted else 1.0
        np.add.at(out, self.feature[internal], self.gain[internal] * w)
        return out


class _UniformBuffer:
    """Bulk-refilled view of an Rng's uniform stream (same draw order)."""

    def __init__(self, rng: Rng, chunk: int = 4096):
        self._rng = rng
        self._chunk = chunk
        self._buf = np.empty(0)
        self._pos = 0

    def take(self, k: int) -> np.ndarray:
        if self._pos + k > self._buf.size:
            self._buf = self._rng.uniforms(max(self._chunk, k))
            self._pos = 0
        out = self._buf[self._pos:self._pos + k]
        self._pos += k
        return out


def grow_tree(X, y, row_idx, criterion="gini", feature_subset_size=None,
              threshold_mode="exhaustive", min_leaf=1, max_depth=None,
              rng: Rng | None = None, n_classes=None) -> DecisionTree:
    """Grow one classification tree on X[row_idx].

    threshold_mode "exhaustive" scans midpoints between consecutive distinct
    values; "random" draws one uniform threshold per candidate feature.
    Growth stops on purity, min_leaf, or max_depth; a pure input yields a
    single leaf.
    """
    if criterion != "gini":
        raise ValueError(f"unsupported criterion {criterion!r}")
    if threshold_mode not in ("exhaustive", "random"):
        raise ValueError(f"unknown threshold_mode {threshold_mode!r}")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    row_idx = np.asarray(row_idx, dtype=np.int64)
    if row_idx.size == 0:
        raise ValueError("row_idx must be non-empty")
    n, d = X.shape
    K = int(n_classes if n_classes is not None else y.max() + 1)
    m = d if feature_subset_size is None else min(int(feature_subset_size), d)
    rng = rng or Rng(0)
    random_mode = threshold_mode == "random"
    YH = np.equal.outer(y, np.arange(K)).astype(np.float64)  # (n, K)
    all_feats = np.arange(d)
    # independent child streams so draws can be buffered in bulk
    ubuf_feat = _UniformBuffer(rng.spawn("feats"))
    ubuf_thresh = _UniformBuffer(rng.spawn("thresholds"))

    feature, threshold, left, right = [], [], [], []
    dist, gain, n_node = [], [], []

    def new_node(counts, n_r):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        dist.append(counts / n_r)
        gain.append(0.0)
        n_node.append(n_r)
        return len(feature) - 1

    def pick_feats():
        if m >= d:
            return all_feats
        pool = all_feats.copy()
        u = ubuf_feat.take(m)
        for i in range(m):
            j = i + int(u[i] * (d - i))
            pool[i], pool[j] = pool[j], pool[i]
        return np.sort(pool[:m])

    root_counts = YH[row_idx].sum(axis=0)
    root = new_node(root_counts, row_idx.size)
    stack = [(root, row_idx, 0, root_counts)]
    while stack:
        nid, rows, depth, counts = stack.pop()
        n_r = rows.size
        if (counts.max() == n_r or n_r < 2 * min_leaf
                or (max_depth is not None and depth >= max_depth)):
            continue
        feats = pick_feats()
        sub = X[rows[:, None], feats[None, :]]                 # (n_r, m)
        parent_sq = float(counts @ counts)

        if random_mode:
            lo = sub.min(axis=0)
            hi = sub.max(axis=0)
            u = ubuf_thresh.take(m)
            usable = hi > lo
            t = lo + u * (hi - lo)
            left_mask = sub <= t
            lc = left_mask.T.astype(np.float64) @ YH[rows]     # (m, K)
            rc = counts - lc
            ln = lc.sum(axis=1)
            rn = n_r - ln
            valid = usable & (ln >= min_leaf) & (rn >= min_leaf)
            if not valid.any():
                continue
            ln[~valid] = 1.0  # dodge 0/0; masked out below
            rn[~valid] = 1.0
            s = (lc * lc).sum(1) / ln + (rc * rc).sum(1) / rn
            s[~valid] = -np.inf
            col = int(np.argmax(s))
            split_gain = (s[col] - parent_sq / n_r) / n_r
            # extra-trees keep splitting while a structurally valid candidate
            # exists, even at zero gain, so impure nodes always come apart.
            thr = float(t[col])
            go_left = left_mask[:, col]
        else:
            order = np.argsort(sub, axis=0, kind="stable")
            sval = np.take_along_axis(sub, order, axis=0)
            oh = YH[rows[order]]                               # (n_r, m, K)
            cum = oh.cumsum(axis=0)
            L = cum[:-1]
            R = counts - L
            ln = np.arange(1, n_r, dtype=np.float64)[:, None]
            rn = n_r - ln
            s = (L * L).sum(axis=2) / ln + (R * R).sum(axis=2) / rn
            valid = sval[1:] > sval[:-1]
            if min_leaf > 1:
                valid &= (ln >= min_leaf) & (rn >= min_leaf)
            s[~valid] = -np.inf
            pos = np.argmax(s, axis=0)
            col_s = s[pos, np.arange(m)]
            col = int(np.argmax(col_s))
            best_s = col_s[col]
            split_gain = (best_s - parent_sq / n_r) / n_r
            if not np.isfinite(best_s) or split_gain <= 0.0:
                continue
            p = pos[col]
            thr = float((sval[p, col] + sval[p + 1, col]) / 2.0)
            go_left = np.zeros(n_r, dtype=bool)
            go_left[order[:p + 1, col]] = True

        left_rows = rows[go_left]
        right_rows = rows[~go_left]
        lcounts = YH[left_rows].sum(axis=0)
        rcounts = counts - lcounts
        lid = new_node(lcounts, left_rows.size)
        rid = new_node(rcounts, right_rows.size)
        feature[nid] = int(feats[col])
        threshold[nid] = thr
        left[nid] = lid
        right[nid] = rid
        gain[nid] = max(split_gain, 0.0)
        stack.append((rid, right_rows, depth + 1, rcounts))
        stack.append((lid, left_rows, depth + 1, lcounts))

    return DecisionTree(
        np.asarray(feature, dtype=np.int32),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int32),
        np.asarray(right, dtype=np.int32),
        np.asarray(dist, dtype=np.float64),
        np.asarray(gain, dtype=np.float64),
        np.asarray(n_node, dtype=np.int64),
        n_features=d,
    )

"""Gradient-boosted trees on softmax gradients with 256-bin histograms.

Stages are fitted on the multiclass cross-entropy's first and second
derivatives; each stage grows one regression tree per class, leaf-wise,
until max-leaves or no positive gain remains. Split gain uses the usual
second-order formula with L2 smoothing, and every accepted split's gain is
accumulated per feature for importance reporting.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from ..trees import LEAF, route_to_leaves
from .linear import softmax

MAX_BINS = 256
LAMBDA = 1.0
MIN_HESS = 1e-3
MIN_DATA = 20    # rows per leaf, matching the reference boosting library
SMALL_LEAF = 64  # below this row count, scan sorted codes instead of bins


def make_bins(X: np.ndarray, max_bins: int = MAX_BINS):
    """Per-feature bin edges (rank-based) and uint8 codes for training rows.

    Features with few distinct values get exact midpoint edges; wide ones
    get quantile edges chosen at actual data values, so bin membership is
    invariant under strictly monotone transforms.
    """
    n, d = X.shape
    edges = []
    for j in range(d):
        u = np.unique(X[:, j])
        if u.size <= max_bins:
            e = (u[:-1] + u[1:]) / 2.0
        else:
            qs = np.quantile(X[:, j], np.arange(1, max_bins) / max_bins,
                             method="lower")
            e = np.unique(qs)
        edges.append(e)
    codes = np.empty((n, d), dtype=np.uint8)
    for j in range(d):
        codes[:, j] = np.searchsorted(edges[j], X[:, j], side="left")
    return edges, codes


@dataclass
class GbdtTree:
    feature: np.ndarray    # int32, LEAF at leaves
    threshold: np.ndarray  # float64 (edge values)
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray      # float64, learning-rate-scaled leaf outputs

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[route_to_leaves(self.feature, self.threshold,
                                          self.left, self.right, X)]


class _TreeBuilder:
    def __init__(self, edges, n_edges, codes, bin_ok, offsets, n_bins,
                 max_leaves, lr, feat_gain):
        self.edges = edges
        self.n_edges = n_edges
        self.codes = codes
        self.bin_ok = bin_ok        # (d, n_bins-1) bool: bin index < n_edges
        self.offsets = offsets
        self.n_bins = n_bins
        self.max_leaves = max_leaves
        self.lr = lr
        self.feat_gain = feat_gain
        self.d = len(edges)
        self.feature, self.threshold = [], []
        self.left, self.right, self.value = [], [], []
        self.row_updates = []  # (rows, leaf value) pairs for the train update

    def _new_node(self):
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(0.0)
        return len(self.feature) - 1

    def _hist(self, rows, g, h):
        nb = self.n_bins
        flat = (self.codes[rows].astype(np.int64) + self.offsets).ravel()
        G = np.bincount(flat, weights=np.repeat(g[rows], self.d),
                        minlength=self.d * nb).reshape(self.d, nb)
        H = np.bincount(flat, weights=np.repeat(h[rows], self.d),
                        minlength=self.d * nb).reshape(self.d, nb)
        C = np.bincount(flat, minlength=self.d * nb).reshape(self.d, nb)
        return G, H, C

    def _best_split(self, G, H, C, n_rows, gtot, htot):
        # left prefix = bins 0..b; never splits after the last bin.
        GL = G[:, :-1].cumsum(axis=1)
        HL = H[:, :-1].cumsum(axis=1)
        CL = C[:, :-1].cumsum(axis=1)
        GR = gtot - GL
        HR = htot - HL
        gain = GL * GL / (HL + LAMBDA) + GR * GR / (HR + LAMBDA)
        gain[~(self.bin_ok & (HL >= MIN_HESS) & (HR >= MIN_HESS)
               & (CL >= MIN_DATA) & (n_rows - CL >= MIN_DATA))] = -np.inf
        idx = int(np.argmax(gain))  # row-major: smallest feature, then bin
        f, b = divmod(idx, self.n_bins - 1)
        best = 0.5 * (gain[f, b] - gtot * gtot / (htot + LAMBDA))
        return float(best), f, b

    def _best_split_small(self, rows, g, h, gtot, htot):
        """Sorted-scan split for small leaves; picks the same (feature, bin)
        as the histogram scan: the smallest bin of the best partition."""
        r = rows.size
        sc = self.codes[rows].astype(np.int16)          # (r, d)
        order = np.argsort(sc, axis=0, kind="stable")
        sc = np.take_along_axis(sc, order, axis=0)
        gh = np.column_stack((g[rows], h[rows]))[order].cumsum(axis=0)
        gs = gh[:-1, :, 0]                               # prefix sums per feature
        hs = gh[:-1, :, 1]
        gr = gtot - gs
        hr = htot - hs
        gain = gs * gs / (hs + LAMBDA) + gr * gr / (hr + LAMBDA)
        cut_bin = sc[:-1]
        left_n = np.arange(1, r)[:, None]
        valid = ((sc[1:] > cut_bin) & (cut_bin < self.n_edges[None, :])
                 & (hs >= MIN_HESS) & (hr >= MIN_HESS)
                 & (left_n >= MIN_DATA) & (r - left_n >= MIN_DATA))
        gain[~valid] = -np.inf
        # column-major argmax keeps "smallest feature, then smallest bin"
        idx = int(np.argmax(gain.T))
        f, p = divmod(idx, gain.shape[0])
        best = 0.5 * (gain[p, f] - gtot * gtot / (htot + LAMBDA))
        return float(best), f, int(cut_bin[p, f])

    def _eval_leaf(self, rows, g, h, gtot, htot, G, H, C):
        # a leaf too small to yield two MIN_DATA children, or whose hessian
        # mass is exhausted, can never split; skipping the eval entirely
        # keeps late boosting stages cheap
        if rows.size < 2 * MIN_DATA or htot < 2.0 * MIN_HESS:
            return -np.inf, 0, 0
        if G is not None:
            return self._best_split(G, H, C, rows.size, gtot, htot)
        return self._best_split_small(rows, g, h, gtot, htot)

    def build(self, rows, g, h):
        root = self._new_node()
        gtot, htot = float(g[rows].sum()), float(h[rows].sum())
        needs_hist = rows.size > SMALL_LEAF and htot >= 2.0 * MIN_HESS
        G, H, C = self._hist(rows, g, h) if needs_hist else (None, None, None)
        leaves = {root: (rows, gtot, htot)}
        heap = []
        counter = 0
        gain, f, b = self._eval_leaf(rows, g, h, gtot, htot, G, H, C)
        if gain > 0.0:
            heapq.heappush(heap, (-gain, counter, root, f, b, G, H, C))
            counter += 1
        n_leaves = 1
        while heap and n_leaves < self.max_leaves:
            neg_gain, _, nid, f, b, G, H, C = heapq.heappop(heap)
            rows_n, ngtot, nhtot = leaves.pop(nid)
            go_left = self.codes[rows_n, f] <= b
            lrows, rrows = rows_n[go_left], rows_n[~go_left]
            lid, rid = self._new_node(), self._new_node()
            self.feature[nid] = f
            self.threshold[nid] = float(self.edges[f][b])
            self.left[nid], self.right[nid] = lid, rid
            self.feat_gain[f] += -neg_gain
            n_leaves += 1
            lg, lh = float(g[lrows].sum()), float(h[lrows].sum())
            rg, rh = ngtot - lg, nhtot - lh
            # lazy histograms: a child needs one only if it is big enough to
            # use the binned scan and can still be split at all
            lneed = (lrows.size > SMALL_LEAF and lh >= 2.0 * MIN_HESS
                     and lrows.size >= 2 * MIN_DATA)
            rneed = (rrows.size > SMALL_LEAF and rh >= 2.0 * MIN_HESS
                     and rrows.size >= 2 * MIN_DATA)
            Gl = Hl = Cl = Gr = Hr = Cr = None
            if (lneed or rneed) and G is not None:
                if lrows.size <= rrows.size:
                    Gl, Hl, Cl = self._hist(lrows, g, h)
                    if rneed:
                        Gr, Hr, Cr = G - Gl, H - Hl, C - Cl
                    if not lneed:
                        Gl = Hl = Cl = None
                else:
                    Gr, Hr, Cr = self._hist(rrows, g, h)
                    if lneed:
                        Gl, Hl, Cl = G - Gr, H - Hr, C - Cr
                    if not rneed:
                        Gr = Hr = Cr = None
            for cid, crows, cg, ch, cG, cH, cC in (
                    (lid, lrows, lg, lh, Gl, Hl, Cl),
                    (rid, rrows, rg, rh, Gr, Hr, Cr)):
                leaves[cid] = (crows, cg, ch)
                cgain, cf, cb = self._eval_leaf(crows, g, h, cg, ch, cG, cH, cC)
                if cgain > 0.0:
                    heapq.heappush(heap, (-cgain, counter, cid, cf, cb,
                                          cG, cH, cC))
                    counter += 1
        for nid, (rows_n, gtot_n, htot_n) in leaves.items():
            val = -self.lr * gtot_n / (htot_n + LAMBDA)
            self.value[nid] = val
            self.row_updates.append((rows_n, val))
        return GbdtTree(np.asarray(self.feature, dtype=np.int32),
                        np.asarray(self.threshold, dtype=np.float64),
                        np.asarray(self.left, dtype=np.int32),
                        np.asarray(self.right, dtype=np.int32),
                        np.asarray(self.value, dtype=np.float64))


@dataclass
class GbdtModel:
    stages: list           # list of lists: one GbdtTree per class per stage
    n_classes: int
    n_features: int
    feat_gain: np.ndarray
    train_loss: list = field(default_factory=list, compare=False)

    def raw_scores(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        F = np.zeros((X.shape[0], self.n_classes))
        for stage in self.stages:
            for c, tree in enumerate(stage):
                F[:, c] += tree.predict_value(X)
        return F

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.raw_scores(X), axis=1)

    def feature_gain(self) -> np.ndarray:
        """Total split gain per feature across all stages and class trees."""
        return self.feat_gain.copy()


def fit_gbdt(X, y, trees: int = 300, leaves: int = 31, lr: float = 0.1,
             n_classes=None) -> GbdtModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n, d = X.shape
    K = int(n_classes if n_classes is not None else y.max() + 1)
    Y = np.equal.outer(y, np.arange(K)).astype(np.float64)
    edges, codes = make_bins(X)
    n_edges = np.array([len(e) for e in edges], dtype=np.int64)
    n_bins = max(int(n_edges.max()) + 1 if d else 1, 2)
    bin_ok = np.arange(n_bins - 1)[None, :] < n_edges[:, None]
    offsets = (np.arange(d, dtype=np.int64) * n_bins)[None, :]
    codes = np.minimum(codes, n_bins - 1).astype(np.uint8)
    all_rows = np.arange(n)
    feat_gain = np.zeros(d)
    F = np.zeros((n, K))
    stages = []
    loss_hist = []

    def ce_loss():
        P = softmax(F)
        return float(-np.log(np.clip((P * Y).sum(axis=1), 1e-300, None)).mean())

    loss_hist.append(ce_loss())
    for _ in range(int(trees)):
        P = softmax(F)
        stage = []
        for c in range(K):
            g = P[:, c] - Y[:, c]
            h = np.maximum(P[:, c] * (1.0 - P[:, c]), 1e-16)
            builder = _TreeBuilder(edges, n_edges, codes, bin_ok, offsets,
                                   n_bins, int(leaves), float(lr), feat_gain)
            tree = builder.build(all_rows, g, h)
            for rows_u, val in builder.row_updates:
                F[rows_u, c] += val
            stage.append(tree)
        stages.append(stage)
        loss_hist.append(ce_loss())
    return GbdtModel(stages, K, d, feat_gain, train_loss=loss_hist)

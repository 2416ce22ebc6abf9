"""Level-synchronous forest growth, vectorized across every tree at once.

All trees advance one depth level per step; the per-node work (candidate
feature draws, threshold scoring, partitioning) is batched into a handful
of numpy operations over the concatenation of all live (tree, node) groups.
Split semantics are identical to trees.grow_tree: Gini criterion, ties to
the smallest feature index then smallest threshold, identical stopping
rules. Per-node randomness is counter-based: each node carries a 64-bit
stream base derived from its tree seed and its path from the root, so
results do not depend on growth order or thread count.
"""

from __future__ import annotations

import numpy as np

from ..rng import GOLDEN, Rng, hash64
from ..trees import DecisionTree, LEAF

_U64 = np.uint64
_SALT_ROOT = 0x8BB84B93962EACC9
_SALT_LEFT = 0x2545F4914F6CDD1D
_SALT_RIGHT = 0xD1342543DE82EF95
_M1 = _U64(0xBF58476D1CE4E5B9)
_M2 = _U64(0x94D049BB133111EB)


def _mix_vec(z):
    z = (z ^ (z >> _U64(30))) * _M1
    z = (z ^ (z >> _U64(27))) * _M2
    return z ^ (z >> _U64(31))


def _node_uniforms(base: np.ndarray, j0: int, count: int) -> np.ndarray:
    """count uniforms per node stream, columns j0..j0+count-1; shape (G, count)."""
    ks = (_U64(GOLDEN) * np.arange(j0 + 1, j0 + count + 1, dtype=_U64))[None, :]
    bits = _mix_vec(base[:, None] + ks)
    return (bits >> _U64(11)).astype(np.float64) * 2.0 ** -53


class _TreeAccum:
    """Flat-array tree under construction."""

    __slots__ = ("feature", "threshold", "left", "right", "dist", "gain", "n_node")

    def __init__(self):
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.dist = []
        self.gain = []
        self.n_node = []

    def add_node(self, dist, size):
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.dist.append(dist)
        self.gain.append(0.0)
        self.n_node.append(size)
        return len(self.feature) - 1

    def finish(self, d: int) -> DecisionTree:
        return DecisionTree(
            np.asarray(self.feature, dtype=np.int32),
            np.asarray(self.threshold, dtype=np.float64),
            np.asarray(self.left, dtype=np.int32),
            np.asarray(self.right, dtype=np.int32),
            np.asarray(self.dist, dtype=np.float64),
            np.asarray(self.gain, dtype=np.float64),
            np.asarray(self.n_node, dtype=np.int64),
            n_features=d,
        )


def grow_forest(X, y, n_trees, bootstrap, feature_subset_size, threshold_mode,
                min_leaf, max_depth, seed, n_classes) -> list:
    """Grow n_trees trees level-by-level; returns a list of DecisionTrees."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n, d = X.shape
    K = int(n_classes)
    m = min(int(feature_subset_size), d)
    random_mode = threshold_mode == "random"
    if n_trees < 1:
        return []
    accum = [_TreeAccum() for _ in range(n_trees)]

    # per-tree root rows, exactly one child stream per tree
    tree_seeds = np.empty(n_trees, dtype=_U64)
    inst_row_parts = []
    for t in range(n_trees):
        child = Rng(hash64(seed, "tree", t))
        tree_seeds[t] = _U64(child.seed)
        rows = child.randints(n, n) if bootstrap else np.arange(n)
        inst_row_parts.append(rows)
    inst_row = np.concatenate(inst_row_parts)

    YH = np.equal.outer(y, np.arange(K)).astype(np.float64)

    # level state: instances grouped contiguously; one entry per group
    g_tree = np.arange(n_trees)
    g_size = np.full(n_trees, n, dtype=np.int64)
    g_base = _mix_vec(tree_seeds ^ _U64(_SALT_ROOT))
    g_counts = np.add.reduceat(YH[inst_row], np.arange(0, n_trees * n, n), axis=0)
    g_node = np.array([accum[t].add_node(g_counts[t] / n, n)
                       for t in range(n_trees)], dtype=np.int64)

    depth = 0
    while g_size.size:
        G = g_size.size
        starts = np.concatenate(([0], np.cumsum(g_size)))[:-1]
        sizes = g_size
        # stopping rules identical to the single-tree grower
        pure = g_counts.max(axis=1) == sizes
        stop = pure | (sizes < 2 * min_leaf)
        if max_depth is not None and depth >= max_depth:
            stop[:] = True
        active = ~stop
        if not active.any():
            break
        # compact to active groups
        inst_keep = np.repeat(active, sizes)
        inst_row = inst_row[inst_keep]
        g_tree, g_size, g_base = g_tree[active], g_size[active], g_base[active]
        g_counts, g_node = g_counts[active], g_node[active]
        sizes = g_size
        Ga = sizes.size
        starts = np.concatenate(([0], np.cumsum(sizes)))[:-1]
        Na = inst_row.size
        inst_gidx = np.repeat(np.arange(Ga), sizes)

        # candidate features: partial Fisher-Yates per group, then sorted
        if m < d:
            u_feat = _node_uniforms(g_base, 0, m)
            pool = np.broadcast_to(np.arange(d), (Ga, d)).copy()
            rows_ix = np.arange(Ga)
            for i in range(m):
                j = i + (u_feat[:, i] * (d - i)).astype(np.int64)
                pi, pj = pool[rows_ix, i].copy(), pool[rows_ix, j]
                pool[rows_ix, i] = pj
                pool[rows_ix, j] = pi
            feats = np.sort(pool[:, :m], axis=1)
        else:
            feats = np.broadcast_to(np.arange(d), (Ga, d))

        V = X[inst_row[:, None], feats[inst_gidx]]            # (Na, m)
        y_inst = y[inst_row]
        parent_sq = (g_counts * g_counts).sum(axis=1)

        if random_mode:
            lo = np.minimum.reduceat(V, starts, axis=0)
            hi = np.maximum.reduceat(V, starts, axis=0)
            u_thr = _node_uniforms(g_base, m, m)
            usable = hi > lo
            thr_cand = lo + u_thr * (hi - lo)
            left_mask = V <= thr_cand[inst_gidx]
            keys = ((inst_gidx * m)[:, None] + np.arange(m)) * K + y_inst[:, None]
            lc = np.bincount(keys.ravel(), weights=left_mask.ravel().astype(np.float64),
                             minlength=Ga * m * K).reshape(Ga, m, K)
            rc = g_counts[:, None, :] - lc
            ln = lc.sum(axis=2)
            rn = sizes[:, None] - ln
            valid = usable & (ln >= min_leaf) & (rn >= min_leaf)
            s = ((lc * lc).sum(2) / np.maximum(ln, 1e-300)
                 + (rc * rc).sum(2) / np.maximum(rn, 1e-300))
            s[~valid] = -np.inf
            col = np.argmax(s, axis=1)
            best_s = s[np.arange(Ga), col]
            split_ok = np.isfinite(best_s)
            thr = thr_cand[np.arange(Ga), col]
            side_left = left_mask[np.arange(Na), col[inst_gidx]]
        else:
            seg = (inst_gidx[:, None] * m + np.arange(m)).ravel()
            vflat = V.ravel()
            order = np.lexsort((vflat, seg))
            sv = vflat[order]
            oh = YH[np.broadcast_to(inst_row[:, None], (Na, m)).ravel()[order]]
            cum = oh.cumsum(axis=0)
            S = Ga * m
            seg_sizes = np.repeat(sizes, m)
            seg_starts = np.concatenate(([0], np.cumsum(seg_sizes)))[:-1]
            seg_of_pos = np.repeat(np.arange(S), seg_sizes)
            base_cum = np.concatenate((np.zeros((1, K)), cum))[seg_starts]
            LC = cum - base_cum[seg_of_pos]                   # prefix incl pos
            pos_in_seg = np.arange(Na * m) - seg_starts[seg_of_pos]
            ln = pos_in_seg + 1.0
            rn = seg_sizes[seg_of_pos] - ln
            seg_counts = g_counts[:, None, :].repeat(m, axis=1).reshape(S, K)
            RC = seg_counts[seg_of_pos] - LC
            last_in_seg = ln == seg_sizes[seg_of_pos]
            nxt = np.empty_like(sv)
            nxt[:-1] = sv[1:]
            nxt[-1] = 0.0
            cand = ~last_in_seg & (nxt > sv) & (ln >= min_leaf) & (rn >= min_leaf)
            s = ((LC * LC).sum(1) / ln
                 + (RC * RC).sum(1) / np.maximum(rn, 1e-300))
            s[~cand] = -np.inf
            segmax = np.maximum.reduceat(s, seg_starts)
            pos_global = np.arange(Na * m)
            first_at_max = np.where(s == segmax[seg_of_pos], pos_global, Na * m)
            best_pos = np.minimum.reduceat(first_at_max, seg_starts)
            seg_score = np.where(best_pos < Na * m, segmax, -np.inf).reshape(Ga, m)
            col = np.argmax(seg_score, axis=1)
            best_s = seg_score[np.arange(Ga), col]
            gain_vec = (best_s - parent_sq / sizes) / sizes
            split_ok = np.isfinite(best_s) & (gain_vec > 0.0)
            bp = best_pos.reshape(Ga, m)[np.arange(Ga), col]
            bp_safe = np.minimum(bp, Na * m - 2)
            thr = (sv[bp_safe] + sv[bp_safe + 1]) / 2.0
            chosen_feat = feats[np.arange(Ga), col]
            side_left = (X[inst_row, chosen_feat[inst_gidx]] <= thr[inst_gidx])

        gain_vec = np.maximum((best_s - parent_sq / sizes) / sizes, 0.0)

        # groups that cannot split become leaves now
        if not split_ok.all():
            inst_keep = np.repeat(split_ok, sizes)
            inst_row = inst_row[inst_keep]
            side_left = side_left[inst_keep]
            g_tree, g_size, g_base = g_tree[split_ok], g_size[split_ok], g_base[split_ok]
            g_counts, g_node = g_counts[split_ok], g_node[split_ok]
            feats_col = feats[np.arange(Ga), col][split_ok]
            thr = thr[split_ok]
            gain_vec = gain_vec[split_ok]
            sizes = g_size
            Ga = sizes.size
            starts = np.concatenate(([0], np.cumsum(sizes)))[:-1]
            inst_gidx = np.repeat(np.arange(Ga), sizes)
        else:
            feats_col = feats[np.arange(Ga), col]
        if Ga == 0:
            break

        # stable partition: reorder instances by (group, side)
        new_key = inst_gidx * 2 + (~side_left)
        order = np.argsort(new_key, kind="stable")
        inst_row = inst_row[order]
        child_sizes = np.bincount(new_key, minlength=2 * Ga)
        child_starts = np.concatenate(([0], np.cumsum(child_sizes)))[:-1]
        child_counts = np.add.reduceat(YH[inst_row], child_starts, axis=0)
        lcounts, rcounts = child_counts[0::2], child_counts[1::2]
        lsizes, rsizes = child_sizes[0::2], child_sizes[1::2]

        # record splits and allocate children (python loop over groups only)
        new_node = np.empty(2 * Ga, dtype=np.int64)
        for gi in range(Ga):
            acc = accum[g_tree[gi]]
            nid = g_node[gi]
            lid = acc.add_node(lcounts[gi] / lsizes[gi], int(lsizes[gi]))
            rid = acc.add_node(rcounts[gi] / rsizes[gi], int(rsizes[gi]))
            acc.feature[nid] = int(feats_col[gi])
            acc.threshold[nid] = float(thr[gi])
            acc.left[nid] = lid
            acc.right[nid] = rid
            acc.gain[nid] = float(gain_vec[gi])
            new_node[2 * gi] = lid
            new_node[2 * gi + 1] = rid

        g_tree = np.repeat(g_tree, 2)
        g_size = child_sizes
        lbase = _mix_vec(g_base + _U64(_SALT_LEFT))
        rbase = _mix_vec(g_base + _U64(_SALT_RIGHT))
        g_base = np.stack((lbase, rbase), axis=1).ravel()
        g_counts = child_counts
        g_node = new_node
        depth += 1

    return [acc.finish(d) for acc in accum]

"""Embedded feature ranking (boosting gain, bagging Gini, L1 magnitudes).

Rankings order features by score descending with ties broken by ascending
index, so `order` is a deterministic function of `scores`. Subset sizes use
the exact ceil rule computed in rational arithmetic, which reproduces every
published dimension table without float edge cases.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import classifiers as clf
from .classifiers.linear import softmax

SELECTOR_METHODS = ("gbdt", "rf", "lasso")

# fixed selector settings; classifiers are tuned, selectors are not
GBDT_SELECTOR = {"trees": 300, "leaves": 31, "lr": 0.1}
RF_SELECTOR = {"trees": 300, "max_depth": None, "min_leaf": 1}
LASSO_GRID = (1e-3, 1e-2, 1e-1, 1.0, 10.0)  # times lambda_max/10


@dataclass(frozen=True)
class ImportanceRanking:
    method: str
    scores: np.ndarray
    order: np.ndarray
    converged: bool = True

    def __post_init__(self):
        if self.method not in SELECTOR_METHODS:
            raise ValueError(f"unknown selector method {self.method!r}")


def _order_from_scores(scores: np.ndarray) -> np.ndarray:
    # descending score, ties by ascending index: sort on (-score, index)
    return np.lexsort((np.arange(scores.size), -scores))


def make_ranking(method: str, scores: np.ndarray, converged: bool = True) -> ImportanceRanking:
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise ValueError("importance scores must be finite")
    return ImportanceRanking(method, scores, _order_from_scores(scores), converged)


def rank_by_gbdt(X, y, params: dict | None = None, seed: int = 0) -> ImportanceRanking:
    model = clf.fit("gbdt", X, y, {**GBDT_SELECTOR, **(params or {})}, seed=seed)
    return make_ranking("gbdt", clf.gbdt_feature_gain(model))


def rank_by_rf(X, y, params: dict | None = None, seed: int = 0) -> ImportanceRanking:
    model = clf.fit("rf", X, y, {**RF_SELECTOR, **(params or {})}, seed=seed)
    return make_ranking("rf", clf.rf_feature_importance(model))


# --- L1-penalized multinomial logistic regression ----------------------------

@dataclass(frozen=True)
class LassoParams:
    lam: float
    max_iter: int = 500
    tol: float = 1e-6

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")


@dataclass
class LassoFit:
    W: np.ndarray           # (K, d)
    b: np.ndarray           # (K,)
    converged: bool
    objective_history: list

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(X @ self.W.T + self.b, axis=1)


def _smooth_loss_grad(W, b, X, Y):
    n = X.shape[0]
    P = softmax(X @ W.T + b)
    loss = -np.log(np.clip((P * Y).sum(axis=1), 1e-300, None)).mean()
    D = (P - Y) / n
    return loss, D.T @ X, D.sum(axis=0)


def lasso_lambda_max(X, y, n_classes=None) -> float:
    """Smallest L1 strength that zeroes the whole weight matrix.

    With weights pinned at zero the intercepts optimize to log class priors;
    the stationarity condition then bounds lambda by the max-abs entry of
    the smooth gradient at that point.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    K = int(n_classes if n_classes is not None else y.max() + 1)
    n = X.shape[0]
    Y = np.equal.outer(y, np.arange(K)).astype(np.float64)
    priors = Y.mean(axis=0)
    P = np.broadcast_to(priors, (n, K))
    gW = (P - Y).T @ X / n
    return float(np.abs(gW).max())


def fit_lasso(X, y, params: LassoParams, n_classes=None) -> LassoFit:
    """Proximal gradient descent (ISTA) with backtracking line search.

    The intercept is unpenalized. Each accepted step cannot increase the
    penalized objective; convergence is declared when the parameter change
    reaches tol in the infinity norm.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n, d = X.shape
    K = int(n_classes if n_classes is not None else y.max() + 1)
    Y = np.equal.outer(y, np.arange(K)).astype(np.float64)
    lam = params.lam

    W = np.zeros((K, d))
    b = np.zeros(K)
    L = 1.0
    loss, gW, gb = _smooth_loss_grad(W, b, X, Y)
    history = [loss + lam * np.abs(W).sum()]
    converged = False
    for _ in range(params.max_iter):
        while True:
            Wn = W - gW / L
            Wn = np.sign(Wn) * np.maximum(np.abs(Wn) - lam / L, 0.0)
            bn = b - gb / L
            loss_n, gWn, gbn = _smooth_loss_grad(Wn, bn, X, Y)
            dW = Wn - W
            db = bn - b
            quad = (loss + (gW * dW).sum() + (gb * db).sum()
                    + 0.5 * L * ((dW ** 2).sum() + (db ** 2).sum()))
            if loss_n <= quad + 1e-12 or L > 1e15:
                break
            L *= 2.0
        step = max(np.abs(dW).max() if dW.size else 0.0, np.abs(db).max())
        W, b, loss, gW, gb = Wn, bn, loss_n, gWn, gbn
        history.append(loss + lam * np.abs(W).sum())
        if step <= params.tol:
            converged = True
            break
        L = max(L * 0.9, 1e-6)
    return LassoFit(W, b, converged, history)


def rank_by_lasso(X, y, params: LassoParams, n_classes=None) -> ImportanceRanking:
    """Score per feature: max over classes of the absolute L1-fit weight."""
    fit = fit_lasso(X, y, params, n_classes=n_classes)
    scores = np.abs(fit.W).max(axis=0)
    return make_ranking("lasso", scores, converged=fit.converged)


def select_lasso_lambda(X_train, y_train, X_val, y_val, n_classes=None,
                        grid=LASSO_GRID):
    """Pick lambda from the fixed grid by validation accuracy (ties: first)."""
    lam_max = lasso_lambda_max(X_train, y_train, n_classes=n_classes)
    best = None
    for mult in grid:
        lam = mult * lam_max / 10.0
        fit = fit_lasso(X_train, y_train, LassoParams(lam), n_classes=n_classes)
        acc = float((fit.predict(X_val) == y_val).mean())
        if best is None or acc > best[0]:
            best = (acc, lam, fit)
    return best[1], best[2]


# --- subsetting ---------------------------------------------------------------

def subset_size(d: int, p: float) -> int:
    """ceil(p*d) in exact rational arithmetic.

    The fraction is interpreted as the decimal it prints as (0.4 means 2/5),
    so no binary-float wobble can push a product across an integer boundary.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {p}")
    return math.ceil(Fraction(str(p)) * d)


def select_top_fraction(ranking: ImportanceRanking, p: float) -> np.ndarray:
    """First ceil(p*d) ranked features, re-sorted ascending for column slicing."""
    k = subset_size(ranking.order.size, p)
    return np.sort(ranking.order[:k])


def apply_subset(X: np.ndarray, idx: np.ndarray) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size and (np.any(np.diff(idx) <= 0) or idx[0] < 0
                     or idx[-1] >= X.shape[1]):
        raise ValueError("subset indices must be strictly ascending and in range")
    return X[:, idx]


def ranking_to_csv(ranking: ImportanceRanking) -> str:
    """Audit export: feature_index,score,rank,method (rank 1 = best)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["feature_index", "score", "rank", "method"])
    rank_of = np.empty(ranking.order.size, dtype=np.int64)
    rank_of[ranking.order] = np.arange(1, ranking.order.size + 1)
    for j in range(ranking.order.size):
        w.writerow([j, repr(float(ranking.scores[j])), int(rank_of[j]),
                    ranking.method])
    return buf.getvalue()


def ranking_from_csv(text: str) -> ImportanceRanking:
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    if header != ["feature_index", "score", "rank", "method"]:
        raise ValueError(f"unexpected ranking CSV header {header}")
    scores = np.empty(len(body))
    method = body[0][3]
    for idx_s, score_s, _rank, meth in body:
        scores[int(idx_s)] = float(score_s)
        if meth != method:
            raise ValueError("mixed methods in ranking CSV")
    return make_ranking(method, scores)

"""The seven-model classical suite behind one fit/predict contract.

Kinds: lr, knn, svm, mlp, rf, et, gbdt. `fit` is a pure function of
(X, y, params, seed): given the same inputs it produces byte-identical
serialized models regardless of scheduling.

Model container format (little-endian, version 1):
  magic   b"DFOM"
  version u16
  kind    u8          (order of KINDS below)
  K       u32         class count
  d       u32         input dimension
  seed    u64         training seed
  payload             kind-specific; arrays framed as
                      [dtype u8][ndim u8][dims u32...][raw bytes],
                      strings as [len u16][utf-8], scalars as f64/u32.
Payload field order per kind is exactly the order written in _serialize_inner.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..trees import DecisionTree, grow_tree  # re-export: shared tree core
from .forest import ForestModel, fit_forest
from .gbdt import GbdtModel, GbdtTree, fit_gbdt
from .knn import KnnModel, fit_knn
from .linear import LogisticModel, fit_logistic
from .mlp import MlpModel, fit_mlp
from .svm import SvmModel, fit_svm

KINDS = ("lr", "knn", "svm", "mlp", "rf", "et", "gbdt")

MAGIC = b"DFOM"
FORMAT_VERSION = 1


class HyperParamError(ValueError):
    pass


PARAM_DEFAULTS = {
    "lr": {"C": 1.0},
    "knn": {"k": 5, "metric": "euclidean"},
    "svm": {"C": 1.0, "kernel": "rbf", "gamma": None},
    "mlp": {"hidden": 128, "lr": 1e-3, "epochs": 200, "patience": 20,
            "batch_size": 64},
    "rf": {"trees": 300, "max_depth": None, "min_leaf": 1},
    "et": {"trees": 300, "max_depth": None, "min_leaf": 1},
    "gbdt": {"trees": 300, "leaves": 31, "lr": 0.1},
}


def resolve_params(kind: str, params: dict | None) -> dict:
    if kind not in PARAM_DEFAULTS:
        raise HyperParamError(f"unknown classifier kind {kind!r}")
    out = dict(PARAM_DEFAULTS[kind])
    for key, value in (params or {}).items():
        if key not in out:
            raise HyperParamError(f"illegal hyperparameter {key!r} for kind {kind!r}")
        out[key] = value
    return out


@dataclass
class TrainedModel:
    kind: str
    n_classes: int
    n_features: int
    seed: int
    inner: object


def fit(kind: str, X, y, params: dict | None = None, seed: int = 0) -> TrainedModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-d, got shape {X.shape}")
    if len(y) != X.shape[0]:
        raise ValueError("X and y row counts differ")
    K = int(y.max() + 1)
    if len(np.unique(y)) < 2:
        raise ValueError("training labels must cover at least 2 classes")
    p = resolve_params(kind, params)
    if kind == "lr":
        inner = fit_logistic(X, y, C=p["C"], n_classes=K)
    elif kind == "knn":
        inner = fit_knn(X, y, k=p["k"], metric=p["metric"], n_classes=K)
    elif kind == "svm":
        inner = fit_svm(X, y, C=p["C"], kernel=p["kernel"], gamma=p["gamma"],
                        n_classes=K, seed=seed)
    elif kind == "mlp":
        inner = fit_mlp(X, y, hidden=p["hidden"], lr=p["lr"], epochs=p["epochs"],
                        patience=p["patience"], batch_size=p["batch_size"],
                        seed=seed, n_classes=K)
    elif kind in ("rf", "et"):
        inner = fit_forest(X, y, trees=p["trees"], max_depth=p["max_depth"],
                           min_leaf=p["min_leaf"], bootstrap=(kind == "rf"),
                           seed=seed, n_classes=K)
    else:
        inner = fit_gbdt(X, y, trees=p["trees"], leaves=p["leaves"], lr=p["lr"],
                         n_classes=K)
    return TrainedModel(kind, K, X.shape[1], int(seed), inner)


def predict(model: TrainedModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"expected width {model.n_features}, got shape {X.shape}")
    return model.inner.predict(X)


def gbdt_feature_gain(model: TrainedModel) -> np.ndarray:
    """Per-feature total loss reduction over all boosting splits."""
    if model.kind != "gbdt":
        raise ValueError(f"gbdt_feature_gain needs a gbdt model, got {model.kind!r}")
    return model.inner.feature_gain()


def rf_feature_importance(model: TrainedModel) -> np.ndarray:
    """Mean Gini impurity decrease per feature, normalized to sum 1."""
    if model.kind not in ("rf", "et"):
        raise ValueError(f"rf_feature_importance needs rf/et, got {model.kind!r}")
    return model.inner.feature_importance()


# --- serialization -----------------------------------------------------------

_DT_CODES = {np.dtype(np.float64): 0, np.dtype(np.int64): 1,
             np.dtype(np.int32): 2, np.dtype(np.uint8): 3}
_DT_BY_CODE = {v: k for k, v in _DT_CODES.items()}


def _w_arr(out: bytearray, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr)
    out += struct.pack("<BB", _DT_CODES[arr.dtype], arr.ndim)
    for dim in arr.shape:
        out += struct.pack("<I", dim)
    out += arr.tobytes()


def _r_arr(buf: bytes, off: int):
    code, ndim = struct.unpack_from("<BB", buf, off)
    off += 2
    shape = []
    for _ in range(ndim):
        shape.append(struct.unpack_from("<I", buf, off)[0])
        off += 4
    dtype = _DT_BY_CODE[code]
    count = int(np.prod(shape)) if shape else 1
    arr = np.frombuffer(buf, dtype=dtype, count=count, offset=off).reshape(shape)
    return arr.copy(), off + count * dtype.itemsize


def _w_str(out: bytearray, s: str) -> None:
    raw = s.encode("utf-8")
    out += struct.pack("<H", len(raw))
    out += raw


def _r_str(buf: bytes, off: int):
    n = struct.unpack_from("<H", buf, off)[0]
    return buf[off + 2:off + 2 + n].decode("utf-8"), off + 2 + n


def _w_trees(out: bytearray, trees) -> None:
    out += struct.pack("<I", len(trees))
    for t in trees:
        for arr in (t.feature, t.threshold, t.left, t.right):
            _w_arr(out, arr)
        if isinstance(t, GbdtTree):
            _w_arr(out, t.value)
        else:
            _w_arr(out, t.dist)
            _w_arr(out, t.gain)
            _w_arr(out, t.n_node)


def _serialize_inner(model: TrainedModel) -> bytes:
    out = bytearray()
    inner = model.inner
    if model.kind == "lr":
        _w_arr(out, inner.W)
        _w_arr(out, inner.b)
    elif model.kind == "knn":
        out += struct.pack("<I", inner.k)
        _w_str(out, inner.metric)
        _w_arr(out, inner.X)
        _w_arr(out, inner.y)
    elif model.kind == "svm":
        _w_str(out, inner.kernel)
        out += struct.pack("<dd", inner.gamma, inner.C)
        _w_arr(out, inner.X)
        _w_arr(out, inner.dual_coef)
    elif model.kind == "mlp":
        for arr in (inner.W1, inner.b1, inner.W2, inner.b2):
            _w_arr(out, arr)
    elif model.kind in ("rf", "et"):
        _w_trees(out, inner.trees)
    else:  # gbdt
        out += struct.pack("<I", len(inner.stages))
        for stage in inner.stages:
            _w_trees(out, stage)
        _w_arr(out, inner.feat_gain)
    return bytes(out)


def serialize(model: TrainedModel) -> bytes:
    head = MAGIC + struct.pack("<HBIIQ", FORMAT_VERSION, KINDS.index(model.kind),
                               model.n_classes, model.n_features, model.seed)
    return head + _serialize_inner(model)


def _read_trees(buf: bytes, off: int, gbdt: bool):
    n, = struct.unpack_from("<I", buf, off)
    off += 4
    trees = []
    for _ in range(n):
        feature, off = _r_arr(buf, off)
        threshold, off = _r_arr(buf, off)
        left, off = _r_arr(buf, off)
        right, off = _r_arr(buf, off)
        if gbdt:
            value, off = _r_arr(buf, off)
            trees.append(GbdtTree(feature, threshold, left, right, value))
        else:
            dist, off = _r_arr(buf, off)
            gain, off = _r_arr(buf, off)
            n_node, off = _r_arr(buf, off)
            trees.append(DecisionTree(feature, threshold, left, right, dist,
                                      gain, n_node, n_features=0))
    return trees, off


def deserialize(buf: bytes) -> TrainedModel:
    if buf[:4] != MAGIC:
        raise ValueError(f"bad model magic {buf[:4]!r}")
    version, kind_code, K, d, seed = struct.unpack_from("<HBIIQ", buf, 4)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version}")
    kind = KINDS[kind_code]
    off = 4 + struct.calcsize("<HBIIQ")
    if kind == "lr":
        W, off = _r_arr(buf, off)
        b, off = _r_arr(buf, off)
        inner = LogisticModel(W, b)
    elif kind == "knn":
        k, = struct.unpack_from("<I", buf, off)
        off += 4
        metric, off = _r_str(buf, off)
        X, off = _r_arr(buf, off)
        y, off = _r_arr(buf, off)
        inner = KnnModel(X, y, int(k), metric, K)
    elif kind == "svm":
        kernel, off = _r_str(buf, off)
        gamma, C = struct.unpack_from("<dd", buf, off)
        off += 16
        X, off = _r_arr(buf, off)
        dual, off = _r_arr(buf, off)
        inner = SvmModel(X, dual, kernel, gamma, C, K)
    elif kind == "mlp":
        W1, off = _r_arr(buf, off)
        b1, off = _r_arr(buf, off)
        W2, off = _r_arr(buf, off)
        b2, off = _r_arr(buf, off)
        inner = MlpModel(W1, b1, W2, b2)
    elif kind in ("rf", "et"):
        trees, off = _read_trees(buf, off, gbdt=False)
        for t in trees:
            t.n_features = d
        inner = ForestModel(trees, K, d, bootstrap=(kind == "rf"))
    else:
        n_stages, = struct.unpack_from("<I", buf, off)
        off += 4
        stages = []
        for _ in range(n_stages):
            stage, off = _read_trees(buf, off, gbdt=True)
            stages.append(stage)
        feat_gain, off = _r_arr(buf, off)
        inner = GbdtModel(stages, K, d, feat_gain)
    return TrainedModel(kind, K, d, seed, inner)

"""Global average pooling of feature maps into fixed-length vectors."""

from __future__ import annotations

import numpy as np

from .tensor_io import DatasetManifest, Tensor, load_tensor


class PoolingError(ValueError):
    pass


class DimensionMismatchError(PoolingError):
    pass


def global_average_pool(t: Tensor) -> np.ndarray:
    """Mean over the spatial grid of a [C, H, W] map; returns length-C f64.

    Accumulation happens in float64 with numpy's pairwise summation, so the
    result is independent of storage dtype and thread count.
    """
    if len(t.shape) != 3:
        raise PoolingError(f"expected a rank-3 [C,H,W] map, got shape {t.shape}")
    c, h, w = t.shape
    if c < 1:
        raise PoolingError("channel extent must be >= 1")
    if h < 1 or w < 1:
        raise PoolingError(f"zero spatial extent in shape {t.shape}")
    data = t.data.astype(np.float64, copy=False)
    bad = np.argwhere(~np.isfinite(data))
    if bad.size:
        idx = tuple(int(v) for v in bad[0])
        raise PoolingError(f"non-finite element at index {idx}")
    return data.reshape(c, h * w).mean(axis=1)


def pool_dataset(manifest: DatasetManifest):
    """Pool every manifest entry into one matrix row, in manifest order.

    Rank-1 tensors are taken as pre-pooled vectors and pass through
    unchanged. Returns (X, y) with X float64 of width manifest.feature_dim
    and y int64 label indices resolved against class_names order.
    """
    n = len(manifest.entries)
    d = manifest.feature_dim
    X = np.empty((n, d), dtype=np.float64)
    y = np.empty(n, dtype=np.int64)
    for i, entry in enumerate(manifest.entries):
        t = load_tensor(manifest.entry_path(entry))
        if len(t.shape) == 1:
            vec = t.data.astype(np.float64, copy=False)
            if not np.all(np.isfinite(vec)):
                raise PoolingError(f"non-finite element in sample {entry.sample_id!r}")
        elif len(t.shape) == 3:
            vec = global_average_pool(t)
        else:
            raise PoolingError(f"sample {entry.sample_id!r} has rank-{len(t.shape)} "
                               f"tensor; expected [C,H,W] or [C]")
        if vec.shape[0] != d:
            raise DimensionMismatchError(
                f"sample {entry.sample_id!r} pooled to {vec.shape[0]} dims, "
                f"manifest declares {d}")
        X[i] = vec
        y[i] = manifest.label_index(entry.label_name)
    return X, y

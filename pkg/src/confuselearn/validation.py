"""Small input-validation helpers shared across the package."""

from __future__ import annotations

import numpy as np

DISTRIBUTION_ATOL = 1e-9


def as_float_array(x, name="array", ndim=None):
    out = np.asarray(x, dtype=np.float64)
    if ndim is not None and out.ndim != ndim:
        raise ValueError(f"{name} must have {ndim} dimension(s), got {out.ndim}")
    return out


def check_unit_interval(x, name):
    """Validate that every entry of `x` lies in [0, 1] and return it as float64."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"{name} must lie in [0, 1]")
    return arr


def check_label_distribution(p, name="distribution", atol=DISTRIBUTION_ATOL):
    """Validate a (batch of) probability vector(s) over classes.

    `p` has shape (..., c); entries must be in [0, 1] and each vector must
    sum to 1 within `atol`.
    """
    arr = check_unit_interval(p, name)
    if arr.ndim < 1 or arr.shape[-1] < 2:
        raise ValueError(f"{name} needs at least 2 classes along the last axis")
    sums = arr.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > atol):
        raise ValueError(f"{name} entries must sum to 1 within {atol}")
    return arr


def check_label_indices(labels, class_count, name="labels"):
    idx = np.asarray(labels)
    if not np.issubdtype(idx.dtype, np.integer):
        if not np.all(idx == np.floor(idx)):
            raise ValueError(f"{name} must be integer class indices")
        idx = idx.astype(np.int64)
    if np.any(idx < 0) or np.any(idx >= class_count):
        raise ValueError(f"{name} must lie in [0, {class_count})")
    return idx.astype(np.int64)


def check_consistent_length(*arrays):
    lengths = {len(a) for a in arrays if a is not None}
    if len(lengths) > 1:
        raise ValueError(f"inconsistent lengths: {sorted(lengths)}")


def one_hot(labels, class_count):
    """Materialize integer class indices as {0,1}-valued rows, shape (..., c)."""
    idx = check_label_indices(labels, class_count)
    out = np.zeros(idx.shape + (class_count,), dtype=np.float64)
    np.put_along_axis(out, np.expand_dims(idx, -1), 1.0, axis=-1)
    return out

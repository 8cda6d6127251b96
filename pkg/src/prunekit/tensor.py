"""Dense tensor helpers shared by every pruning method.

Tensors are plain ``numpy.ndarray`` objects in C (row-major) order with a
float32 or float64 element type. Masks are tensors of the same dtype whose
entries are exactly 0.0 or 1.0.
"""

from __future__ import annotations

import math
from typing import Union

import numpy as np

SUPPORTED_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))
DEFAULT_DTYPE = np.dtype(np.float32)

Norm = Union[int, float]


class TensorError(ValueError):
    """Raised for malformed tensors, masks, or channel indices."""


def as_tensor(data, dtype=None) -> np.ndarray:
    """Convert ``data`` into a contiguous float tensor.

    Lists and integer arrays default to float32; float arrays keep their
    dtype unless ``dtype`` overrides it.
    """
    arr = np.asarray(data)
    if dtype is None:
        dtype = arr.dtype if arr.dtype in SUPPORTED_DTYPES else DEFAULT_DTYPE
    dtype = np.dtype(dtype)
    if dtype not in SUPPORTED_DTYPES:
        raise TensorError(f"unsupported dtype {dtype}; expected float32 or float64")
    check_shape(arr.shape)
    return np.ascontiguousarray(arr, dtype=dtype)


def check_shape(shape) -> None:
    if len(shape) < 1:
        raise TensorError("tensors need at least one dimension")
    if any(int(d) < 1 for d in shape):
        raise TensorError(f"every extent must be >= 1, got shape {tuple(shape)}")


def ones_like(t: np.ndarray) -> np.ndarray:
    return np.ones(t.shape, dtype=t.dtype)


def is_binary(m: np.ndarray) -> bool:
    return bool(np.all((m == 0) | (m == 1)))


def check_mask(mask: np.ndarray, t: np.ndarray, what: str = "mask") -> None:
    """Raise unless ``mask`` is a valid mask for ``t``."""
    if mask.shape != t.shape:
        raise TensorError(f"{what} shape {mask.shape} does not match tensor shape {t.shape}")
    if mask.dtype != t.dtype:
        raise TensorError(f"{what} dtype {mask.dtype} does not match tensor dtype {t.dtype}")
    if not is_binary(mask):
        raise TensorError(f"{what} must contain only 0 and 1")


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise product of two tensors of identical shape and dtype."""
    if a.shape != b.shape:
        raise TensorError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.dtype != b.dtype:
        raise TensorError(f"dtype mismatch: {a.dtype} vs {b.dtype}")
    return np.multiply(a, b)


def normalize_dim(dim: int, ndim: int) -> int:
    if not -ndim <= dim < ndim:
        raise TensorError(f"dim {dim} out of range for a {ndim}-d tensor")
    return dim % ndim


def check_norm(n: Norm) -> float:
    n = float(n)
    if math.isnan(n) or n <= 0:
        raise TensorError(f"norm order must be positive or inf, got {n}")
    return n


def _norm_rows(rows: np.ndarray, n: float) -> np.ndarray:
    # rows: (channels, elements) float64
    a = np.abs(rows)
    if a.shape[1] == 0:
        return np.zeros(a.shape[0])
    peak = a.max(axis=1)
    if math.isinf(n):
        return peak
    with np.errstate(over="ignore", under="ignore"):
        out = np.sum(a**n, axis=1) ** (1.0 / n)
    # redo rows that overflowed or underflowed, scaled by their max entry
    bad = ~np.isfinite(out) | ((out == 0) & (peak > 0))
    if bad.any():
        p = peak[bad]
        out[bad] = p * np.sum((a[bad] / p[:, None]) ** n, axis=1) ** (1.0 / n)
    return out


def _rows(t: np.ndarray, dim: int) -> np.ndarray:
    per_channel = int(np.prod(t.shape)) // t.shape[dim] if t.shape[dim] else 0
    return np.moveaxis(t, dim, 0).reshape(t.shape[dim], per_channel)


def channel_norms(t: np.ndarray, n: Norm, dim: int) -> np.ndarray:
    """L_n norm of every channel of ``t`` along ``dim``, as float64."""
    n = check_norm(n)
    dim = normalize_dim(dim, t.ndim)
    rows = _rows(t, dim).astype(np.float64)
    return _norm_rows(rows, n)


def ln_norm_over_channel(t: np.ndarray, n: Norm, dim: int, channel: int) -> float:
    n = check_norm(n)
    d = normalize_dim(dim, t.ndim)
    if not 0 <= channel < t.shape[d]:
        raise TensorError(f"channel {channel} out of range for extent {t.shape[d]} along dim {d}")
    row = np.take(t, channel, axis=d).reshape(1, -1).astype(np.float64)
    return float(_norm_rows(row, n)[0])


def channel_alive(mask: np.ndarray, dim: int) -> np.ndarray:
    """Boolean vector marking channels along ``dim`` that are not fully pruned."""
    dim = normalize_dim(dim, mask.ndim)
    rows = _rows(mask, dim)
    return np.any(rows != 0, axis=1)


def sparsity(m: np.ndarray) -> float:
    """Fraction of entries equal to zero."""
    if m.size == 0:
        return 0.0
    return float(np.count_nonzero(m == 0)) / m.size

"""Argument checks shared across modules."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array


def check_int(value, name: str, *, min_value: int | None = None) -> int:
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if min_value is not None and value < min_value:
        raise ValueError(f"{name} must be >= {min_value}, got {value}")
    return value


def check_modulus(c) -> int:
    return check_int(c, "c", min_value=1)


def check_positive(value, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value}")
    return value


def check_unit_interval_open(value, name: str) -> float:
    value = check_positive(value, name)
    if value >= 1:
        raise ValueError(f"{name} must lie in (0, 1), got {value}")
    return value


def check_vector(values, name: str, *, positive: bool = False) -> np.ndarray:
    """Coerce a 1-D sequence (or an (n, 1) column) to a float array."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    arr = check_array(arr.reshape(-1, 1), ensure_min_samples=0, input_name=name)[:, 0]
    if positive and np.any(arr <= 0):
        raise ValueError(f"{name} must be strictly positive")
    return arr


def check_mat2(M, name: str = "M", *, tol: float = 1e-9) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.shape != (2, 2):
        raise ValueError(f"{name} must be 2x2, got shape {M.shape}")
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    if abs(det - 1.0) > tol * max(1.0, float(np.abs(M).max()) ** 2):
        raise ValueError(f"{name} is not unimodular (det={det!r})")
    return M

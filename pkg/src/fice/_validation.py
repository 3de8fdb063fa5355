"""Input validation helpers shared by the estimators and analysis functions."""

from __future__ import annotations

import numpy as np

from .errors import DataError


def as_1d_float(values, name: str = "values") -> np.ndarray:
    """Coerce to a 1-D float64 array; accepts lists and (n, 1) columns."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise DataError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise DataError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite entries")
    return arr


def paired_1d(x, y, names: tuple[str, str] = ("x", "y")) -> tuple[np.ndarray, np.ndarray]:
    """Validate two equal-length 1-D float arrays."""
    xa = as_1d_float(x, names[0])
    ya = as_1d_float(y, names[1])
    if xa.shape != ya.shape:
        raise DataError(
            f"{names[0]} and {names[1]} must have equal length, "
            f"got {xa.size} and {ya.size}"
        )
    return xa, ya


def check_fraction(value: float, name: str) -> float:
    """Require a real number in [0, 1]."""
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise DataError(f"{name} must be in [0, 1], got {value}")
    return value

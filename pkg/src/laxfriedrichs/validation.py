"""Input validation shared by the estimators and the CLI."""
from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .grid import StaggeredGrid


def check_positive_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_positive(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive number, got {value!r}")
    return float(value)


def check_finite(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite number, got {value!r}")
    return float(value)


def check_grid(N, K) -> StaggeredGrid:
    return StaggeredGrid(check_positive_int(N, "N"), check_positive_int(K, "K"))


def check_points(X) -> np.ndarray:
    """(n, 2) array of (x, t) query points."""
    X = check_array(X, dtype=float, ensure_2d=True)
    if X.shape[1] != 2:
        raise ValueError(f"expected query points with 2 columns (x, t), got {X.shape[1]}")
    if np.any(X[:, 1] < 0):
        raise ValueError("query times must be non-negative")
    return X


def check_momenta(c) -> np.ndarray:
    """1-D array of momenta from a vector or a single-column matrix."""
    c = np.asarray(c, dtype=float)
    if c.ndim == 2:
        if c.shape[1] != 1:
            raise ValueError(f"expected a single column of momenta, got shape {c.shape}")
        c = c[:, 0]
    c = check_array(c.reshape(-1, 1), dtype=float)[:, 0]
    return c


def check_cell_averages(values, N: int) -> np.ndarray:
    values = check_array(np.asarray(values, dtype=float).reshape(1, -1), dtype=float)[0]
    if values.size != N:
        raise ValueError(f"expected {N} cell averages, got {values.size}")
    return values

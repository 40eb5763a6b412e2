"""Input validation helpers used by operators, estimators and the CLI."""

from __future__ import annotations

import math

import numpy as np
from sklearn.utils import check_array

from .exceptions import OrderingError, ParameterError, ShapeError


def check_positive_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ParameterError(f"{name} must be an integer, got {value!r}")
    if value < 1:
        raise ParameterError(f"{name} must be >= 1, got {value}")
    return int(value)


def check_alpha(alpha) -> float:
    try:
        alpha = float(alpha)
    except (TypeError, ValueError):
        raise ParameterError(f"alpha must be a float, got {alpha!r}") from None
    if not (0.0 < alpha <= 1.0):
        raise ParameterError(f"alpha must lie in (0, 1], got {alpha}")
    return alpha


def check_learning_rate(lr) -> float:
    lr = float(lr)
    if not math.isfinite(lr) or lr < 0:
        raise ParameterError(f"learning_rate must be a finite non-negative float, got {lr}")
    return lr


def check_timestamps(timestamps, name: str = "timestamps", strict: bool = True) -> np.ndarray:
    """Return ``timestamps`` as an int64 array, checking its ordering.

    With ``strict=False`` ties are accepted (secondary streams may repeat
    timestamps); decreasing steps are always rejected.
    """
    ts = np.asarray(timestamps)
    if ts.ndim != 1:
        raise ShapeError(f"{name} must be one-dimensional")
    if ts.size and not np.issubdtype(ts.dtype, np.integer):
        if np.issubdtype(ts.dtype, np.datetime64):
            ts = ts.astype("datetime64[ns]").view(np.int64)
        else:
            raise OrderingError(f"{name} must be integer nanoseconds, got dtype {ts.dtype}")
    ts = ts.astype(np.int64, copy=False)
    steps = np.diff(ts)
    if strict and np.any(steps <= 0):
        bad = int(np.argmax(steps <= 0)) + 1
        raise OrderingError(f"{name} must be strictly increasing (violated at position {bad})")
    if not strict and np.any(steps < 0):
        bad = int(np.argmax(steps < 0)) + 1
        raise OrderingError(f"{name} must be non-decreasing (violated at position {bad})")
    return ts


def check_rows(X) -> np.ndarray:
    """Validate a 2-d float table where NaN marks missing values."""
    return check_array(
        X, dtype=np.float64, ensure_all_finite="allow-nan", ensure_2d=True, ensure_min_samples=1
    )

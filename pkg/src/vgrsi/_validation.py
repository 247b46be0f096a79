"""Input checks shared by the public functions and estimators."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .marketdata import PriceSeries


def as_price_array(series) -> np.ndarray:
    """Return a contiguous float64 1-D view of ``series``.

    Accepts a PriceSeries, a 1-D sequence or an ``(n, 1)`` array. Only
    finiteness is enforced here; positivity belongs to PriceSeries.
    """
    if isinstance(series, PriceSeries):
        return series.prices
    arr = check_array(series, ensure_2d=False, dtype=np.float64,
                      ensure_all_finite=True, ensure_min_samples=0)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise ValueError(f"expected a single price column, got shape {arr.shape}")
        arr = arr[:, 0]
    return np.ascontiguousarray(arr)


def check_positive_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_index(j, n: int) -> int:
    if isinstance(j, bool) or not isinstance(j, numbers.Integral):
        raise TypeError(f"index must be an integer, got {j!r}")
    if not 0 <= j < n:
        raise IndexError(f"index {j} out of range for series of length {n}")
    return int(j)

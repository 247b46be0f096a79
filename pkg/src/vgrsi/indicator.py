"""VGRSI: an RSI-style oscillator built from visibility-selected increments.

For every instant ``t`` the indices ``j`` of the last ``W_S`` bars each
contribute the one-step increments ``p_i - p_{i-1}`` of (at most ``W_S``)
points visible from ``j``. Up/down magnitudes give ``r_S``, up/down counts
give ``r_N``; the two are combined by variant A0 (mean) or A1 (quotient)
and mapped to ``[0, 100]`` via ``100 - 100 / (1 + r)``.

Undefined values are ``None`` in scalar results and ``NaN`` in arrays.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_price_array, check_index, check_positive_int
from .visibility import _per_index_contributions, _window_totals, visible_fast


class Variant(str, enum.Enum):
    A0 = "A0"
    A1 = "A1"


class WarmupError(ValueError):
    """Raised when an instant has fewer than ``W_S`` preceding bars."""


@dataclass(frozen=True)
class VgrsiParams:
    window_size: int = 35
    window_visibility: int = 35
    variant: Variant = Variant.A0

    def __post_init__(self):
        check_positive_int(self.window_size, "window_size")
        check_positive_int(self.window_visibility, "window_visibility")
        object.__setattr__(self, "variant", Variant(self.variant))

    @property
    def warmup(self) -> int:
        return self.window_size

    def as_dict(self) -> dict:
        return {"window_size": self.window_size,
                "window_visibility": self.window_visibility,
                "variant": self.variant.value}


@dataclass(frozen=True)
class VgrsiComponents:
    s_plus: float
    s_minus: float
    n_plus: int
    n_minus: int
    r_s: float | None
    r_n: float | None
    r_a: float | None
    value: float | None


def increments(series) -> np.ndarray:
    """``p_i - p_{i-1}`` for ``i >= 1``."""
    return np.diff(as_price_array(series))


def strength_ratio(up: float, down: float) -> float | None:
    if down > 0:
        return up / down
    if up > 0:
        return math.inf
    return None


def combine(r_s: float | None, r_n: float | None, variant: Variant | str) -> float | None:
    if r_s is None or r_n is None:
        return None
    if Variant(variant) is Variant.A0:
        return (r_s + r_n) / 2
    if math.isinf(r_s) and math.isinf(r_n):
        return None
    if math.isinf(r_n):
        return 0.0
    if r_n == 0:
        # r_N = 0 forces S+ = 0, so only 0/0 reaches here
        return None if r_s == 0 else math.inf
    return r_s / r_n


def normalize(r_a: float | None) -> float | None:
    if r_a is None:
        return None
    if math.isinf(r_a):
        return 100.0
    return 100 - 100 / (1 + r_a)


def components_at(series, t: int, params: VgrsiParams) -> VgrsiComponents:
    """All intermediate quantities of the indicator at instant ``t``.

    A visible index reachable from several ``j`` is counted once per ``j``;
    index 0 and zero increments never contribute.
    """
    p = as_price_array(series)
    if len(p) == 0:
        raise ValueError("empty series")
    t = check_index(t, len(p))
    ws, wv = params.window_size, params.window_visibility
    if t < ws:
        raise WarmupError(f"t={t} is inside the warm-up period (needs t >= {ws})")

    s_plus = s_minus = 0.0
    n_plus = n_minus = 0
    for j in range(t - ws + 1, t + 1):
        sp = sm = 0.0
        for i in visible_fast(p, j, wv, ws).visible:
            if i < 1:
                continue
            d = p[i] - p[i - 1]
            if d > 0:
                sp += d
                n_plus += 1
            elif d < 0:
                sm += -d
                n_minus += 1
        s_plus += sp
        s_minus += sm

    r_s = strength_ratio(s_plus, s_minus)
    r_n = strength_ratio(n_plus, n_minus)
    r_a = combine(r_s, r_n, params.variant)
    return VgrsiComponents(s_plus, s_minus, n_plus, n_minus, r_s, r_n, r_a, normalize(r_a))


def rolling_components(series, params: VgrsiParams):
    """Window totals ``(S+, S-, N+, N-)`` for every index; NaN / -1 before warm-up."""
    p = as_price_array(series)
    contrib = _per_index_contributions(p, params.window_size, params.window_visibility)
    return _window_totals(*contrib, params.window_size)


def values_from_totals(s_plus, s_minus, n_plus, n_minus, variant) -> np.ndarray:
    """Vectorised ratio, aggregation and normalisation rules."""
    s_plus = np.asarray(s_plus, dtype=np.float64)
    s_minus = np.asarray(s_minus, dtype=np.float64)
    n_plus = np.asarray(n_plus, dtype=np.float64)
    n_minus = np.asarray(n_minus, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        r_s = np.where(s_minus > 0, s_plus / s_minus, np.where(s_plus > 0, np.inf, np.nan))
        r_n = np.where(n_minus > 0, n_plus / n_minus, np.where(n_plus > 0, np.inf, np.nan))
        if Variant(variant) is Variant.A0:
            r_a = (r_s + r_n) / 2
        else:
            r_a = r_s / r_n
        value = np.where(np.isinf(r_a), 100.0, 100 - 100 / (1 + r_a))
    return value


def rolling_values(series, params: VgrsiParams) -> np.ndarray:
    """Indicator value at every index of ``series`` (NaN where undefined)."""
    p = as_price_array(series)
    if len(p) < params.window_size + 1:
        raise ValueError(f"series of length {len(p)} is shorter than "
                         f"window_size + 1 = {params.window_size + 1}")
    tp, tm, cp, cm = rolling_components(p, params)
    out = values_from_totals(tp, tm, cp, cm, params.variant)
    out[: params.window_size] = np.nan
    return out


def to_point_units(series, point: float) -> np.ndarray:
    """Express prices as whole numbers of ``point``.

    The indicator is invariant under shifts and positive scaling, so this only
    makes collinearity on the quote grid exact in floating point.
    """
    return np.round(as_price_array(series) / point)


def rolling(series, params: VgrsiParams) -> list[tuple[int, float | None]]:
    """``(t, value)`` pairs for every ``t`` from the end of warm-up onward."""
    values = rolling_values(series, params)
    return [(t, None if np.isnan(v) else float(v))
            for t, v in enumerate(values) if t >= params.window_size]


class VGRSI(TransformerMixin, BaseEstimator):
    """Rolling VGRSI as a scikit-learn transformer.

    ``transform`` maps a price series (1-D or one column) to an array of the
    same length holding the indicator value, NaN where undefined.

    Parameters
    ----------
    window_size : int
        Number of recent instants aggregated per value; also caps the number
        of visible points used per instant.
    window_visibility : int
        Maximum backward range searched for visible points.
    variant : {"A0", "A1"}
        Mean (A0) or quotient (A1) of the amplitude and count ratios.
    point : float, optional
        Quote increment; when given, prices are converted to whole points
        before the visibility scan.
    """

    def __init__(self, window_size=35, window_visibility=35, variant="A0", point=None):
        self.window_size = window_size
        self.window_visibility = window_visibility
        self.variant = variant
        self.point = point

    def _prices(self, X):
        p = as_price_array(X)
        return p if self.point is None else to_point_units(p, self.point)

    def fit(self, X, y=None):
        self.params_ = VgrsiParams(self.window_size, self.window_visibility, self.variant)
        if self.point is not None and not self.point > 0:
            raise ValueError(f"point must be > 0, got {self.point}")
        self._prices(X)
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        return rolling_values(self._prices(X), self.params_)

    def components(self, X) -> np.ndarray:
        """Structured array of ``s_plus, s_minus, n_plus, n_minus, value`` per index."""
        check_is_fitted(self, "params_")
        p = self._prices(X)
        tp, tm, cp, cm = rolling_components(p, self.params_)
        out = np.empty(len(p), dtype=[("s_plus", "f8"), ("s_minus", "f8"),
                                      ("n_plus", "i8"), ("n_minus", "i8"), ("value", "f8")])
        out["s_plus"], out["s_minus"], out["n_plus"], out["n_minus"] = tp, tm, cp, cm
        out["value"] = rolling_values(p, self.params_)
        return out

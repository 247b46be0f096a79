import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from vgrsi.indicator import (
    VGRSI, Variant, VgrsiParams, WarmupError, combine, components_at, increments,
    normalize, rolling, rolling_values, strength_ratio, to_point_units,
)

from oracles import brute_components, brute_value


def test_increments_length():
    d = increments([1.0, 1.5, 1.25])
    assert list(d) == [0.5, -0.25]


def test_strictly_increasing_is_100():
    p = np.arange(1.0, 50.0)
    c = components_at(p, 30, VgrsiParams(10, 20, "A0"))
    assert c.s_minus == 0 and c.n_minus == 0
    assert c.r_s == math.inf and c.value == 100.0


def test_strictly_decreasing_is_0_under_a0():
    p = np.arange(50.0, 1.0, -1.0)
    assert components_at(p, 30, VgrsiParams(10, 20, "A0")).value == 0.0
    # A1 is 0/0 here
    assert components_at(p, 30, VgrsiParams(10, 20, "A1")).value is None


def test_normalization_arithmetic():
    assert normalize(combine(1.0, 1.0, "A0")) == 50.0
    assert normalize(combine(3.0, 1.0, "A1")) == 75.0
    assert normalize(None) is None
    assert normalize(math.inf) == 100.0


def test_degenerate_ratio_rules():
    assert strength_ratio(0.0, 0.0) is None
    assert strength_ratio(2.0, 0.0) == math.inf
    assert combine(math.inf, 3.0, "A0") == math.inf
    assert combine(None, 3.0, "A0") is None
    assert combine(math.inf, math.inf, "A1") is None
    assert combine(0.0, 0.0, "A1") is None
    assert normalize(combine(2.0, math.inf, "A1")) == 0.0
    assert normalize(combine(math.inf, 2.0, "A1")) == 100.0
    assert normalize(combine(0.0, 0.0, "A0")) == 0.0


def test_swap_identity():
    # swapping up/down totals inverts both ratios
    sp, sm, np_, nm = 3.0, 1.5, 7, 4
    r_s, r_n = strength_ratio(sp, sm), strength_ratio(np_, nm)
    r_s2, r_n2 = strength_ratio(sm, sp), strength_ratio(nm, np_)
    assert r_s2 == pytest.approx(1 / r_s) and r_n2 == pytest.approx(1 / r_n)
    assert normalize(combine(r_s2, r_n2, "A0")) == pytest.approx(
        normalize((1 / r_s + 1 / r_n) / 2))


def test_triangle_wave_is_balanced():
    p = np.array([0, 1, 2, 1] * 30, dtype=float) + 10
    for ws in (4, 8, 12):
        c = components_at(p, 100, VgrsiParams(ws, ws, "A0"))
        assert c.s_plus == c.s_minus and c.n_plus == c.n_minus
        assert c.value == pytest.approx(50.0, abs=1e-9)


def test_warmup_and_errors():
    p = np.arange(1.0, 20.0)
    with pytest.raises(WarmupError):
        components_at(p, 4, VgrsiParams(5, 5))
    with pytest.raises(ValueError):
        components_at([], 0, VgrsiParams(5, 5))
    with pytest.raises(ValueError):
        rolling(p[:5], VgrsiParams(5, 5))


def test_rolling_boundary():
    p = np.arange(1.0, 7.0)
    out = rolling(p, VgrsiParams(5, 5))
    assert out == [(5, 100.0)]


def test_flat_series_undefined():
    out = rolling(np.full(40, 1.1), VgrsiParams(10, 10))
    assert all(v is None for _, v in out)


@pytest.mark.parametrize("variant", ["A0", "A1"])
def test_matches_triple_loop(rng, variant):
    p = 100 + np.cumsum(rng.normal(size=120))
    params = VgrsiParams(35, 35, variant)
    for t in range(35, 120, 7):
        c = components_at(p, t, params)
        sp, sm, np_, nm = brute_components(p, t, 35, 35)
        assert (c.n_plus, c.n_minus) == (np_, nm)
        assert c.s_plus == pytest.approx(sp, rel=1e-9)
        assert c.s_minus == pytest.approx(sm, rel=1e-9)
        assert c.value == pytest.approx(brute_value(p, t, 35, 35, variant), rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1, 1, allow_subnormal=False), min_size=12, max_size=80),
       st.integers(1, 12), st.integers(1, 30), st.sampled_from(["A0", "A1"]))
def test_rolling_equals_components_at(steps, ws, wv, variant):
    p = 10 + np.cumsum(steps)
    if len(p) < ws + 1:
        return
    params = VgrsiParams(ws, wv, variant)
    for t, v in rolling(p, params):
        expected = components_at(p, t, params).value
        assert v == expected
        if v is not None:
            assert 0.0 <= v <= 100.0


def test_scale_invariance(rng):
    p = 100 + np.cumsum(rng.normal(size=150))
    params = VgrsiParams(20, 40, "A1")
    base = rolling_values(p, params)
    for q in (p * 2.5, p * 0.001, p + 1000.0):
        np.testing.assert_allclose(rolling_values(q, params), base, rtol=1e-9, equal_nan=True)


def test_impulse_lifts_a1_above_a0():
    steps = np.tile([0.1, 0.1, -0.1, -0.1], 30)
    steps[60] = 3.0
    p = 100 + np.concatenate([[0.0], np.cumsum(steps)])
    for ws, wv in [(20, 20), (16, 40), (12, 12)]:
        a0 = rolling_values(p, VgrsiParams(ws, wv, "A0"))
        a1 = rolling_values(p, VgrsiParams(ws, wv, "A1"))
        window = range(62, 61 + ws)
        assert all(a1[t] > a0[t] for t in window)


def test_steady_uptrend_a0_stays_bullish():
    steps = np.where(np.arange(200) % 5 == 4, -0.5, 1.0)
    p = 100 + np.concatenate([[0.0], np.cumsum(steps)])
    for ws, wv in [(10, 10), (20, 40), (35, 35), (15, 100)]:
        a0 = rolling_values(p, VgrsiParams(ws, wv, "A0"))
        assert np.nanmin(a0) >= 50


class TestEstimator:
    def test_transform_matches_rolling(self, rng):
        p = 100 + np.cumsum(rng.normal(size=80))
        est = VGRSI(window_size=10, window_visibility=20, variant="A1").fit(p)
        np.testing.assert_array_equal(est.transform(p),
                                      rolling_values(p, VgrsiParams(10, 20, Variant.A1)))
        assert est.transform(p.reshape(-1, 1)).shape == (80,)

    def test_params_and_clone(self):
        est = VGRSI(window_size=12)
        assert est.get_params()["window_size"] == 12
        assert clone(est).set_params(variant="A1").variant == "A1"

    def test_not_fitted(self):
        from sklearn.exceptions import NotFittedError
        with pytest.raises(NotFittedError):
            VGRSI().transform(np.arange(1.0, 50.0))

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            VGRSI(window_size=0).fit(np.arange(1.0, 50.0))
        with pytest.raises(ValueError):
            VGRSI(variant="A2").fit(np.arange(1.0, 50.0))

    def test_point_units(self, rng):
        ticks = 110_000 + np.cumsum(rng.integers(-3, 4, size=200))
        prices = ticks * 1e-5
        np.testing.assert_array_equal(to_point_units(prices, 1e-5), ticks)
        est = VGRSI(10, 30, point=1e-5).fit(prices)
        np.testing.assert_array_equal(est.transform(prices),
                                      rolling_values(ticks.astype(float), VgrsiParams(10, 30)))

    def test_components_table(self, rng):
        p = 100 + np.cumsum(rng.normal(size=40))
        tab = VGRSI(5, 5).fit(p).components(p)
        c = components_at(p, 20, VgrsiParams(5, 5))
        assert tab["n_plus"][20] == c.n_plus and tab["value"][20] == c.value

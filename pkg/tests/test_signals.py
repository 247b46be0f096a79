import json
import math
from datetime import timedelta

import pytest
from hypothesis import given
from hypothesis import strategies as st

from vgrsi.indicator import VgrsiParams
from vgrsi.marketdata import Candle, InstrumentSpec, Timeframe
from vgrsi.signals import (Direction, StrategyParams, crossing, evaluate_entry,
                           median_height_points, sl_tp_distance, write_signals)

from conftest import T0

SPEC = InstrumentSpec("EURUSD", point=0.0001, contract_size=100_000)


def _params(**kw):
    vg = {tf: VgrsiParams(10, 10, "A0") for tf in ("M1", "M5", "M30")}
    return StrategyParams(vgrsi=vg, **kw)


def _candles(heights_points, spec=SPEC):
    out = []
    for k, h in enumerate(heights_points):
        lo = 1.1
        out.append(Candle(T0 + timedelta(minutes=k), Timeframe.M1, lo, lo + h * spec.point, lo,
                          lo, 1.0))
    return out


@pytest.mark.parametrize("prev, curr, expected", [
    (36, 34, True), (34, 33, False), (None, 30, False), (36, None, False),
    (35, 34, False), (36, 35, True), (float("nan"), 30, False),
])
def test_downward_crossing(prev, curr, expected):
    assert crossing(prev, curr, 35) is expected


def test_upward_crossing():
    assert crossing(79, 81, 80, "up")
    assert not crossing(81, 82, 80, "up")


@given(st.floats(0, 100), st.floats(0, 100), st.floats(0, 100))
def test_down_and_up_crossings_are_exclusive(a, b, thr):
    assert not (crossing(a, b, thr, "down") and crossing(a, b, thr, "up"))
    if crossing(a, b, thr):
        assert a > thr >= b


def test_all_three_cross_gives_long():
    p = _params(buy_threshold=30, sell_threshold=80)
    state = {"M1": (31, 29), "M5": (35, 30), "M30": (40, 12)}
    sig = evaluate_entry({Timeframe(k): v for k, v in state.items()}, p, 0, None, T0, 12)
    assert sig.direction is Direction.LONG
    assert sig.sl_distance_points == sig.tp_distance_points == 12
    assert sig.snapshot == {"M1": 29.0, "M5": 30.0, "M30": 12.0}


def test_missing_timeframe_cross_gives_nothing():
    p = _params()
    state = {Timeframe.M1: (31, 29), Timeframe.M5: (35, 29), Timeframe.M30: (29, 28)}
    assert evaluate_entry(state, p, 0, None, T0) is None


def test_entry_gap_and_cap():
    p = _params()
    state = {tf: (31, 29) for tf in Timeframe}
    assert evaluate_entry(state, p, 0, T0 - timedelta(minutes=10), T0) is None
    assert evaluate_entry(state, p, 0, T0 - timedelta(minutes=30), T0) is not None
    assert evaluate_entry(state, p, 2, None, T0) is None


def test_short_on_falling_back_from_overbought():
    p = _params(sell_threshold=80)
    state = {tf: (85, 79) for tf in Timeframe}
    assert evaluate_entry(state, p, 0, None, T0).direction is Direction.SHORT
    up = _params(sell_threshold=80, short_cross_direction="up")
    assert evaluate_entry(state, up, 0, None, T0) is None
    assert evaluate_entry({tf: (75, 81) for tf in Timeframe}, up, 0, None, T0).direction \
        is Direction.SHORT


def test_params_validation_and_round_trip():
    with pytest.raises(ValueError):
        _params(buy_threshold=80, sell_threshold=30)
    with pytest.raises(ValueError, match="missing"):
        StrategyParams(vgrsi={Timeframe.M1: VgrsiParams()})
    p = _params(sl_tp_multiplier=2.5)
    q = StrategyParams.from_dict(json.loads(json.dumps(p.as_dict())))
    assert q == p and hash(q) == hash(p)
    assert p.max_window == 10


@pytest.mark.parametrize("heights, n, z, expected", [
    ([10, 20, 30], 3, 2, 40),
    ([10, 20], 2, 1, 15),
    ([0, 0, 0, 0], 4, 5, 1),
    ([7, 8], 2, 1, 8),        # 7.5 rounds half up
    ([5, 100, 3, 10, 20], 3, 1, 10),  # only the last three count
])
def test_sl_tp_distance(heights, n, z, expected):
    assert sl_tp_distance(_candles(heights), n, z, SPEC) == expected


def test_sl_tp_needs_n_candles():
    with pytest.raises(ValueError):
        sl_tp_distance(_candles([1, 2]), 3, 1, SPEC)


def test_median_height_is_in_points():
    assert median_height_points(_candles([4, 6]), 2, SPEC) == pytest.approx(5)


def test_signal_log_is_json_lines(tmp_path):
    p = _params()
    sig = evaluate_entry({tf: (31, 29) for tf in Timeframe}, p, 0, None, T0, 7)
    write_signals([sig, sig], tmp_path / "s.jsonl")
    lines = (tmp_path / "s.jsonl").read_text().splitlines()
    rec = json.loads(lines[0])
    assert len(lines) == 2
    assert rec["direction"] == "long" and rec["sl_points"] == rec["tp_points"] == 7
    assert rec["time"] == "2024-01-01T00:00:00Z" and not math.isnan(rec["vgrsi"]["M30"])

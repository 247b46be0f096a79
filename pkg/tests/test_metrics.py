import json
import math
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from vgrsi.broker import EquityPoint
from vgrsi.metrics import (WindowStats, aggregate, daily_equity, max_drawdown, sharpe,
                           trading_days, write_summary)


def _curve(returns, start=10_000.0):
    out = [start]
    for r in returns:
        out.append(out[-1] * (1 + r))
    return out


def test_drawdown_examples():
    assert max_drawdown([10_000, 10_100, 10_200]) == 0.0
    assert max_drawdown([10_000, 9_000, 9_500]) == pytest.approx(10.0)
    assert max_drawdown([10_000, 11_000, 9_900]) == pytest.approx(11.0)


def test_drawdown_empty_curve_is_error():
    with pytest.raises(ValueError):
        max_drawdown([])


@given(st.lists(st.floats(1, 1e6), min_size=1, max_size=50))
def test_drawdown_is_nonnegative_and_bounded(curve):
    dd = max_drawdown(curve, base=10_000)
    assert dd >= 0
    assert dd <= (max(curve) - min(curve)) / 10_000 * 100 + 1e-9


def test_sharpe_hand_computed():
    # mean 0.004, sample variance 7.2e-4 / 4 = 1.8e-4
    expected = 0.004 / math.sqrt(1.8e-4) * math.sqrt(252)
    assert expected == pytest.approx(4.7329, abs=1e-4)
    assert sharpe(_curve([0.01, -0.01, 0.01, -0.01, 0.02])) == pytest.approx(expected, rel=1e-9)
    assert sharpe(_curve([0.01, -0.01, 0.01, -0.01, 0.02]), annualize=False) == \
        pytest.approx(expected / math.sqrt(252), rel=1e-9)


@pytest.mark.parametrize("curve", [[10_000] * 5, _curve([0.01, 0.01, 0.01]), [10_000, 10_100]])
def test_sharpe_undefined_without_variation(curve):
    assert sharpe(curve) is None


def test_daily_equity_takes_last_sample_per_day():
    t = datetime(2024, 1, 1, tzinfo=timezone.utc)
    pts = [EquityPoint(t + timedelta(hours=h), 0, 10_000 + h) for h in (1, 5, 30, 47)]
    assert daily_equity(pts, 10_000) == [10_000, 10_005, 10_047]


def _stats(n, profit=0.0, sharpe_=None, dd=0.0):
    return WindowStats(n, n, 0, sharpe_, dd, profit)


def test_aggregate_min_max_mean():
    s = aggregate([_stats(0), _stats(10), _stats(20)], trading_days=10)
    assert s.trades_all == (0, 20, 10.0)
    assert s.total_trades == 30 and s.trades_per_day == 3.0
    assert s.sharpe_mean is None
    one = aggregate([_stats(4, 1.5, 2.0, 3.0)])
    assert one.trades_all == (4, 4, 4.0) and one.sharpe_mean == 2.0
    assert one.trades_per_day is None


def test_aggregate_rejects_empty_and_bad_stats():
    with pytest.raises(ValueError):
        aggregate([])
    with pytest.raises(ValueError):
        WindowStats(3, 1, 1, None, 0.0, 0.0)


def test_trading_days_counts_dates():
    t = datetime(2024, 1, 1, 23, tzinfo=timezone.utc)
    assert trading_days([t, t + timedelta(hours=1), t + timedelta(hours=2)]) == 2


def test_summary_files(tmp_path):
    s = aggregate([_stats(2, 100.0, 1.0, 2.5), _stats(4, -50.0, 3.0, 1.5)], trading_days=14)
    write_summary(s, tmp_path / "s.csv", tmp_path / "s.json")
    doc = json.loads((tmp_path / "s.json").read_text())
    assert doc["total_profit"] == 50.0 and doc["sharpe_mean"] == 2.0
    header, row = (tmp_path / "s.csv").read_text().splitlines()
    assert header.startswith("all_trades_min_max_mean") and "2 / 4 / 3.0" in row

import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vgrsi.marketdata import Candle, InstrumentSpec, Timeframe  # noqa: E402

T0 = datetime(2024, 1, 1, tzinfo=timezone.utc)


def random_walk(rng, n, start=100.0, scale=1.0):
    return start + np.cumsum(rng.normal(scale=scale, size=n))


def make_m1(closes, start=T0, wick=0.0):
    """M1 candles whose open is the previous close; wicks extend by ``wick``."""
    out = []
    prev = closes[0]
    for k, c in enumerate(closes):
        o = prev
        out.append(Candle(start + timedelta(minutes=k), Timeframe.M1, float(o),
                          float(max(o, c) + wick), float(min(o, c) - wick), float(c), 1.0))
        prev = c
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def eurusd():
    return InstrumentSpec("EURUSD", point=0.0001, contract_size=100_000,
                          commission_per_lot=0.0, default_spread_points=0)


_VERDICTS = []


@pytest.fixture
def verdict(request):
    """Collects one pass/fail line per acceptance criterion.

    The test fills ``ok`` and ``detail``; a test that raises before doing so
    is reported as a failure.
    """
    rec = {"name": request.node.get_closest_marker("criterion").args[0]}
    yield rec
    ok = rec.get("ok", False)
    detail = rec.get("detail", "error before a verdict was reached")
    _VERDICTS.append((rec["name"], ok, detail))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, ok, detail in _VERDICTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")

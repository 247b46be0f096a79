"""Single-parameter-set backtest over M1 bars with M5/M30 confirmation."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Sequence

import numpy as np

from .broker import Broker, EquityPoint, RejectedOrder, TradeRecord
from .indicator import VgrsiParams, rolling_values, to_point_units
from .marketdata import Candle, InstrumentSpec, Timeframe, resample, to_arrays
from .signals import TIMEFRAMES, Signal, StrategyParams, evaluate_entry, sl_tp_distance


class MarketView:
    """M1 history plus derived M5/M30 bars and memoised indicator columns.

    Indicator inputs are closes in whole points; ``price_source`` picks mid,
    bid or ask closes.
    """

    def __init__(self, m1: Sequence[Candle], spec: InstrumentSpec, price_source: str = "mid"):
        if not m1:
            raise ValueError("empty M1 history")
        self.m1 = list(m1)
        self.spec = spec
        self.bars = {Timeframe.M1: to_arrays(self.m1)}
        for tf in (Timeframe.M5, Timeframe.M30):
            self.bars[tf] = to_arrays(resample(self.m1, tf))
        shift = {"mid": 0.0, "bid": -spec.half_spread(), "ask": spec.half_spread()}[price_source]
        self._points = {tf: to_point_units(b.close + shift, spec.point) if len(b) else b.close
                        for tf, b in self.bars.items()}
        m1_close = self.bars[Timeframe.M1].close_time
        # index of the latest completed higher-timeframe bar at each M1 close
        self.latest = {tf: np.searchsorted(self.bars[tf].close_time, m1_close, side="right") - 1
                       for tf in TIMEFRAMES}
        self._cache: dict = {}

    def __len__(self) -> int:
        return len(self.m1)

    def indicator(self, tf: Timeframe, params: VgrsiParams) -> np.ndarray:
        key = (tf, params)
        if key not in self._cache:
            p = self._points[tf]
            if len(p) < params.window_size + 1:
                self._cache[key] = np.full(len(p), np.nan)
            else:
                self._cache[key] = rolling_values(p, params)
        return self._cache[key]

    def index_range(self, start: datetime | None, end: datetime | None) -> tuple[int, int]:
        t = self.bars[Timeframe.M1].open_time
        lo = 0 if start is None else int(np.searchsorted(t, int(start.timestamp()), "left"))
        hi = len(t) if end is None else int(np.searchsorted(t, int(end.timestamp()), "left"))
        return lo, hi


def _cross(v: np.ndarray, threshold: float, direction: str) -> np.ndarray:
    out = np.zeros(len(v), dtype=bool)
    if len(v) > 1:
        prev, curr = v[:-1], v[1:]
        if direction == "down":
            out[1:] = (prev > threshold) & (curr <= threshold)
        else:
            out[1:] = (prev < threshold) & (curr >= threshold)
    return out


def _on_m1(view: MarketView, tf: Timeframe, flags: np.ndarray) -> np.ndarray:
    idx = view.latest[tf]
    ok = idx >= 0
    out = np.zeros(len(idx), dtype=bool)
    out[ok] = flags[idx[ok]]
    return out


def candidate_masks(view: MarketView, params: StrategyParams) -> tuple[np.ndarray, np.ndarray]:
    """M1 bars at which all three timeframes cross the buy / sell threshold."""
    long_ = np.ones(len(view), dtype=bool)
    short = np.ones(len(view), dtype=bool)
    for tf in TIMEFRAMES:
        v = view.indicator(tf, params.vgrsi[tf])
        long_ &= _on_m1(view, tf, _cross(v, params.buy_threshold, "down"))
        short &= _on_m1(view, tf, _cross(v, params.sell_threshold, params.short_cross_direction))
    return long_, short


def _state_at(view: MarketView, params: StrategyParams, i: int) -> dict:
    state = {}
    for tf in TIMEFRAMES:
        v = view.indicator(tf, params.vgrsi[tf])
        k = int(view.latest[tf][i])
        state[tf] = (float(v[k - 1]), float(v[k])) if k >= 1 else (None, None)
    return state


@dataclass
class BacktestResult:
    params: StrategyParams
    initial_balance: float
    final_balance: float
    trades: list[TradeRecord] = field(default_factory=list)
    signals: list[Signal] = field(default_factory=list)
    rejections: list[RejectedOrder] = field(default_factory=list)
    equity_curve: list[EquityPoint] = field(default_factory=list)

    @property
    def profit(self) -> float:
        return round(self.final_balance - self.initial_balance, 2)

    @property
    def n_trades(self) -> int:
        return len(self.trades)


def _utc(ts: int) -> datetime:
    return datetime.fromtimestamp(int(ts), tz=timezone.utc)


def run_backtest(view: MarketView, params: StrategyParams, start: datetime | None = None,
                 end: datetime | None = None, record: bool = True, **broker_kwargs) -> BacktestResult:
    """Trade ``params`` on M1 bars opening in ``[start, end)``.

    Bars before ``start`` only warm up the indicators. Entries are decided at
    each M1 close and filled at that close; open positions are liquidated at
    the close of the last bar in range.
    """
    broker_kwargs.setdefault("max_open_positions", params.max_open_positions)
    broker = Broker(view.spec, **broker_kwargs)
    result = BacktestResult(params, broker.initial_balance, broker.initial_balance)
    lo, hi = view.index_range(start, end)
    if hi <= lo:
        return result

    long_mask, short_mask = candidate_masks(view, params)
    candidates = long_mask | short_mask
    m1 = view.m1
    close_times = view.bars[Timeframe.M1].close_time
    n_lookback = params.sl_tp_lookback
    last_entry = None
    for i in range(lo, hi):
        bar = m1[i]
        if broker.account.open_positions:
            broker.step_bar(bar, record)
        elif record:
            broker.mark(bar.close, bar.close_time)
        if not candidates[i] or i + 1 < n_lookback:
            continue
        now = _utc(close_times[i])
        dist = sl_tp_distance(m1[i + 1 - n_lookback:i + 1], n_lookback,
                              params.sl_tp_multiplier, view.spec)
        sig = evaluate_entry(_state_at(view, params, i), params,
                             len(broker.account.open_positions), last_entry, now, dist)
        if sig is None:
            continue
        result.signals.append(sig)
        if broker.open_position(sig, bar.close) is not None:
            last_entry = now

    last = m1[hi - 1]
    broker.close_all(last.close_time, last.close, record)
    result.final_balance = broker.account.balance
    result.trades = broker.trades
    result.rejections = broker.rejections
    result.equity_curve = broker.equity_curve
    return result

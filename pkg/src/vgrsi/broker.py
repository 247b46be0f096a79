"""Bar-level execution simulator with spread, commission and margin.

Balances are kept in integer cents so that the final balance equals the
initial balance plus the sum of realized PnL exactly.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from datetime import datetime

from .marketdata import Candle, InstrumentSpec, format_timestamp
from .signals import Direction, Signal


class ExitReason(str, enum.Enum):
    SL = "SL"
    TP = "TP"
    END_OF_WINDOW = "end_of_window"


def _cents(x: float) -> int:
    return int(round(x * 100))


@dataclass(eq=False)
class Position:
    direction: Direction
    entry_price: float
    volume_lots: float
    sl_price: float
    tp_price: float
    open_time: datetime
    margin_used: float
    distance_points: float = 0.0

    def gross_pnl(self, exit_price: float, contract_size: float) -> float:
        return (exit_price - self.entry_price) * self.direction.sign * self.volume_lots * contract_size


@dataclass(frozen=True)
class TradeRecord:
    direction: Direction
    entry_price: float
    volume_lots: float
    sl_price: float
    tp_price: float
    open_time: datetime
    margin_used: float
    exit_price: float
    exit_time: datetime
    exit_reason: ExitReason
    commission_paid: float
    realized_pnl: float

    CSV_COLUMNS = ("open_time", "close_time", "direction", "lots", "entry", "exit",
                   "sl", "tp", "reason", "commission", "pnl")

    def csv_row(self) -> list:
        return [format_timestamp(self.open_time), format_timestamp(self.exit_time),
                self.direction.value, f"{self.volume_lots:.2f}", repr(self.entry_price),
                repr(self.exit_price), repr(self.sl_price), repr(self.tp_price),
                self.exit_reason.value, f"{self.commission_paid:.2f}", f"{self.realized_pnl:.2f}"]


@dataclass(frozen=True)
class RejectedOrder:
    time: datetime
    direction: Direction
    reason: str


@dataclass(frozen=True)
class EquityPoint:
    time: datetime
    balance: float
    equity: float


@dataclass
class AccountState:
    balance_cents: int
    equity: float
    peak_equity: float
    leverage: float = 100.0
    open_positions: list = field(default_factory=list)

    @property
    def balance(self) -> float:
        return self.balance_cents / 100


class Broker:
    """Simulated account for one instrument.

    Prices fed to the broker are mid quotes; bid and ask sit half a spread
    below and above. Longs enter at the ask and exit at the bid, shorts the
    reverse. When a bar spans both SL and TP the SL is assumed first.
    """

    def __init__(self, spec: InstrumentSpec, initial_balance: float = 10_000.0,
                 leverage: float = 100.0, margin_budget: float = 1_000.0,
                 max_open_positions: int = 2, spread_points: float | None = None,
                 commission_per_lot: float | None = None):
        self.spec = spec
        self.initial_balance = initial_balance
        self.margin_budget = margin_budget
        self.max_open_positions = max_open_positions
        self.spread_points = spec.default_spread_points if spread_points is None else spread_points
        self.commission_per_lot = (spec.commission_per_lot if commission_per_lot is None
                                   else commission_per_lot)
        self.account = AccountState(_cents(initial_balance), initial_balance, initial_balance,
                                    leverage=leverage)
        self.trades: list[TradeRecord] = []
        self.rejections: list[RejectedOrder] = []
        self.equity_curve: list[EquityPoint] = []

    @property
    def half_spread(self) -> float:
        return self.spec.half_spread(self.spread_points)

    def quote(self, mid: float) -> tuple[float, float]:
        h = self.half_spread
        return mid - h, mid + h

    def lots_for(self, price: float) -> float:
        raw = self.margin_budget * self.account.leverage / (price * self.spec.contract_size)
        return math.floor(raw * 100 + 1e-9) / 100

    def open_position(self, signal: Signal, mid: float) -> Position | None:
        """Open a position for ``signal`` at the current quote, or record a rejection."""
        acct = self.account
        if len(acct.open_positions) >= self.max_open_positions:
            return self._reject(signal, "position cap reached")
        used = sum(p.margin_used for p in acct.open_positions)
        equity = acct.balance + self.unrealized(mid)
        if self.margin_budget <= 0 or equity - used < self.margin_budget:
            return self._reject(signal, "insufficient margin")
        bid, ask = self.quote(mid)
        long_ = signal.direction is Direction.LONG
        entry = ask if long_ else bid
        # sized on mid so that the spread never changes the volume
        lots = self.lots_for(mid)
        if lots <= 0:
            return self._reject(signal, "volume below 0.01 lot")
        sign = signal.direction.sign
        pos = Position(
            direction=signal.direction,
            entry_price=entry,
            volume_lots=lots,
            sl_price=entry - sign * signal.sl_distance_points * self.spec.point,
            tp_price=entry + sign * signal.tp_distance_points * self.spec.point,
            open_time=signal.time,
            margin_used=self.margin_budget,
            distance_points=signal.sl_distance_points,
        )
        acct.open_positions.append(pos)
        return pos

    def _reject(self, signal: Signal, reason: str) -> None:
        self.rejections.append(RejectedOrder(signal.time, signal.direction, reason))
        return None

    def commission(self, lots: float) -> float:
        return 2 * self.commission_per_lot * lots

    def _close(self, pos: Position, price: float, time: datetime, reason: ExitReason) -> TradeRecord:
        commission = self.commission(pos.volume_lots)
        pnl_cents = _cents(pos.gross_pnl(price, self.spec.contract_size) - commission)
        self.account.balance_cents += pnl_cents
        self.account.open_positions.remove(pos)
        rec = TradeRecord(pos.direction, pos.entry_price, pos.volume_lots, pos.sl_price,
                          pos.tp_price, pos.open_time, pos.margin_used, price, time, reason,
                          round(commission, 2), pnl_cents / 100)
        self.trades.append(rec)
        return rec

    def step_bar(self, bar: Candle, record: bool = True) -> list[TradeRecord]:
        """Resolve SL/TP touches inside ``bar`` and mark open positions to its close."""
        closed = []
        h = self.half_spread
        for pos in list(self.account.open_positions):
            if pos.direction is Direction.LONG:
                hit_sl = bar.low - h <= pos.sl_price
                hit_tp = bar.high - h >= pos.tp_price
            else:
                hit_sl = bar.high + h >= pos.sl_price
                hit_tp = bar.low + h <= pos.tp_price
            if hit_sl:
                closed.append(self._close(pos, pos.sl_price, bar.open_time, ExitReason.SL))
            elif hit_tp:
                closed.append(self._close(pos, pos.tp_price, bar.open_time, ExitReason.TP))
        self.mark(bar.close, bar.close_time, record)
        return closed

    def unrealized(self, mid: float) -> float:
        bid, ask = self.quote(mid)
        cs = self.spec.contract_size
        return sum(p.gross_pnl(bid if p.direction is Direction.LONG else ask, cs)
                   - self.commission(p.volume_lots) for p in self.account.open_positions)

    def mark(self, mid: float, time: datetime, record: bool = True) -> None:
        acct = self.account
        acct.equity = acct.balance + (self.unrealized(mid) if acct.open_positions else 0.0)
        if acct.equity > acct.peak_equity:
            acct.peak_equity = acct.equity
        if record:
            self.equity_curve.append(EquityPoint(time, acct.balance, acct.equity))

    def close_all(self, time: datetime, mid: float, record: bool = True) -> list[TradeRecord]:
        """Liquidate every open position at the current quote."""
        bid, ask = self.quote(mid)
        closed = [self._close(p, bid if p.direction is Direction.LONG else ask, time,
                              ExitReason.END_OF_WINDOW)
                  for p in list(self.account.open_positions)]
        self.mark(mid, time, record)
        return closed

    @property
    def realized_profit(self) -> float:
        return (self.account.balance_cents - _cents(self.initial_balance)) / 100


def write_trade_log(trades, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TradeRecord.CSV_COLUMNS)
        for t in trades:
            w.writerow(t.csv_row())


def write_equity_curve(points, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("timestamp", "balance", "equity"))
        for p in points:
            w.writerow((format_timestamp(p.time), f"{p.balance:.2f}", f"{p.equity:.2f}"))

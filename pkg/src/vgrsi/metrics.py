"""Per-window and aggregate performance statistics.

Drawdown is measured against the fixed initial portfolio, not the running
peak; Sharpe uses daily simple returns, zero risk-free rate and sqrt(252)
annualisation unless told otherwise.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
from dataclasses import asdict, dataclass
from datetime import date
from typing import Iterable, Sequence

from .broker import EquityPoint, TradeRecord
from .signals import Direction

TRADING_DAYS_PER_YEAR = 252


def max_drawdown(equity: Sequence[float], base: float = 10_000.0) -> float:
    """Largest peak-to-trough fall of ``equity`` in percent of ``base``."""
    if len(equity) == 0:
        raise ValueError("empty equity curve")
    peak = -math.inf
    worst = 0.0
    for x in equity:
        peak = max(peak, x)
        worst = max(worst, peak - x)
    return worst / base * 100


def sharpe(equity: Sequence[float], annualize: bool = True) -> float | None:
    """Sharpe ratio of daily equity samples; None when the returns do not vary."""
    if len(equity) < 2:
        raise ValueError("need at least two daily equity samples")
    returns = [b / a - 1 for a, b in zip(equity, equity[1:])]
    if len(returns) < 2:
        return None
    sd = statistics.stdev(returns)
    # equity ratios carry rounding noise around 1e-16
    if sd <= 1e-12:
        return None
    out = statistics.fmean(returns) / sd
    return out * math.sqrt(TRADING_DAYS_PER_YEAR) if annualize else out


def daily_equity(points: Iterable[EquityPoint], initial: float) -> list[float]:
    """Initial balance followed by the last equity of every calendar day."""
    by_day: dict[date, float] = {}
    for p in points:
        by_day[p.time.date()] = p.equity
    return [initial] + [by_day[d] for d in sorted(by_day)]


@dataclass(frozen=True)
class WindowStats:
    trades_all: int
    trades_long: int
    trades_short: int
    sharpe: float | None
    max_drawdown_pct: float
    profit: float

    def __post_init__(self):
        if self.trades_all != self.trades_long + self.trades_short:
            raise ValueError("trades_all must equal trades_long + trades_short")
        if self.max_drawdown_pct < 0:
            raise ValueError("max_drawdown_pct must be >= 0")


def window_stats(trades: Sequence[TradeRecord], equity: Sequence[EquityPoint],
                 initial: float = 10_000.0, annualize: bool = True) -> WindowStats:
    n_long = sum(t.direction is Direction.LONG for t in trades)
    curve = [initial] + [p.equity for p in equity]
    return WindowStats(
        trades_all=len(trades),
        trades_long=n_long,
        trades_short=len(trades) - n_long,
        sharpe=sharpe(daily_equity(equity, initial), annualize) if equity else None,
        max_drawdown_pct=max_drawdown(curve, initial),
        profit=round(sum(t.realized_pnl for t in trades), 2),
    )


@dataclass(frozen=True)
class Summary:
    windows: int
    trades_all: tuple[int, int, float]
    trades_long: tuple[int, int, float]
    trades_short: tuple[int, int, float]
    sharpe_mean: float | None
    max_drawdown_mean: float
    total_trades: int
    trading_days: int | None
    trades_per_day: float | None
    total_profit: float
    profit_per_day: float | None

    def as_dict(self) -> dict:
        return asdict(self)

    def table_row(self) -> dict:
        """Flat row with the columns of the usual summary table."""
        def mmm(x):
            return f"{x[0]} / {x[1]} / {x[2]:.1f}"
        return {
            "all_trades_min_max_mean": mmm(self.trades_all),
            "long_trades_min_max_mean": mmm(self.trades_long),
            "short_trades_min_max_mean": mmm(self.trades_short),
            "sharpe_mean": "" if self.sharpe_mean is None else f"{self.sharpe_mean:.2f}",
            "max_drawdown_pct_mean": f"{self.max_drawdown_mean:.2f}",
            "total_trades": self.total_trades,
            "trades_per_day": "" if self.trades_per_day is None else f"{self.trades_per_day:.2f}",
            "total_profit": f"{self.total_profit:.2f}",
        }


def _min_max_mean(xs: Sequence[int]) -> tuple[int, int, float]:
    return min(xs), max(xs), sum(xs) / len(xs)


def aggregate(stats: Sequence[WindowStats], trading_days: int | None = None) -> Summary:
    """Min/max/mean of per-window activity plus totals.

    ``trading_days`` is the number of distinct calendar dates with data;
    per-day quotients are omitted without it.
    """
    stats = [getattr(s, "stats", s) for s in stats]
    if not stats:
        raise ValueError("aggregate needs at least one window")
    total_trades = sum(s.trades_all for s in stats)
    total_profit = math.fsum(s.profit for s in stats)
    sharpes = [s.sharpe for s in stats if s.sharpe is not None]
    return Summary(
        windows=len(stats),
        trades_all=_min_max_mean([s.trades_all for s in stats]),
        trades_long=_min_max_mean([s.trades_long for s in stats]),
        trades_short=_min_max_mean([s.trades_short for s in stats]),
        sharpe_mean=statistics.fmean(sharpes) if sharpes else None,
        max_drawdown_mean=statistics.fmean(s.max_drawdown_pct for s in stats),
        total_trades=total_trades,
        trading_days=trading_days,
        trades_per_day=total_trades / trading_days if trading_days else None,
        total_profit=total_profit,
        profit_per_day=total_profit / trading_days if trading_days else None,
    )


def trading_days(timestamps: Iterable) -> int:
    return len({t.date() for t in timestamps})


def write_summary(summary: Summary, csv_path=None, json_path=None) -> None:
    if csv_path is not None:
        row = summary.table_row()
        with open(csv_path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(row), lineterminator="\n")
            w.writeheader()
            w.writerow(row)
    if json_path is not None:
        with open(json_path, "w") as fh:
            json.dump(summary.as_dict(), fh, indent=2)

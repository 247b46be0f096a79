"""Rolling in-sample optimisation / out-of-sample trading protocol.

Each window searches StrategyParams on ``train_days`` of history, trades the
winner on the following ``trade_days`` and then shifts by ``step_days``.
Every window starts from a fresh account; cumulative profit is tracked
separately as the running sum of out-of-sample profits.
"""

from __future__ import annotations

import hashlib
import itertools
import logging
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Iterator, Sequence

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator

from .backtest import BacktestResult, MarketView, run_backtest
from .broker import EquityPoint, TradeRecord
from .indicator import VgrsiParams
from .marketdata import Candle, InstrumentSpec, format_timestamp, to_arrays
from .metrics import WindowStats, aggregate, trading_days, window_stats
from .signals import TIMEFRAMES, StrategyParams

log = logging.getLogger(__name__)


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class SearchSpace:
    """Ranges (inclusive) and grid steps of the searched parameters."""

    window_range: tuple[int, int] = (10, 200)
    window_step: int = 10
    variants: tuple[str, ...] = ("A0", "A1")
    buy_range: tuple[float, float] = (20, 35)
    sell_range: tuple[float, float] = (70, 95)
    threshold_step: float = 5
    lookback_range: tuple[int, int] = (10, 100)
    lookback_step: int = 10
    multiplier_range: tuple[float, float] = (1, 10)
    multiplier_step: float = 1
    min_entry_gap_minutes: float = 30
    max_open_positions: int = 2
    short_cross_direction: str = "down"

    @property
    def max_window(self) -> int:
        return self.window_range[1]

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SearchSpace":
        d = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        return cls(**d)


@dataclass(frozen=True)
class WalkForwardConfig:
    train_days: int = 30
    trade_days: int = 7
    step_days: int = 7
    search: str = "random"
    search_budget: int = 50
    seed: int = 0
    n_jobs: int = 1
    space: SearchSpace = field(default_factory=SearchSpace)

    def __post_init__(self):
        if self.search not in ("grid", "random"):
            raise ValueError("search must be 'grid' or 'random'")
        if self.search_budget < 1:
            raise ValueError("search_budget must be >= 1")
        if min(self.train_days, self.trade_days, self.step_days) < 1:
            raise ValueError("window lengths must be positive")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["space"] = self.space.as_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "WalkForwardConfig":
        d = dict(d)
        space = SearchSpace.from_dict(d.pop("space", {}))
        return cls(space=space, **d)


def _steps(lo, hi, step):
    out = []
    k = 0
    while lo + k * step <= hi + 1e-9:
        out.append(lo + k * step)
        k += 1
    return out


def _strategy(space: SearchSpace, vg: dict, buy, sell, lookback, mult) -> StrategyParams:
    return StrategyParams(
        vgrsi=vg,
        buy_threshold=float(buy),
        sell_threshold=float(sell),
        sl_tp_lookback=int(lookback),
        sl_tp_multiplier=float(mult),
        min_entry_gap=timedelta(minutes=space.min_entry_gap_minutes),
        max_open_positions=space.max_open_positions,
        short_cross_direction=space.short_cross_direction,
    )


def _grid_axes(space: SearchSpace) -> list[list]:
    win = _steps(*space.window_range, space.window_step)
    return [win, win, list(space.variants),
            _steps(*space.buy_range, space.threshold_step),
            _steps(*space.sell_range, space.threshold_step),
            _steps(*space.lookback_range, space.lookback_step),
            _steps(*space.multiplier_range, space.multiplier_step)]


def grid_size(space: SearchSpace) -> int:
    return int(np.prod([len(a) for a in _grid_axes(space)]))


def _grid_point(space: SearchSpace, axes, flat: int) -> StrategyParams:
    idx = np.unravel_index(flat, [len(a) for a in axes])
    ws, wv, var, buy, sell, lb, z = (a[int(k)] for a, k in zip(axes, idx))
    vg = {tf: VgrsiParams(int(ws), int(wv), var) for tf in TIMEFRAMES}
    return _strategy(space, vg, buy, sell, lb, z)


def parameter_space(config: WalkForwardConfig) -> Iterator[StrategyParams]:
    """Candidate StrategyParams for one window, in evaluation order.

    Grid mode shares one (W_S, W_V, variant) across timeframes and, when the
    grid exceeds ``search_budget``, walks it with an even stride. Random mode
    draws ``search_budget`` candidates with independent per-timeframe windows.
    """
    space = config.space
    if config.search == "grid":
        axes = _grid_axes(space)
        size = grid_size(space)
        if size <= config.search_budget:
            flats = range(size)
        else:
            b = config.search_budget
            flats = [0] if b == 1 else sorted({round(k * (size - 1) / (b - 1)) for k in range(b)})
        for flat in flats:
            yield _grid_point(space, axes, flat)
        return

    rng = np.random.default_rng(config.seed)
    lo, hi = space.window_range
    for _ in range(config.search_budget):
        variant = space.variants[int(rng.integers(len(space.variants)))]
        vg = {tf: VgrsiParams(int(rng.integers(lo, hi + 1)), int(rng.integers(lo, hi + 1)), variant)
              for tf in TIMEFRAMES}
        buy = rng.integers(int(space.buy_range[0]), int(space.buy_range[1]) + 1)
        sell = rng.integers(int(space.sell_range[0]), int(space.sell_range[1]) + 1)
        lb = rng.integers(space.lookback_range[0], space.lookback_range[1] + 1)
        z = rng.integers(int(space.multiplier_range[0]), int(space.multiplier_range[1]) + 1)
        yield _strategy(space, vg, buy, sell, lb, z)


@dataclass(frozen=True)
class Evaluation:
    params: StrategyParams
    profit: float
    n_trades: int
    defined: bool


def _has_defined(view: MarketView, params: StrategyParams, lo: int, hi: int) -> bool:
    for tf in TIMEFRAMES:
        v = view.indicator(tf, params.vgrsi[tf])
        idx = view.latest[tf][lo:hi]
        idx = idx[idx >= 0]
        if idx.size == 0 or np.all(np.isnan(v[idx])):
            return False
    return True


def _evaluate(view: MarketView, candidates, start, end, broker_kwargs) -> list[Evaluation]:
    lo, hi = view.index_range(start, end)
    out = []
    for p in candidates:
        res = run_backtest(view, p, start, end, record=False, **broker_kwargs)
        out.append(Evaluation(p, res.profit, res.n_trades, _has_defined(view, p, lo, hi)))
    return out


def optimize_window(view: MarketView, space: Sequence[StrategyParams], start: datetime,
                    end: datetime, label: str = "", n_jobs: int = 1,
                    **broker_kwargs) -> tuple[StrategyParams, list[Evaluation]]:
    """Pick the candidate with the highest in-sample profit on ``[start, end)``.

    Ties go to fewer trades, then to the earlier candidate. ``view`` may
    contain bars before ``start``; they only warm up the indicators.
    """
    candidates = list(space)
    if not candidates:
        raise ValueError("empty parameter space")
    if n_jobs == 1:
        evals = _evaluate(view, candidates, start, end, broker_kwargs)
    else:
        chunks = [candidates[k::n_jobs] for k in range(n_jobs)]
        parts = Parallel(n_jobs=n_jobs)(
            delayed(_evaluate)(view, c, start, end, broker_kwargs) for c in chunks)
        # undo the round-robin split to restore enumeration order
        evals = [None] * len(candidates)
        for k, part in enumerate(parts):
            for m, e in enumerate(part):
                evals[k + m * n_jobs] = e
    if not any(e.defined for e in evals):
        raise InsufficientDataError(f"window {label or start}: no candidate yields a defined VGRSI value")
    best = min(range(len(evals)), key=lambda k: (-evals[k].profit, evals[k].n_trades, k))
    return evals[best].params, evals


@dataclass
class WindowResult:
    index: int
    train_start: datetime
    trade_start: datetime
    trade_end: datetime
    params: StrategyParams
    in_sample_profit: float
    in_sample_trades: int
    out_of_sample_profit: float
    stats: WindowStats
    trades: list[TradeRecord] = field(default_factory=list, repr=False)
    equity_curve: list[EquityPoint] = field(default_factory=list, repr=False)

    def as_dict(self) -> dict:
        return {
            "index": self.index,
            "train_start": format_timestamp(self.train_start),
            "trade_start": format_timestamp(self.trade_start),
            "trade_end": format_timestamp(self.trade_end),
            "params": self.params.as_dict(),
            "in_sample_profit": self.in_sample_profit,
            "in_sample_trades": self.in_sample_trades,
            "out_of_sample_profit": self.out_of_sample_profit,
            "trades_all": self.stats.trades_all,
            "trades_long": self.stats.trades_long,
            "trades_short": self.stats.trades_short,
            "sharpe": self.stats.sharpe,
            "max_drawdown_pct": self.stats.max_drawdown_pct,
        }


@dataclass
class WalkForwardResult:
    windows: list[WindowResult]
    cumulative_profit: list[float]
    trading_days: int

    def summary(self):
        return aggregate([w.stats for w in self.windows], self.trading_days)


def window_bounds(first: datetime, last: datetime, config: WalkForwardConfig) -> list[tuple]:
    """``(train_start, trade_start, trade_end)`` per window, in calendar days from midnight UTC."""
    origin = datetime(first.year, first.month, first.day, tzinfo=timezone.utc)
    horizon = datetime(last.year, last.month, last.day, tzinfo=timezone.utc) + timedelta(days=1)
    out = []
    k = 0
    while True:
        s = origin + timedelta(days=k * config.step_days)
        t0 = s + timedelta(days=config.train_days)
        t1 = t0 + timedelta(days=config.trade_days)
        if t1 > horizon:
            break
        out.append((s, t0, t1))
        k += 1
    return out


def warmup_minutes(space: SearchSpace) -> int:
    # enough M30 bars for the largest window plus its visibility range
    return 30 * (2 * space.max_window + 2)


def _slice(m1: Sequence[Candle], times: np.ndarray, start: datetime, end: datetime) -> list[Candle]:
    lo = int(np.searchsorted(times, int(start.timestamp()), "left"))
    hi = int(np.searchsorted(times, int(end.timestamp()), "left"))
    return m1[lo:hi]


def data_fingerprint(m1: Sequence[Candle]) -> str:
    arr = to_arrays(m1)
    h = hashlib.sha256()
    for col in (arr.open_time, arr.open, arr.high, arr.low, arr.close, arr.volume):
        h.update(np.ascontiguousarray(col).tobytes())
    return h.hexdigest()


def run(m1: Sequence[Candle], config: WalkForwardConfig, spec: InstrumentSpec,
        **broker_kwargs) -> WalkForwardResult:
    """Run every walk-forward window over an M1 history."""
    m1 = list(m1)
    if not m1:
        raise InsufficientDataError("empty history")
    bounds = window_bounds(m1[0].open_time, m1[-1].open_time, config)
    if not bounds:
        raise InsufficientDataError(
            f"history shorter than train_days + trade_days = {config.train_days + config.trade_days}")
    times = to_arrays(m1).open_time
    candidates = list(parameter_space(config))
    warm = timedelta(minutes=warmup_minutes(config.space))

    windows = []
    for k, (s, t0, t1) in enumerate(bounds):
        train_view = MarketView(_slice(m1, times, s - warm, t0), spec)
        best, evals = optimize_window(train_view, candidates, s, t0, label=str(k),
                                      n_jobs=config.n_jobs, **broker_kwargs)
        chosen = next(e for e in evals if e.params is best)
        trade_slice = _slice(m1, times, t0 - warm, t1)
        if trade_slice:
            res = run_backtest(MarketView(trade_slice, spec), best, t0, t1, **broker_kwargs)
        else:
            res = BacktestResult(best, 10_000.0, 10_000.0)
        stats = window_stats(res.trades, res.equity_curve, res.initial_balance)
        log.info("window %d %s..%s in-sample %.2f out-of-sample %.2f (%d trades)",
                 k, t0.date(), t1.date(), chosen.profit, res.profit, res.n_trades)
        windows.append(WindowResult(k, s, t0, t1, best, chosen.profit, chosen.n_trades,
                                    res.profit, stats, res.trades, res.equity_curve))

    cumulative = list(itertools.accumulate(w.out_of_sample_profit for w in windows))
    traded = [c.open_time for c in m1 if bounds[0][1] <= c.open_time < bounds[-1][2]]
    return WalkForwardResult(windows, cumulative, trading_days(traded))


class WalkForwardOptimizer(BaseEstimator):
    """Estimator wrapper around :func:`run`.

    ``fit`` takes an M1 candle history and stores the per-window results;
    ``best_params_`` holds the parameters chosen for the latest window.
    """

    def __init__(self, spec=None, train_days=30, trade_days=7, step_days=7, search="random",
                 search_budget=50, seed=0, n_jobs=1, space=None):
        self.spec = spec
        self.train_days = train_days
        self.trade_days = trade_days
        self.step_days = step_days
        self.search = search
        self.search_budget = search_budget
        self.seed = seed
        self.n_jobs = n_jobs
        self.space = space

    def _config(self) -> WalkForwardConfig:
        return WalkForwardConfig(self.train_days, self.trade_days, self.step_days, self.search,
                                 self.search_budget, self.seed, self.n_jobs,
                                 self.space or SearchSpace())

    def fit(self, X, y=None):
        if self.spec is None:
            raise ValueError("an InstrumentSpec is required")
        result = run(X, self._config(), self.spec)
        self.result_ = result
        self.windows_ = result.windows
        self.cumulative_profit_ = result.cumulative_profit
        self.best_params_ = result.windows[-1].params
        return self

    def predict(self, X):
        """Signals the latest chosen parameters would emit on the M1 history ``X``."""
        from sklearn.utils.validation import check_is_fitted
        check_is_fitted(self, "best_params_")
        return run_backtest(MarketView(list(X), self.spec), self.best_params_).signals

    def score(self, X, y=None) -> float:
        """Profit of the latest chosen parameters traded over ``X``."""
        from sklearn.utils.validation import check_is_fitted
        check_is_fitted(self, "best_params_")
        return run_backtest(MarketView(list(X), self.spec), self.best_params_, record=False).profit

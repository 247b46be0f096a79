"""Visibility-graph RSI indicator and a walk-forward trading harness."""

from .backtest import BacktestResult, MarketView, run_backtest
from .broker import Broker, ExitReason, Position, TradeRecord
from .indicator import (VGRSI, Variant, VgrsiComponents, VgrsiParams, WarmupError, components_at,
                        rolling, rolling_values)
from .marketdata import (Candle, InstrumentSpec, MarketDataError, PriceSeries, Timeframe, load_csv,
                         load_instrument, resample, write_csv)
from .metrics import Summary, WindowStats, aggregate, max_drawdown, sharpe
from .signals import Direction, Signal, StrategyParams, crossing, evaluate_entry, sl_tp_distance
from .visibility import VisibleSet, visible_fast, visible_oracle
from .walkforward import (InsufficientDataError, SearchSpace, WalkForwardConfig,
                          WalkForwardOptimizer, WalkForwardResult, optimize_window, run)

__version__ = "0.1.0"

__all__ = [
    "BacktestResult", "Broker", "Candle", "Direction", "ExitReason", "InstrumentSpec",
    "InsufficientDataError", "MarketDataError", "MarketView", "Position", "PriceSeries",
    "SearchSpace", "Signal", "StrategyParams", "Summary", "Timeframe", "TradeRecord", "VGRSI",
    "Variant", "VgrsiComponents", "VgrsiParams", "VisibleSet", "WalkForwardConfig",
    "WalkForwardOptimizer", "WalkForwardResult", "WarmupError", "WindowStats", "aggregate",
    "components_at", "crossing", "evaluate_entry", "load_csv", "load_instrument", "max_drawdown",
    "optimize_window", "resample", "rolling", "rolling_values", "run", "run_backtest", "sharpe",
    "sl_tp_distance", "visible_fast", "visible_oracle", "write_csv",
]

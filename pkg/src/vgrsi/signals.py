"""Multi-timeframe threshold crossings and SL/TP sizing."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Mapping, Sequence

import numpy as np

from .indicator import VgrsiParams
from .marketdata import Candle, InstrumentSpec, Timeframe, format_timestamp

TIMEFRAMES = (Timeframe.M1, Timeframe.M5, Timeframe.M30)


class Direction(str, enum.Enum):
    LONG = "long"
    SHORT = "short"

    @property
    def sign(self) -> int:
        return 1 if self is Direction.LONG else -1


@dataclass(frozen=True)
class StrategyParams:
    """Full trading configuration evaluated by the backtester.

    ``short_cross_direction`` selects how the sell threshold is crossed:
    ``"down"`` (falling back from overbought) or ``"up"`` (entering it).
    """

    vgrsi: Mapping[Timeframe, VgrsiParams]
    buy_threshold: float = 30.0
    sell_threshold: float = 80.0
    sl_tp_lookback: int = 20
    sl_tp_multiplier: float = 3.0
    min_entry_gap: timedelta = timedelta(minutes=30)
    max_open_positions: int = 2
    short_cross_direction: str = "down"

    def __post_init__(self):
        vg = {Timeframe(k): v for k, v in dict(self.vgrsi).items()}
        missing = [tf.value for tf in TIMEFRAMES if tf not in vg]
        if missing:
            raise ValueError(f"missing VGRSI parameters for {missing}")
        object.__setattr__(self, "vgrsi", {tf: vg[tf] for tf in TIMEFRAMES})
        if not self.buy_threshold < self.sell_threshold:
            raise ValueError("buy_threshold must be below sell_threshold")
        if self.sl_tp_lookback < 1 or not self.sl_tp_multiplier > 0:
            raise ValueError("sl_tp_lookback and sl_tp_multiplier must be positive")
        if self.max_open_positions < 1:
            raise ValueError("max_open_positions must be >= 1")
        if self.short_cross_direction not in ("down", "up"):
            raise ValueError("short_cross_direction must be 'down' or 'up'")

    def __hash__(self):
        return hash(json.dumps(self.as_dict(), sort_keys=True))

    @property
    def max_window(self) -> int:
        return max(max(p.window_size, p.window_visibility) for p in self.vgrsi.values())

    def as_dict(self) -> dict:
        return {
            "vgrsi": {tf.value: p.as_dict() for tf, p in self.vgrsi.items()},
            "buy_threshold": self.buy_threshold,
            "sell_threshold": self.sell_threshold,
            "sl_tp_lookback": self.sl_tp_lookback,
            "sl_tp_multiplier": self.sl_tp_multiplier,
            "min_entry_gap_minutes": self.min_entry_gap.total_seconds() / 60,
            "max_open_positions": self.max_open_positions,
            "short_cross_direction": self.short_cross_direction,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "StrategyParams":
        d = dict(d)
        vg = d.pop("vgrsi")
        if "window_size" in vg:  # one set shared by all timeframes
            vg = {tf.value: vg for tf in TIMEFRAMES}
        gap = d.pop("min_entry_gap_minutes", 30)
        return cls(vgrsi={Timeframe(k): VgrsiParams(**v) for k, v in vg.items()},
                   min_entry_gap=timedelta(minutes=gap), **d)


@dataclass(frozen=True)
class Signal:
    time: datetime
    direction: Direction
    sl_distance_points: float
    tp_distance_points: float
    snapshot: dict = field(default_factory=dict)
    buy_threshold: float | None = None
    sell_threshold: float | None = None

    def to_json(self) -> str:
        return json.dumps({
            "time": format_timestamp(self.time),
            "direction": self.direction.value,
            "buy_threshold": self.buy_threshold,
            "sell_threshold": self.sell_threshold,
            "vgrsi": {str(getattr(k, "value", k)): v for k, v in self.snapshot.items()},
            "sl_points": self.sl_distance_points,
            "tp_points": self.tp_distance_points,
        })


def _defined(x) -> bool:
    return x is not None and not (isinstance(x, float) and math.isnan(x))


def crossing(prev, curr, threshold: float, direction: str = "down") -> bool:
    """True when the value passes ``threshold`` between two consecutive bars.

    ``direction="down"`` means ``prev > threshold >= curr``; ``"up"`` the
    mirror image. Undefined inputs never cross.
    """
    if not (_defined(prev) and _defined(curr)):
        return False
    if direction == "down":
        return prev > threshold and curr <= threshold
    return prev < threshold and curr >= threshold


def evaluate_entry(state: Mapping[Timeframe, tuple], params: StrategyParams, open_count: int,
                   last_entry: datetime | None, now: datetime,
                   distance_points: float = 1.0) -> Signal | None:
    """Return an entry signal when every timeframe crosses the same threshold.

    ``state`` maps each timeframe to the ``(prev, curr)`` values of its most
    recent completed bar. A long needs a downward cross of the buy threshold
    on M1, M5 and M30 alike; a short the configured cross of the sell
    threshold. Entries are suppressed at the position cap, inside the
    minimum gap after the previous entry, or when both directions fire.
    """
    if open_count >= params.max_open_positions:
        return None
    if last_entry is not None and now - last_entry < params.min_entry_gap:
        return None
    pairs = [state.get(tf, (None, None)) for tf in TIMEFRAMES]
    long_ = all(crossing(a, b, params.buy_threshold, "down") for a, b in pairs)
    short = all(crossing(a, b, params.sell_threshold, params.short_cross_direction)
                for a, b in pairs)
    if long_ == short:
        return None
    return Signal(
        time=now,
        direction=Direction.LONG if long_ else Direction.SHORT,
        sl_distance_points=distance_points,
        tp_distance_points=distance_points,
        snapshot={tf.value: _snapshot_value(state[tf][1]) for tf in TIMEFRAMES},
        buy_threshold=params.buy_threshold,
        sell_threshold=params.sell_threshold,
    )


def _snapshot_value(v):
    return float(v) if _defined(v) else None


def median_height_points(recent_candles: Sequence[Candle], n: int, spec: InstrumentSpec) -> float:
    if len(recent_candles) < n:
        raise ValueError(f"need {n} candles for SL/TP sizing, got {len(recent_candles)}")
    heights = [(c.high - c.low) / spec.point for c in recent_candles[-n:]]
    return float(np.median(heights))


def sl_tp_distance(recent_candles: Sequence[Candle], n: int, z: float, spec: InstrumentSpec) -> int:
    """Median high-low range of the last ``n`` candles, in points, times ``z``.

    Rounded half-up to whole points and never below one point.
    """
    raw = median_height_points(recent_candles, n, spec) * z
    # guard against 14.999999 from price -> point conversion
    return max(1, int(math.floor(raw + 0.5 + 1e-9)))


def write_signals(signals: Sequence[Signal], path) -> None:
    with open(path, "w") as fh:
        for s in signals:
            fh.write(s.to_json() + "\n")

"""OHLCV ingestion, instrument conventions and M1 -> M5/M30 resampling."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml

CSV_HEADER = ("timestamp", "open", "high", "low", "close", "volume")


class MarketDataError(ValueError):
    """Base class for ingestion and validation failures."""


class CsvFormatError(MarketDataError):
    pass


class CandleValidationError(MarketDataError):
    pass


class DuplicateTimestampError(MarketDataError):
    pass


class Timeframe(str, enum.Enum):
    M1 = "M1"
    M5 = "M5"
    M30 = "M30"

    @property
    def minutes(self) -> int:
        return int(self.value[1:])

    @property
    def delta(self) -> timedelta:
        return timedelta(minutes=self.minutes)


@dataclass(frozen=True)
class InstrumentSpec:
    """Static trading conventions of one instrument.

    ``point`` is the price increment of one point, ``contract_size`` the
    number of units in one lot. Commission is charged per lot and per side
    in account currency; the quote currency is assumed to be the account
    currency.
    """

    symbol: str
    point: float
    contract_size: float
    quote_currency: str = "USD"
    commission_per_lot: float = 0.0
    default_spread_points: int = 0

    def __post_init__(self):
        if not self.point > 0:
            raise ValueError(f"point must be > 0, got {self.point}")
        if not self.contract_size > 0:
            raise ValueError(f"contract_size must be > 0, got {self.contract_size}")
        if self.default_spread_points < 0:
            raise ValueError("default_spread_points must be >= 0")
        if self.commission_per_lot < 0:
            raise ValueError("commission_per_lot must be >= 0")

    def half_spread(self, spread_points: float | None = None) -> float:
        pts = self.default_spread_points if spread_points is None else spread_points
        return pts * self.point / 2.0

    def bid(self, mid: float, spread_points: float | None = None) -> float:
        return mid - self.half_spread(spread_points)

    def ask(self, mid: float, spread_points: float | None = None) -> float:
        return mid + self.half_spread(spread_points)

    def to_points(self, price_distance: float) -> float:
        return price_distance / self.point

    @classmethod
    def from_mapping(cls, mapping: dict) -> "InstrumentSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(mapping) - known
        if unknown:
            raise ValueError(f"unknown instrument fields: {sorted(unknown)}")
        return cls(**mapping)


def load_instrument(path: str | Path) -> InstrumentSpec:
    """Read an InstrumentSpec from a YAML document.

    The fields may sit at the top level or under an ``instrument`` key.
    """
    with open(path) as fh:
        doc = yaml.safe_load(fh) or {}
    if "instrument" in doc:
        doc = doc["instrument"]
    return InstrumentSpec.from_mapping(doc)


EURUSD = InstrumentSpec("EURUSD", point=0.00001, contract_size=100_000,
                        commission_per_lot=3.5, default_spread_points=10)


@dataclass(frozen=True, slots=True)
class Candle:
    open_time: datetime
    timeframe: Timeframe
    open: float
    high: float
    low: float
    close: float
    volume: float = 0.0

    def __post_init__(self):
        errors = _ohlc_errors(self.open, self.high, self.low, self.close, self.volume)
        if errors:
            raise CandleValidationError(f"{self.open_time.isoformat()}: {errors}")

    @property
    def close_time(self) -> datetime:
        return self.open_time + self.timeframe.delta


def _ohlc_errors(o, h, l, c, v) -> str:
    vals = (o, h, l, c)
    if not all(math.isfinite(x) for x in vals):
        return "non-finite price"
    if l > h:
        return f"low {l} > high {h}"
    if l > min(o, c):
        return f"low {l} above min(open, close)"
    if h < max(o, c):
        return f"high {h} below max(open, close)"
    if not v >= 0:
        return f"negative volume {v}"
    return ""


@dataclass(frozen=True)
class PriceSeries:
    """Ordered prices of one timeframe with their bar timestamps."""

    prices: np.ndarray
    timeframe: Timeframe = Timeframe.M1
    timestamps: tuple = field(default=())

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=np.float64)
        if prices.ndim != 1:
            raise ValueError("prices must be one-dimensional")
        if not np.all(np.isfinite(prices)) or np.any(prices <= 0):
            raise ValueError("prices must be finite and > 0")
        ts = tuple(self.timestamps)
        if ts:
            if len(ts) != len(prices):
                raise ValueError("timestamps and prices differ in length")
            if any(b <= a for a, b in zip(ts, ts[1:])):
                raise ValueError("timestamps must be strictly increasing")
        prices.setflags(write=False)
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "timestamps", ts)

    def __len__(self) -> int:
        return len(self.prices)


def parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def load_csv(path: str | Path, spec: InstrumentSpec | None = None,
             timeframe: Timeframe | str = Timeframe.M1) -> list[Candle]:
    """Load ``timestamp,open,high,low,close,volume`` rows as validated candles.

    Rows may come in any order; they are sorted by timestamp. Gaps are kept
    as is. ``spec`` is accepted so that callers can pass their instrument
    along; prices are not rescaled.
    """
    timeframe = Timeframe(timeframe)
    candles = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip().lower() for h in header) != CSV_HEADER:
            raise CsvFormatError(f"{path}: line 1: expected header {','.join(CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(CSV_HEADER):
                raise CsvFormatError(f"{path}: line {lineno}: expected 6 fields, got {len(row)}")
            try:
                ts = parse_timestamp(row[0])
                o, h, l, c, v = (float(x) for x in row[1:])
            except ValueError as exc:
                raise CsvFormatError(f"{path}: line {lineno}: {exc}") from None
            errors = _ohlc_errors(o, h, l, c, v)
            if errors:
                raise CandleValidationError(f"{path}: line {lineno}: {errors}")
            candles.append((ts, lineno, Candle(ts, timeframe, o, h, l, c, v)))

    candles.sort(key=lambda item: item[0])
    for (t0, line0, _), (t1, line1, _) in zip(candles, candles[1:]):
        if t0 == t1:
            raise DuplicateTimestampError(
                f"{path}: lines {line0} and {line1}: duplicate timestamp {format_timestamp(t0)}")
    return [c for _, _, c in candles]


def write_csv(candles: Iterable[Candle], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for c in candles:
            writer.writerow([format_timestamp(c.open_time), repr(float(c.open)), repr(float(c.high)),
                             repr(float(c.low)), repr(float(c.close)), repr(float(c.volume))])


def _epoch_minutes(ts: datetime) -> int:
    return int(ts.timestamp()) // 60


def resample(candles: Sequence[Candle], target: Timeframe | str,
             partial: bool = False) -> list[Candle]:
    """Aggregate M1 candles into ``target`` bars aligned on midnight UTC.

    A window is emitted when a later window has data or when its last
    minute is present; the trailing incomplete window only with ``partial``.
    Missing minutes inside a window are not filled.
    """
    target = Timeframe(target)
    if target is Timeframe.M1:
        raise ValueError("target must be M5 or M30")
    width = target.minutes
    groups: list[list[Candle]] = []
    keys: list[int] = []
    prev = None
    for c in candles:
        if c.timeframe is not Timeframe.M1:
            raise ValueError(f"resample expects M1 input, got {c.timeframe.value}")
        m = _epoch_minutes(c.open_time)
        if prev is not None and m <= prev:
            raise ValueError(f"input not sorted at {format_timestamp(c.open_time)}")
        prev = m
        key = m - m % width
        if not keys or keys[-1] != key:
            keys.append(key)
            groups.append([])
        groups[-1].append(c)

    if groups and not partial:
        last = groups[-1][-1]
        if _epoch_minutes(last.open_time) != keys[-1] + width - 1:
            groups.pop()
            keys.pop()

    out = []
    for key, bars in zip(keys, groups):
        out.append(Candle(
            open_time=datetime.fromtimestamp(key * 60, tz=timezone.utc),
            timeframe=target,
            open=bars[0].open,
            high=max(b.high for b in bars),
            low=min(b.low for b in bars),
            close=bars[-1].close,
            volume=sum(b.volume for b in bars),
        ))
    return out


def close_series(candles: Sequence[Candle], source: str = "mid",
                 spec: InstrumentSpec | None = None) -> PriceSeries:
    """Project candles onto their close prices.

    CSV prices are taken as mid quotes; ``source="bid"`` or ``"ask"`` shifts
    them by half the instrument's default spread.
    """
    if len(candles) == 0:
        raise ValueError("close_series needs at least one candle")
    closes = np.fromiter((c.close for c in candles), dtype=np.float64, count=len(candles))
    if source == "bid" or source == "ask":
        if spec is None:
            raise ValueError(f"source={source!r} needs an InstrumentSpec")
        closes = closes - spec.half_spread() if source == "bid" else closes + spec.half_spread()
    elif source != "mid":
        raise ValueError(f"unknown price source {source!r}")
    return PriceSeries(closes, candles[0].timeframe, tuple(c.open_time for c in candles))


@dataclass(frozen=True)
class BarArrays:
    """Column view of a candle list, timestamps as epoch seconds of bar open."""

    open_time: np.ndarray
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray
    volume: np.ndarray
    timeframe: Timeframe

    def __len__(self) -> int:
        return len(self.close)

    @property
    def close_time(self) -> np.ndarray:
        return self.open_time + 60 * self.timeframe.minutes


def to_arrays(candles: Sequence[Candle]) -> BarArrays:
    n = len(candles)
    tf = candles[0].timeframe if n else Timeframe.M1

    def col(name, dtype=np.float64):
        return np.fromiter((getattr(c, name) for c in candles), dtype=dtype, count=n)

    times = np.fromiter((int(c.open_time.timestamp()) for c in candles), dtype=np.int64, count=n)
    return BarArrays(times, col("open"), col("high"), col("low"), col("close"), col("volume"), tf)

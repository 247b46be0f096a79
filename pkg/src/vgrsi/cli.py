"""Command-line entry point: ``vgrsi {indicator,backtest,walkforward,report}``.

Every subcommand reads one YAML config with top-level ``data``,
``instrument``, ``out`` and ``seed`` keys plus a section named after the
subcommand; command-line flags override file values. Each output directory
receives a ``manifest.json`` holding the resolved config, the seed and a
content hash of the input data.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .backtest import MarketView, run_backtest
from .broker import TradeRecord, write_equity_curve, write_trade_log
from .indicator import VgrsiParams, rolling_values, to_point_units
from .marketdata import (InstrumentSpec, Timeframe, close_series, format_timestamp, load_csv,
                         load_instrument, parse_timestamp, resample)
from .metrics import WindowStats, aggregate, window_stats, write_summary
from .signals import TIMEFRAMES, StrategyParams, write_signals
from .walkforward import WalkForwardConfig, data_fingerprint, run

log = logging.getLogger("vgrsi")

BROKER_KEYS = ("initial_balance", "leverage", "margin_budget", "spread_points",
               "commission_per_lot")
DEFAULT_STRATEGY = {"vgrsi": {"window_size": 35, "window_visibility": 35, "variant": "A0"}}


class ConfigError(ValueError):
    pass


def _load_yaml(path: Path) -> dict:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    return doc


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge the config file section with command-line overrides.

    Relative paths in the file are taken relative to the file's directory.
    """
    doc, base = {}, Path.cwd()
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        doc, base = _load_yaml(path), path.parent
    section = doc.get(args.command) or {}
    if not isinstance(section, dict):
        raise ConfigError(f"section {args.command!r} must be a mapping")
    cfg = {k: v for k, v in doc.items() if k not in ("indicator", "backtest", "walkforward", "report")}
    cfg.update(section)
    paths = ("data", "instrument", "input", "manifest")
    for key in paths:
        if isinstance(cfg.get(key), str):
            cfg[key] = str((base / cfg[key]).resolve())
    for key in paths + ("out", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = str(Path(value).resolve()) if key in paths else value
    cfg.setdefault("seed", 0)
    if cfg.get("out") is None:
        raise ConfigError("no output directory: pass --out or set 'out' in the config")
    return cfg


def _instrument(cfg: dict) -> InstrumentSpec:
    ref = cfg.get("instrument")
    if ref is None:
        raise ConfigError("no instrument: pass --instrument or set 'instrument' in the config")
    if isinstance(ref, dict):
        return InstrumentSpec.from_mapping(ref)
    if not Path(ref).is_file():
        raise ConfigError(f"instrument file not found: {ref}")
    return load_instrument(ref)


def _m1(cfg: dict, spec: InstrumentSpec):
    path = cfg.get("data")
    if path is None:
        raise ConfigError("no data: pass --data or set 'data' in the config")
    if not Path(path).is_file():
        raise ConfigError(f"data file not found: {path}")
    candles = load_csv(path, spec)
    if not candles:
        raise ConfigError(f"{path}: no rows")
    return candles


def _broker_kwargs(cfg: dict) -> dict:
    broker = cfg.get("broker") or {}
    unknown = set(broker) - set(BROKER_KEYS)
    if unknown:
        raise ConfigError(f"unknown broker fields: {sorted(unknown)}")
    return dict(broker)


def _time(cfg: dict, key: str):
    value = cfg.get(key)
    if not value:
        return None
    if isinstance(value, datetime):  # YAML parses unquoted timestamps itself
        return value if value.tzinfo else value.replace(tzinfo=timezone.utc)
    return parse_timestamp(str(value))


def _write_manifest(out: Path, command: str, cfg: dict, spec: InstrumentSpec, candles,
                    **extra) -> dict:
    manifest = {
        "command": command,
        "version": __version__,
        "seed": cfg["seed"],
        "data": cfg.get("data"),
        "data_sha256": data_fingerprint(candles),
        "instrument": asdict(spec),
        "config": {k: v for k, v in cfg.items() if k not in ("instrument", "out")},
        **extra,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
    return manifest


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def cmd_indicator(cfg: dict, out: Path) -> int:
    spec = _instrument(cfg)
    m1 = _m1(cfg, spec)
    tf = Timeframe(cfg.get("timeframe", "M1"))
    bars = m1 if tf is Timeframe.M1 else resample(m1, tf)
    params = VgrsiParams(int(cfg.get("window_size", 35)), int(cfg.get("window_visibility", 35)),
                         cfg.get("variant", "A0"))
    series = close_series(bars, cfg.get("price_source", "mid"), spec)
    points = to_point_units(series, spec.point)
    values = (rolling_values(points, params) if len(points) > params.window_size
              else np.full(len(points), np.nan))
    with open(out / "vgrsi.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("timestamp", "value"))
        for bar, v in zip(bars, values):
            w.writerow((format_timestamp(bar.open_time), _fmt(v)))
    defined = int(np.sum(~np.isnan(values)))
    warmup = min(params.window_size, len(values))
    undefined = len(values) - defined - warmup
    _write_manifest(out, "indicator", cfg, spec, m1,
                    params={"timeframe": tf.value, **params.as_dict()})
    print(f"{len(values)} bars: {defined} defined, {undefined} undefined, {warmup} warm-up")
    return 0


def _write_signal_table(signals, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("time", "direction", *(tf.value for tf in TIMEFRAMES), "sl_points", "tp_points"))
        for s in signals:
            snap = [s.snapshot.get(tf.value) for tf in TIMEFRAMES]
            w.writerow((format_timestamp(s.time), s.direction.value,
                        *("" if v is None else repr(v) for v in snap),
                        s.sl_distance_points, s.tp_distance_points))


def cmd_backtest(cfg: dict, out: Path) -> int:
    spec = _instrument(cfg)
    m1 = _m1(cfg, spec)
    params = StrategyParams.from_dict(cfg.get("strategy") or DEFAULT_STRATEGY)
    broker = _broker_kwargs(cfg)
    view = MarketView(m1, spec, cfg.get("price_source", "mid"))
    res = run_backtest(view, params, _time(cfg, "start"), _time(cfg, "end"), **broker)
    write_trade_log(res.trades, out / "trades.csv")
    write_equity_curve(res.equity_curve, out / "equity.csv")
    _write_signal_table(res.signals, out / "signals.csv")
    write_signals(res.signals, out / "signals.jsonl")
    stats = window_stats(res.trades, res.equity_curve, res.initial_balance)
    block = {**asdict(stats), "initial_balance": res.initial_balance,
             "final_balance": res.final_balance, "signals": len(res.signals),
             "rejected_orders": len(res.rejections)}
    with open(out / "stats.json", "w") as fh:
        json.dump(block, fh, indent=2)
    _write_manifest(out, "backtest", cfg, spec, m1, params=params.as_dict())
    print(f"{stats.trades_all} trades ({stats.trades_long} long, {stats.trades_short} short), "
          f"profit {stats.profit:.2f}")
    return 0


def _walkforward_config(cfg: dict) -> WalkForwardConfig:
    keys = ("train_days", "trade_days", "step_days", "search", "search_budget", "n_jobs", "space")
    d = {k: cfg[k] for k in keys if k in cfg}
    return WalkForwardConfig.from_dict({**d, "seed": int(cfg["seed"])})


def cmd_walkforward(cfg: dict, out: Path) -> int:
    expected = None
    if cfg.get("manifest"):
        cfg, expected = _replay_config(cfg)
    spec = _instrument(cfg)
    m1 = _m1(cfg, spec)
    if expected is not None and data_fingerprint(m1) != expected["data_sha256"]:
        raise ConfigError(f"data hash of {cfg['data']} differs from the manifest")
    config = _walkforward_config(cfg)
    result = run(m1, config, spec, **_broker_kwargs(cfg))
    windows = [w.as_dict() for w in result.windows]

    with open(out / "windows.json", "w") as fh:
        json.dump({"windows": windows, "cumulative_profit": result.cumulative_profit,
                   "trading_days": result.trading_days}, fh, indent=2)
    with open(out / "cumulative_profit.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("window", "trade_start", "trade_end", "profit", "cumulative_profit"))
        for win, cum in zip(result.windows, result.cumulative_profit):
            w.writerow((win.index, format_timestamp(win.trade_start),
                        format_timestamp(win.trade_end), f"{win.out_of_sample_profit:.2f}",
                        f"{cum:.2f}"))
    with open(out / "trades.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("window",) + TradeRecord.CSV_COLUMNS)
        for win in result.windows:
            for t in win.trades:
                w.writerow((win.index, *t.csv_row()))
    write_summary(result.summary(), out / "summary.csv", out / "summary.json")
    _write_manifest(out, "walkforward", cfg, spec, m1,
                    walkforward=config.as_dict(), windows=windows)

    for win in result.windows:
        print(f"window {win.index}: {win.trade_start.date()}..{win.trade_end.date()} "
              f"profit {win.out_of_sample_profit:.2f} ({win.stats.trades_all} trades)")
    if expected is not None:
        if json.loads(json.dumps(windows)) != expected["windows"]:
            log.error("replay differs from the manifest")
            return 1
        print("replay identical to manifest")
    return 0


def _replay_config(cfg: dict) -> tuple[dict, dict]:
    path = Path(cfg["manifest"])
    if not path.is_file():
        raise ConfigError(f"manifest not found: {path}")
    with open(path) as fh:
        manifest = json.load(fh)
    if manifest.get("command") != "walkforward":
        raise ConfigError(f"{path}: not a walkforward manifest")
    replay = dict(manifest["config"])
    replay.update(manifest["walkforward"])
    replay["instrument"] = manifest["instrument"]
    replay["seed"] = manifest["seed"]
    replay["out"] = cfg["out"]
    if cfg.get("data"):
        replay["data"] = cfg["data"]
    replay.pop("manifest", None)
    return replay, manifest


def cmd_report(cfg: dict, out: Path) -> int:
    src = cfg.get("input")
    if src is None:
        raise ConfigError("no input: pass --input with a walkforward output directory")
    path = Path(src) / "windows.json" if Path(src).is_dir() else Path(src)
    if not path.is_file():
        raise ConfigError(f"walkforward results not found: {path}")
    with open(path) as fh:
        doc = json.load(fh)
    stats = [WindowStats(w["trades_all"], w["trades_long"], w["trades_short"], w["sharpe"],
                         w["max_drawdown_pct"], w["out_of_sample_profit"])
             for w in doc["windows"]]
    summary = aggregate(stats, doc.get("trading_days"))
    write_summary(summary, out / "summary.csv", out / "summary.json")
    with open(out / "manifest.json", "w") as fh:
        json.dump({"command": "report", "version": __version__, "seed": cfg["seed"],
                   "input": str(path), "config": {k: v for k, v in cfg.items() if k != "out"}},
                  fh, indent=2, sort_keys=True, default=str)
    for k, v in summary.table_row().items():
        print(f"{k}: {v}")
    return 0


COMMANDS = {"indicator": cmd_indicator, "backtest": cmd_backtest,
            "walkforward": cmd_walkforward, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vgrsi", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="random seed recorded in the manifest")
        p.add_argument("--verbose", "-v", action="store_true")
        if name != "report":
            p.add_argument("--data", help="M1 candle CSV")
            p.add_argument("--instrument", help="instrument YAML")
    sub.choices["walkforward"].add_argument("--manifest", help="replay a previous run")
    sub.choices["report"].add_argument("--input", help="walkforward output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out)
    except (ValueError, OSError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""
Command-line front end.

    python -m smallcell efficiency-sweep --mode both --out sweep.csv
    python -m smallcell optimize --mode on-off
    python -m smallcell validate --seed 7

Values come from built-in defaults, then the config file (``--config``,
default ``data/paper_s5.cfg``), then flags; ``--set KEY=VALUE`` reaches any
config key. Results go to stdout or ``--out``; logs go to stderr.
Exit codes: 0 success, 1 validation failure or run-time error, 2 bad configuration.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Callable, Dict, List, Optional

import pandas as pd

from smallcell.commands import (
    run_efficiency_sweep,
    run_fixed_load_curve,
    run_optimal_curve,
    run_optimize,
    run_user_rate_sweep,
    run_validation,
    sample_one_pattern,
)
from smallcell.lib.config import RawEntry, RunConfig, load_config, parse_overrides
from smallcell.lib.errors import ConfigError, SmallCellError
from smallcell.lib.logging_config import get_logger, setup_logging
from smallcell.lib.network_model import PowerMode, convert_units
from smallcell.simulation.montecarlo import write_pattern_csv

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2

_MODES = {
    "all-on": [PowerMode.ALL_ON],
    "on-off": [PowerMode.ON_OFF],
    "both": [PowerMode.ALL_ON, PowerMode.ON_OFF],
}


def _csv_text(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, float_format="%.17g", lineterminator="\n")


def _json_text(payload: object) -> str:
    # numpy scalars from DataFrame rows
    return json.dumps(payload, indent=2, default=lambda o: o.item()) + "\n"


def _emit(text: str, out_path: Optional[str]) -> None:
    if not out_path:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    out_dir = os.path.dirname(out_path)
    if out_dir and not os.path.exists(out_dir):
        os.makedirs(out_dir, exist_ok=True)
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    logger.info("Saved results", extra={"out": out_path})


def _frame_text(frame: pd.DataFrame, fmt: str) -> str:
    if fmt == "json":
        return _json_text(frame.astype(object).where(frame.notna(), None).to_dict(orient="records"))
    return _csv_text(frame)


def _flag_overrides(args: argparse.Namespace) -> Dict[str, RawEntry]:
    """Translate command flags into config entries so one parser handles units and bounds."""
    pairs: List[str] = list(args.set or [])
    flag_keys = {
        "seed": ("seed", ""),
        "workers": ("workers", ""),
        "lambda_u": ("lambda_u", " per_km2"),
        "lambda_b_min": ("sweep_lambda_b_min", " per_km2"),
        "lambda_b_max": ("sweep_lambda_b_max", " per_km2"),
        "points": ("sweep_points", ""),
        "fixed_load": ("fixed_load", ""),
        "mu": ("validate_mu", ""),
        "realizations": ("n_realizations", ""),
    }
    for attr, (key, unit) in flag_keys.items():
        value = getattr(args, attr, None)
        if value is not None:
            pairs.append(f"{key}={value}{unit}")
    for attr, (key, unit) in {"lambda_u_grid": ("lambda_u_grid", " per_km2"), "mu_grid": ("mu_grid", "")}.items():
        value = getattr(args, attr, None)
        if value:
            pairs.append(f"{key}={', '.join(str(v) for v in value)}{unit}")
    if getattr(args, "no_sim", False):
        pairs.append("simulate=false")
    return parse_overrides(pairs)


def cmd_efficiency_sweep(args: argparse.Namespace, config: RunConfig) -> int:
    frame = run_efficiency_sweep(config, _MODES[args.mode])
    _emit(_frame_text(frame, args.format), args.out)
    return EXIT_OK


def cmd_optimize(args: argparse.Namespace, config: RunConfig) -> int:
    modes = _MODES[args.mode]
    if args.lambda_u_grid:
        frame = run_optimal_curve(config, modes)
        _emit(_frame_text(frame, args.format), args.out)
        if args.fixed_load_curve_out:
            _emit(_csv_text(run_fixed_load_curve(config, modes)), args.fixed_load_curve_out)
        return EXIT_OK
    records = run_optimize(config, modes)
    if args.format == "csv":
        flat = pd.DataFrame([{k: v for k, v in r.items() if k != "search_trace"} for r in records])
        _emit(_csv_text(flat), args.out)
    else:
        _emit(_json_text(records), args.out)
    return EXIT_OK


def cmd_validate(args: argparse.Namespace, config: RunConfig) -> int:
    report = run_validation(config, _MODES[args.mode])
    _emit(_json_text(report.model_dump(mode="json")), args.out)
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_user_rate_sweep(args: argparse.Namespace, config: RunConfig) -> int:
    frame = run_user_rate_sweep(config, _MODES[args.mode])
    _emit(_frame_text(frame, args.format), args.out)
    return EXIT_OK


def cmd_dump_pattern(args: argparse.Namespace, config: RunConfig) -> int:
    lambda_b = convert_units(args.lambda_b, "per_km2", "per_m2")
    mode = _MODES[args.mode][-1]
    pattern = sample_one_pattern(config, lambda_b, args.realization, mode)
    write_pattern_csv(pattern, args.out or sys.stdout)
    return EXIT_OK


_COMMANDS: Dict[str, Callable[[argparse.Namespace, RunConfig], int]] = {
    "efficiency-sweep": cmd_efficiency_sweep,
    "optimize": cmd_optimize,
    "validate": cmd_validate,
    "user-rate-sweep": cmd_user_rate_sweep,
    "dump-pattern": cmd_dump_pattern,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", dest="config", default=None, help="Config file (defaults to data/paper_s5.cfg)")
    common.add_argument("--seed", dest="seed", type=int, default=None, help="Monte Carlo seed")
    common.add_argument("--mode", dest="mode", choices=sorted(_MODES), default="both", help="BS power control")
    common.add_argument("--out", dest="out", default=None, help="Output path (defaults to stdout)")
    common.add_argument("--format", dest="format", choices=["csv", "json"], default="csv", help="Output format")
    common.add_argument("--workers", dest="workers", type=int, default=None, help="Worker processes")
    common.add_argument("--log-level", dest="log_level", default=None, help="Overrides LOG_LEVEL")
    common.add_argument(
        "--set", dest="set", action="append", metavar="KEY=VALUE", help="Override any config key, e.g. --set 'noise_power=-90 dBm'"
    )

    parser = argparse.ArgumentParser(prog="smallcell", description="Energy-efficient small-cell density analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("efficiency-sweep", parents=[common], help="Efficiency over a BS-density grid")
    sweep.add_argument("--lambda-u", dest="lambda_u", type=float, default=None, help="User density, per km^2")
    sweep.add_argument("--lambda-b-min", dest="lambda_b_min", type=float, default=None, help="per km^2")
    sweep.add_argument("--lambda-b-max", dest="lambda_b_max", type=float, default=None, help="per km^2")
    sweep.add_argument("--points", dest="points", type=int, default=None, help="Grid points (log-spaced)")

    opt = sub.add_parser("optimize", parents=[common], help="Energy-optimal BS density")
    opt.add_argument("--lambda-u", dest="lambda_u", type=float, default=None, help="User density, per km^2")
    opt.add_argument(
        "--lambda-u-grid", dest="lambda_u_grid", type=float, nargs="+", default=None, help="Optimal-density curve over these per-km^2 densities"
    )
    opt.add_argument("--fixed-load", dest="fixed_load", type=float, default=None, help="Also report eta at lambda_b = lambda_u / MU0")
    opt.add_argument("--fixed-load-curve-out", dest="fixed_load_curve_out", default=None, help="Write the fixed-load curve as CSV here")

    val = sub.add_parser("validate", parents=[common], help="Analytic model against Monte Carlo")
    val.add_argument("--mu", dest="mu", type=float, default=None, help="Cell load lambda_u / lambda_b")
    val.add_argument("--lambda-u", dest="lambda_u", type=float, default=None, help="User density, per km^2")
    val.add_argument("--realizations", dest="realizations", type=int, default=None)

    urs = sub.add_parser("user-rate-sweep", parents=[common], help="Per-user rate over a cell-load grid")
    urs.add_argument("--mu-grid", dest="mu_grid", type=float, nargs="+", default=None)
    urs.add_argument("--lambda-u", dest="lambda_u", type=float, default=None, help="User density, per km^2")
    urs.add_argument("--no-sim", dest="no_sim", action="store_true", help="Analytic column only")
    urs.add_argument("--realizations", dest="realizations", type=int, default=None)

    dump = sub.add_parser("dump-pattern", parents=[common], help="Write one realization as CSV")
    dump.add_argument("--lambda-b", dest="lambda_b", type=float, required=True, help="BS density, per km^2")
    dump.add_argument("--lambda-u", dest="lambda_u", type=float, default=None, help="User density, per km^2")
    dump.add_argument("--realization", dest="realization", type=int, default=0)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    setup_logging(args.log_level)
    logger.info("Running command", extra={"command": args.command})

    try:
        config = load_config(args.config, _flag_overrides(args))
    except ConfigError as exc:
        logger.error("Invalid configuration: %s", exc)
        return EXIT_CONFIG

    try:
        return _COMMANDS[args.command](args, config)
    except ConfigError as exc:
        logger.error("Invalid configuration: %s", exc)
        return EXIT_CONFIG
    except (SmallCellError, ValueError, RuntimeError) as exc:
        logger.exception("%s failed: %s", args.command, exc)
        return EXIT_FAILED


if __name__ == "__main__":
    raise SystemExit(main())

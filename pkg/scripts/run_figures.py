from __future__ import annotations

import os
import sys
import argparse
from typing import Dict, List

import pandas as pd

# Ensure project root is importable when running this file directly
PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), os.pardir))
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

from smallcell.lib.logging_config import setup_logging, get_logger  # noqa: E402
from smallcell.lib.config import RunConfig, load_config, parse_overrides  # noqa: E402
from smallcell.lib.network_model import PowerMode  # noqa: E402
from smallcell.commands import (  # noqa: E402
    run_efficiency_sweep,
    run_fixed_load_curve,
    run_optimal_curve,
    run_user_rate_sweep,
)


logger = get_logger(__name__)

MODES = [PowerMode.ALL_ON, PowerMode.ON_OFF]


def _save(frame: pd.DataFrame, path: str) -> str:
    out_dir = os.path.dirname(path)
    if out_dir and not os.path.exists(out_dir):
        os.makedirs(out_dir, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    logger.info("Saved dataset", extra={"path": path, "rows": len(frame)})
    return path


def run_figures(*, config: RunConfig, output_dir: str, simulate: bool = True) -> Dict[str, str]:
    """Regenerate the user-rate, efficiency-sweep and optimal-density datasets."""
    logger.info(
        "Starting figure run",
        extra={"output_dir": output_dir, "simulate": simulate, "lambda_u": config.lambda_u},
    )
    if not simulate:
        config = config.model_copy(update={"sim": None})

    written: Dict[str, str] = {}
    written["user_rate"] = _save(run_user_rate_sweep(config, MODES), os.path.join(output_dir, "user_rate_vs_load.csv"))
    written["efficiency"] = _save(run_efficiency_sweep(config, MODES), os.path.join(output_dir, "efficiency_vs_density.csv"))
    written["optimum"] = _save(run_optimal_curve(config, MODES), os.path.join(output_dir, "optimal_density.csv"))
    if config.fixed_load is not None:
        written["fixed_load"] = _save(run_fixed_load_curve(config, MODES), os.path.join(output_dir, "fixed_load.csv"))
    return written


def main(argv: List[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Regenerate every figure dataset as CSV")
    parser.add_argument(
        "--config",
        dest="config",
        default=None,
        help="Config file (defaults to data/paper_s5.cfg)",
    )
    parser.add_argument(
        "--out-dir",
        dest="output_dir",
        default=os.path.join(PROJECT_ROOT, "data", "figures"),
        help="Directory for the CSV files (defaults to data/figures)",
    )
    parser.add_argument(
        "--fixed-load",
        dest="fixed_load",
        type=float,
        default=1.0,
        help="Cell load of the fixed-load companion curve",
    )
    parser.add_argument(
        "--no-sim",
        dest="simulate",
        action="store_false",
        help="Skip the Monte Carlo column of the user-rate dataset",
    )

    args = parser.parse_args(argv)

    setup_logging()

    try:
        config = load_config(args.config, parse_overrides([f"fixed_load={args.fixed_load}"]))
        run_figures(config=config, output_dir=args.output_dir, simulate=args.simulate)
    except SystemExit:
        raise
    except Exception as exc:
        logger.exception("run_figures failed: %s", exc)
        return 1

    return 0


if __name__ == "__main__":
    raise SystemExit(main())

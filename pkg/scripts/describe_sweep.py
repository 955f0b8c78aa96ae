"""
Summarize an efficiency-sweep CSV with DuckDB: the peak row per power mode
and, when both modes are present, the on-off gain at every swept density.

    python scripts/describe_sweep.py data/figures/efficiency_vs_density.csv
    python scripts/describe_sweep.py sweep.csv --mode on-off --format json
"""
from __future__ import annotations

import argparse
import os
import sys
from typing import List, Optional

import duckdb
import pandas as pd

PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), os.pardir))
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

from smallcell.commands import SWEEP_COLUMNS  # noqa: E402
from smallcell.lib.logging_config import get_logger, setup_logging  # noqa: E402

logger = get_logger(__name__)

DEFAULT_SWEEP_CSV = os.path.join(PROJECT_ROOT, "data", "figures", "efficiency_vs_density.csv")

# ties on eta go to the denser deployment, as in the optimizer
PEAK_QUERY = """
SELECT mode, lambda_b_per_km2, normalized_density, eta, cell_rate, power_draw
FROM sweep
{where}
QUALIFY row_number() OVER (PARTITION BY mode ORDER BY eta DESC, lambda_b_per_km2 DESC) = 1
ORDER BY mode
"""

GAIN_QUERY = """
SELECT a.lambda_b_per_km2, a.eta AS eta_all_on, o.eta AS eta_on_off, o.eta / a.eta AS on_off_gain
FROM sweep a JOIN sweep o USING (lambda_b_per_km2)
WHERE a.mode = 'all-on' AND o.mode = 'on-off'
ORDER BY a.lambda_b_per_km2
"""


def load_sweep(conn: duckdb.DuckDBPyConnection, path: str) -> List[str]:
    """Register the CSV as table ``sweep`` and return the modes it holds."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"sweep CSV not found at {path}")
    conn.register("sweep", pd.read_csv(path))
    columns = [row[0] for row in conn.execute("DESCRIBE sweep").fetchall()]
    missing = [c for c in SWEEP_COLUMNS if c not in columns]
    if missing:
        raise ValueError(f"{path} is not an efficiency sweep; missing columns {missing}")
    return [row[0] for row in conn.execute("SELECT DISTINCT mode FROM sweep ORDER BY mode").fetchall()]


def describe_sweep(path: str, mode: Optional[str] = None) -> dict[str, pd.DataFrame]:
    conn = duckdb.connect(database=":memory:")
    modes = load_sweep(conn, path)
    logger.info("Describing sweep", extra={"path": path, "modes": modes, "mode_filter": mode})
    if mode is not None and mode not in modes:
        raise ValueError(f"mode {mode!r} not in sweep; found {modes}")
    where, params = ("WHERE mode = ?", [mode]) if mode is not None else ("", [])
    out = {"peak": conn.execute(PEAK_QUERY.format(where=where), params).fetch_df()}
    if mode is None and {"all-on", "on-off"} <= set(modes):
        gain = conn.execute(GAIN_QUERY).fetch_df()
        if (gain["on_off_gain"] < 1.0).any():
            logger.warning("On-off control less efficient at some densities", extra={"rows": int((gain["on_off_gain"] < 1.0).sum())})
        out["gain"] = gain
    return out


def _render(tables: dict[str, pd.DataFrame], output_format: str) -> str:
    if output_format == "json":
        return "{" + ", ".join(f'"{name}": {frame.to_json(orient="records")}' for name, frame in tables.items()) + "}"
    if output_format == "csv":
        return tables["peak"].to_csv(index=False, float_format="%.17g", lineterminator="\n")
    return "\n\n".join(f"[{name}]\n{frame.to_string(index=False)}" for name, frame in tables.items())


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="Peak efficiency and on-off gain of an efficiency-sweep CSV")
    parser.add_argument("data_csv", nargs="?", default=DEFAULT_SWEEP_CSV, help="Sweep CSV from efficiency-sweep or run_figures.py")
    parser.add_argument("--mode", choices=["all-on", "on-off"], default=None, help="Only this power mode")
    parser.add_argument("--format", dest="output_format", choices=["text", "csv", "json"], default="text")
    args = parser.parse_args(argv)

    setup_logging()
    try:
        tables = describe_sweep(args.data_csv, args.mode)
    except (OSError, ValueError, duckdb.Error) as exc:
        logger.error("Cannot describe %s: %s", args.data_csv, exc)
        return 1
    print(_render(tables, args.output_format))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

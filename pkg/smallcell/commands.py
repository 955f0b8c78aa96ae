"""
Command implementations behind the CLI. Each returns plain data (a DataFrame
or pydantic report); serialization and exit codes live in ``smallcell.main``.
Densities in outputs are per km^2.
"""
from __future__ import annotations

import math
from typing import Dict, List, Mapping, Optional, Sequence

import pandas as pd
from pydantic import BaseModel, ConfigDict

from smallcell.lib.config import RunConfig
from smallcell.lib.energy_efficiency import (
    CurvePoint,
    Optimum,
    efficiency_sweep,
    fixed_load_curve,
    optimal_density_curve,
    optimize_density,
)
from smallcell.lib.errors import ConfigError
from smallcell.lib.logging_config import get_logger
from smallcell.lib.network_model import (
    PowerMode,
    Scenario,
    convert_units,
    received_power_outage,
    void_probability,
)
from smallcell.lib.optimization import log_grid
from smallcell.lib.rate_analysis import avg_rate, cell_rate, outage, user_rate
from smallcell.simulation.montecarlo import (
    EstimatorOutput,
    PointPattern,
    SimConfig,
    estimate_cell_and_user_rate,
    estimate_outage,
    estimate_received_power_outage,
    estimate_sinr_rate,
    estimate_void_fraction,
    sample_network,
    sample_patterns,
)

logger = get_logger(__name__)

SWEEP_COLUMNS = ["mode", "lambda_b_per_km2", "normalized_density", "eta", "cell_rate", "power_draw", "quad_error"]
CURVE_COLUMNS = ["mode", "lambda_u_per_km2", "lambda_b_star_per_km2", "eta_star", "unimodal", "eta_fixed_load", "error"]


def per_km2(value: Optional[float]) -> Optional[float]:
    return None if value is None else convert_units(value, "per_m2", "per_km2")


class ValidationRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    mode: Optional[PowerMode] = None
    analytic: float
    empirical: float
    half_width_95: float
    tolerance: float
    n_samples: int
    passed: bool


class CalibrationEntry(BaseModel):
    """Analytic outage against ``reference_outage``; informational only."""

    model_config = ConfigDict(frozen=True)

    threshold_db: float
    analytic_outage: float
    reference_outage: float
    within_tolerance: bool


class ValidationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    lambda_b_per_km2: float
    lambda_u_per_km2: float
    mu: float
    seed: int
    n_realizations: int
    records: List[ValidationRecord]
    calibration: Optional[CalibrationEntry] = None
    passed: bool


def _require_users(config: RunConfig, command: str) -> None:
    if not config.lambda_u > 0:
        raise ConfigError(f"{command} needs lambda_u > 0", field="lambda_u")


def run_efficiency_sweep(config: RunConfig, modes: Sequence[PowerMode]) -> pd.DataFrame:
    _require_users(config, "efficiency sweep")
    grid = log_grid(config.sweep_lambda_b_min, config.sweep_lambda_b_max, config.sweep_points)
    logger.info(
        "Efficiency sweep",
        extra={"lambda_u": config.lambda_u, "points": len(grid), "modes": [m.value for m in modes]},
    )
    rows = []
    for mode in modes:
        results = efficiency_sweep(config.lambda_u, grid, mode, config.network, config.quadrature, config.search.workers)
        for lambda_b, res in zip(grid, results):
            rows.append(
                {
                    "mode": mode.value,
                    "lambda_b_per_km2": per_km2(lambda_b),
                    "normalized_density": lambda_b / config.lambda_u,
                    "eta": res.eta,
                    "cell_rate": res.cell_rate,
                    "power_draw": res.power_draw,
                    "quad_error": res.quad_error,
                }
            )
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def optimum_record(opt: Optimum) -> Dict[str, object]:
    return {
        "mode": opt.mode.value,
        "lambda_u_per_km2": per_km2(opt.lambda_u),
        "lambda_b_star_per_km2": per_km2(opt.lambda_b_star),
        "eta_star": opt.eta_star,
        "mu_star": opt.mu_star,
        "unimodal": opt.unimodal,
        "search_trace": [[per_km2(x), y] for x, y in opt.search_trace],
    }


def run_optimize(config: RunConfig, modes: Sequence[PowerMode]) -> List[Dict[str, object]]:
    """One optimum per mode at the configured lambda_u, search trace included."""
    _require_users(config, "optimize")
    return [
        optimum_record(optimize_density(config.lambda_u, mode, config.network, config.quadrature, config.search))
        for mode in modes
    ]


def _curve_row(mode: PowerMode, point: CurvePoint) -> Dict[str, object]:
    return {
        "mode": mode.value,
        "lambda_u_per_km2": per_km2(point.lambda_u),
        "lambda_b_star_per_km2": per_km2(point.lambda_b_star),
        "eta_star": point.eta_star,
        "unimodal": point.unimodal,
        "eta_fixed_load": point.eta_fixed_load,
        "error": point.error,
    }


def run_optimal_curve(config: RunConfig, modes: Sequence[PowerMode]) -> pd.DataFrame:
    """Optimal density over the lambda_u grid; per-point failures land in the error column."""
    rows = []
    for mode in modes:
        points = optimal_density_curve(
            config.lambda_u_grid, mode, config.network, config.quadrature, config.search, config.fixed_load
        )
        rows.extend(_curve_row(mode, p) for p in points)
    return pd.DataFrame(rows, columns=CURVE_COLUMNS)


def run_fixed_load_curve(config: RunConfig, modes: Sequence[PowerMode]) -> pd.DataFrame:
    if config.fixed_load is None:
        raise ConfigError("fixed_load is required for the fixed-load curve", field="fixed_load")
    rows = []
    for mode in modes:
        results = fixed_load_curve(config.lambda_u_grid, config.fixed_load, mode, config.network, config.quadrature)
        for lu, res in zip(config.lambda_u_grid, results):
            rows.append(
                {
                    "mode": mode.value,
                    "lambda_u_per_km2": per_km2(lu),
                    "lambda_b_per_km2": per_km2(lu / config.fixed_load),
                    "eta": res.eta,
                    "cell_rate": res.cell_rate,
                    "power_draw": res.power_draw,
                }
            )
    return pd.DataFrame(rows)


def run_user_rate_sweep(config: RunConfig, modes: Sequence[PowerMode]) -> pd.DataFrame:
    """
    Analytic per-user rate over the cell-load grid, with the Monte Carlo
    estimate alongside when simulation is enabled. Realizations are shared
    between modes at each cell load.
    """
    _require_users(config, "user-rate sweep")
    rows = []
    for mu in config.mu_grid:
        lambda_b = config.lambda_u / mu
        patterns = sample_patterns(lambda_b, config.lambda_u, config.sim) if config.sim is not None else None
        for mode in modes:
            scenario = Scenario(lambda_b=lambda_b, lambda_u=config.lambda_u, mode=mode)
            row: Dict[str, object] = {
                "mu": mu,
                "mode": mode.value,
                "analytic_user_rate": user_rate(scenario, config.network, config.quadrature).value,
            }
            if patterns is not None:
                _, user = estimate_cell_and_user_rate(patterns, mode, config.network)
                row["mc_user_rate"] = user.mean
                row["mc_half_width"] = user.half_width_95
            rows.append(row)
            logger.info("User-rate point", extra=row)
    return pd.DataFrame(rows)


def _record(
    name: str,
    mode: Optional[PowerMode],
    analytic: float,
    empirical: EstimatorOutput,
    tolerance: float,
    overrides: Mapping[str, float],
) -> ValidationRecord:
    key = f"{name}:{mode.value}" if mode is not None else name
    analytic = overrides.get(key, analytic)
    passed = abs(analytic - empirical.mean) <= empirical.half_width_95 + tolerance
    if not passed:
        logger.warning(
            "Analytic value outside Monte Carlo band",
            extra={"estimator": key, "analytic": analytic, "empirical": empirical.mean, "half_width": empirical.half_width_95},
        )
    return ValidationRecord(
        name=name,
        mode=mode,
        analytic=analytic,
        empirical=empirical.mean,
        half_width_95=empirical.half_width_95,
        tolerance=tolerance,
        n_samples=empirical.n_samples,
        passed=passed,
    )


def _validation_lambda_b(config: RunConfig) -> float:
    if config.validate_lambda_b is not None:
        return config.validate_lambda_b
    if not config.lambda_u > 0:
        raise ConfigError("lambda_u = 0 needs validate_lambda_b to place the BSs", field="validate_lambda_b")
    return config.lambda_u / config.validate_mu


def run_validation(
    config: RunConfig,
    modes: Sequence[PowerMode],
    analytic_overrides: Optional[Mapping[str, float]] = None,
) -> ValidationReport:
    """
    Compare every analytic quantity with its Monte Carlo estimate.

    ``analytic_overrides`` replaces analytic values by key (``name`` or
    ``name:mode``) so the failure path can be exercised.
    """
    if config.sim is None:
        raise ConfigError("validation needs Monte Carlo settings (simulate = true)", field="simulate")
    overrides = dict(analytic_overrides or {})
    tol = config.tolerances
    params = config.network
    lambda_b = _validation_lambda_b(config)
    lambda_u = config.lambda_u
    mu = lambda_u / lambda_b
    logger.info("Validating analytic model", extra={"lambda_b": lambda_b, "lambda_u": lambda_u, "mu": mu})

    patterns = sample_patterns(lambda_b, lambda_u, config.sim)
    records: List[ValidationRecord] = [
        _record("void_fraction", None, void_probability(mu), estimate_void_fraction(patterns), tol.void_tolerance, overrides),
    ]
    if lambda_u > 0:
        records.append(
            _record(
                "received_power_outage",
                None,
                received_power_outage(params),
                estimate_received_power_outage(patterns, params),
                tol.outage_tolerance,
                overrides,
            )
        )
        for mode in modes:
            scenario = Scenario(lambda_b=lambda_b, lambda_u=lambda_u, mode=mode)
            rate_tol = tol.rate_tolerance_for(mode)
            rate = avg_rate(scenario, params, config.quadrature).value
            records.append(
                _record("avg_rate", mode, rate, estimate_sinr_rate(patterns, mode, params), rate_tol * abs(rate), overrides)
            )
            records.append(
                _record(
                    "outage",
                    mode,
                    outage(scenario, config.outage_threshold, params, config.quadrature).value,
                    estimate_outage(patterns, mode, config.outage_threshold, params),
                    tol.outage_tolerance,
                    overrides,
                )
            )
            mc_cell, mc_user = estimate_cell_and_user_rate(patterns, mode, params)
            c_rate = cell_rate(scenario, params, config.quadrature).value
            u_rate = user_rate(scenario, params, config.quadrature).value
            records.append(_record("cell_rate", mode, c_rate, mc_cell, rate_tol * abs(c_rate), overrides))
            records.append(_record("user_rate", mode, u_rate, mc_user, rate_tol * abs(u_rate), overrides))
    else:
        # every cell is void: no user is served, so cell rates vanish in both modes
        for mode in modes:
            mc_cell, _ = estimate_cell_and_user_rate(patterns, mode, params)
            records.append(_record("cell_rate", mode, 0.0, mc_cell, 0.0, overrides))

    calibration = _calibration(config, lambda_b) if lambda_u > 0 else None
    report = ValidationReport(
        lambda_b_per_km2=per_km2(lambda_b),
        lambda_u_per_km2=per_km2(lambda_u),
        mu=mu,
        seed=config.sim.seed,
        n_realizations=config.sim.n_realizations,
        records=records,
        calibration=calibration,
        passed=all(r.passed for r in records),
    )
    logger.info("Validation finished", extra={"passed": report.passed, "records": len(records)})
    return report


def _calibration(config: RunConfig, lambda_b: float) -> Optional[CalibrationEntry]:
    if config.reference_outage is None:
        return None
    scenario = Scenario(lambda_b=lambda_b, lambda_u=config.lambda_u, mode=PowerMode.ALL_ON)
    value = outage(scenario, config.outage_threshold, config.network, config.quadrature).value
    within = abs(value - config.reference_outage) <= config.tolerances.outage_tolerance
    if not within:
        logger.warning(
            "Analytic outage differs from the reference figure",
            extra={"analytic": value, "reference": config.reference_outage},
        )
    return CalibrationEntry(
        threshold_db=10.0 * math.log10(config.outage_threshold),
        analytic_outage=value,
        reference_outage=config.reference_outage,
        within_tolerance=within,
    )


def sample_one_pattern(config: RunConfig, lambda_b: float, index: int, mode: PowerMode) -> PointPattern:
    sim = config.sim if config.sim is not None else SimConfig()
    return sample_network(lambda_b, config.lambda_u, sim, mode, index)

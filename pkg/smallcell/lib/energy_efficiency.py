"""
Energy efficiency of a BS (average cell rate per watt drawn) and the
density that maximizes it for a given user density.
"""
from __future__ import annotations

import math
from functools import partial
from typing import Callable, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field

from smallcell.lib.errors import DomainError, SmallCellError
from smallcell.lib.logging_config import get_logger
from smallcell.lib.network_model import (
    NetworkParams,
    PowerMode,
    Scenario,
    min_transmit_power,
    non_void_probability,
    received_power_scale,
    void_probability,
)
from smallcell.lib.optimization import evaluate_grid, golden_section_max, log_grid, scan
from smallcell.lib.parallel import ordered_map
from smallcell.lib.rate_analysis import QuadratureConfig, avg_rate

logger = get_logger(__name__)


class SearchConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    grid_points: int = Field(default=64, ge=3)
    lower_fraction: float = Field(default=0.01, gt=0.0, le=1.0, description="lambda_b,min / lambda_u")
    rel_width: float = Field(default=1e-4, gt=0.0)
    workers: int = Field(default=1, ge=1)


class EfficiencyResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    eta: float = Field(description="bits/s/Hz per watt")
    cell_rate: float
    power_draw: float = Field(description="average per-BS power, W")
    mode: PowerMode
    quad_error: float = 0.0


class Optimum(BaseModel):
    model_config = ConfigDict(frozen=True)

    lambda_u: float
    mode: PowerMode
    lambda_b_star: float
    eta_star: float
    mu_star: float
    unimodal: bool
    search_trace: List[Tuple[float, float]]


class CurvePoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    lambda_u: float
    lambda_b_star: Optional[float] = None
    eta_star: Optional[float] = None
    unimodal: Optional[bool] = None
    eta_fixed_load: Optional[float] = None
    error: Optional[str] = None


class AppendixObjectives(BaseModel):
    """g, q and v of the cell-load reformulation; 1/eta_1 = g / (q C_1)."""

    model_config = ConfigDict(frozen=True)

    g: float
    q: float
    v: float


def power_on(lambda_b: float, params: NetworkParams) -> float:
    """P_on = P0 + Delta * P_t."""
    return params.p0_circuit + params.delta_slope * min_transmit_power(lambda_b, params)


def average_power(scenario: Scenario, params: NetworkParams) -> float:
    p_on = power_on(scenario.lambda_b, params)
    if scenario.mode is PowerMode.ALL_ON:
        return p_on
    p0 = void_probability(scenario.mu)
    return (1.0 - p0) * p_on + p0 * params.p_off


def efficiency(scenario: Scenario, params: NetworkParams, quad: QuadratureConfig = QuadratureConfig()) -> EfficiencyResult:
    rate = avg_rate(scenario, params, quad)
    q = non_void_probability(scenario.mu)
    draw = average_power(scenario, params)
    return EfficiencyResult(
        eta=q * rate.value / draw,
        cell_rate=q * rate.value,
        power_draw=draw,
        mode=scenario.mode,
        quad_error=q * rate.abs_error_estimate,
    )


def _eta_at(lambda_b: float, lambda_u: float, mode: PowerMode, params: NetworkParams, quad: QuadratureConfig) -> float:
    return efficiency(Scenario(lambda_b=lambda_b, lambda_u=lambda_u, mode=mode), params, quad).eta


def efficiency_sweep(
    lambda_u: float,
    lambda_b_grid: Sequence[float],
    mode: PowerMode,
    params: NetworkParams,
    quad: QuadratureConfig = QuadratureConfig(),
    workers: int = 1,
) -> List[EfficiencyResult]:
    func = partial(_sweep_point, lambda_u=lambda_u, mode=mode, params=params, quad=quad)
    return ordered_map(func, list(lambda_b_grid), workers)


def _sweep_point(lambda_b: float, lambda_u: float, mode: PowerMode, params: NetworkParams, quad: QuadratureConfig) -> EfficiencyResult:
    return efficiency(Scenario(lambda_b=lambda_b, lambda_u=lambda_u, mode=mode), params, quad)


def optimize_density(
    lambda_u: float,
    mode: PowerMode,
    params: NetworkParams,
    quad: QuadratureConfig = QuadratureConfig(),
    search: SearchConfig = SearchConfig(),
    objective: Optional[Callable[[float], float]] = None,
) -> Optimum:
    """
    Maximize eta_k(lambda_b) over (lambda_u * lower_fraction, lambda_u].

    A log-spaced grid locates the best bracket, golden-section search in
    log(lambda_b) refines it. Flat objectives resolve to the largest lambda_b.
    ``objective`` replaces eta for solver checks.
    """
    if not lambda_u > 0:
        raise DomainError(f"lambda_u must be positive, got {lambda_u}")
    if objective is None:
        func: Callable[[float], float] = partial(_eta_at, lambda_u=lambda_u, mode=mode, params=params, quad=quad)
        workers = search.workers
    else:
        func = objective
        workers = 1

    lower = lambda_u * search.lower_fraction
    grid = log_grid(lower, lambda_u, search.grid_points)
    logger.info("Optimizing BS density", extra={"lambda_u": lambda_u, "mode": mode.value, "grid_points": len(grid)})
    values = evaluate_grid(func, grid, workers)
    trace: List[Tuple[float, float]] = list(zip(grid, values))

    found = scan(values)
    if not found.unimodal:
        logger.warning("Efficiency grid is not single-peaked; keeping global grid best", extra={"lambda_u": lambda_u, "mode": mode.value})
    i = found.best_index
    grid_best = (grid[i], values[i])

    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    best = grid_best
    if hi > lo:
        def in_log_space(s: float) -> float:
            x = math.exp(s)
            y = func(x)
            trace.append((x, y))
            return y

        x_log, y = golden_section_max(in_log_space, math.log(lo), math.log(hi), math.log1p(search.rel_width))
        # refinement may only improve on the grid
        if y > grid_best[1] and not math.isclose(y, grid_best[1], rel_tol=1e-12):
            best = (min(math.exp(x_log), lambda_u), y)

    lambda_star, eta_star = best
    optimum = Optimum(
        lambda_u=lambda_u,
        mode=mode,
        lambda_b_star=lambda_star,
        eta_star=eta_star,
        mu_star=lambda_u / lambda_star,
        unimodal=found.unimodal,
        search_trace=trace,
    )
    logger.info("Optimum found", extra={"lambda_b_star": lambda_star, "eta_star": eta_star, "evaluations": len(trace)})
    return optimum


def appendix_objectives(mu: float, lambda_u: float, params: NetworkParams) -> AppendixObjectives:
    """
    Cell-load form of the efficiency objective.

    g(mu) = P0 + Delta P_r0 mu^(alpha/2) / (lambda_u^(alpha/2) C), i.e. P_on at lambda_b = lambda_u/mu;
    q(mu) = 1 - p0(mu);
    v(mu) = lambda_u^(alpha/2) * [(1 - p0) P_on + p0 P_off], the on-off denominator scaled.
    """
    if not mu > 0:
        raise DomainError(f"cell load must be positive, got {mu}")
    half_alpha = params.alpha / 2.0
    scale = lambda_u ** half_alpha
    tx_term = params.delta_slope * received_power_scale(params) / params.path_loss_constant * mu ** half_alpha
    g = params.p0_circuit + tx_term / scale
    p0 = void_probability(mu)
    v = (scale * params.p0_circuit + tx_term) - p0 * (scale * params.p0_circuit + tx_term - scale * params.p_off)
    return AppendixObjectives(g=g, q=1.0 - p0, v=v)


def _curve_point(
    lambda_u: float,
    mode: PowerMode,
    params: NetworkParams,
    quad: QuadratureConfig,
    search: SearchConfig,
    fixed_load: Optional[float],
) -> CurvePoint:
    try:
        opt = optimize_density(lambda_u, mode, params, quad, search.model_copy(update={"workers": 1}))
        eta_fixed = None
        if fixed_load is not None:
            eta_fixed = _eta_at(lambda_u / fixed_load, lambda_u, mode, params, quad)
        return CurvePoint(
            lambda_u=lambda_u,
            lambda_b_star=opt.lambda_b_star,
            eta_star=opt.eta_star,
            unimodal=opt.unimodal,
            eta_fixed_load=eta_fixed,
        )
    except (SmallCellError, ValueError) as exc:
        logger.warning("Curve point failed", extra={"lambda_u": lambda_u, "error": str(exc)})
        return CurvePoint(lambda_u=lambda_u, error=str(exc))


def optimal_density_curve(
    lambda_u_grid: Sequence[float],
    mode: PowerMode,
    params: NetworkParams,
    quad: QuadratureConfig = QuadratureConfig(),
    search: SearchConfig = SearchConfig(),
    fixed_load: Optional[float] = None,
) -> List[CurvePoint]:
    """Optimum per user density; failures are recorded per point and the curve continues."""
    func = partial(_curve_point, mode=mode, params=params, quad=quad, search=search, fixed_load=fixed_load)
    return ordered_map(func, list(lambda_u_grid), search.workers)


def fixed_load_curve(
    lambda_u_grid: Sequence[float],
    mu0: float,
    mode: PowerMode,
    params: NetworkParams,
    quad: QuadratureConfig = QuadratureConfig(),
) -> List[EfficiencyResult]:
    """Efficiency when BSs are deployed at the constant cell load mu0 (lambda_b = lambda_u / mu0)."""
    if not mu0 > 0:
        raise DomainError(f"fixed cell load must be positive, got {mu0}")
    return [efficiency(Scenario(lambda_b=lu / mu0, lambda_u=lu, mode=mode), params, quad) for lu in lambda_u_grid]

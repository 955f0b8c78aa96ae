"""
Analytic rate layer: average maximum achievable rate C_k, outage, cell and
user rates.

C_k = pi * int_0^inf int_0^inf exp(-s (2^t - 1) x^(alpha/2) - pi x (kappa rho(2^t - 1) + 1)) dx dt

with s = sigma_n^2 / P_r0 and kappa = lambda_k / lambda_b. The inner x
integral is the coverage probability at threshold 2^t - 1 after the
substitution x = lambda_b r^2, so the same kernel also yields outage.
"""
from __future__ import annotations

import math
import warnings
from functools import lru_cache
from typing import Tuple

from pydantic import BaseModel, ConfigDict, Field
from scipy import integrate

from smallcell.lib.errors import DomainError, QuadratureConvergenceError
from smallcell.lib.logging_config import get_logger
from smallcell.lib.network_model import (
    NetworkParams,
    Scenario,
    active_fraction,
    load_factor,
    non_void_probability,
    received_power_scale,
)
from smallcell.lib.special_functions import rho_value

logger = get_logger(__name__)

# Hard cap on the outer integral, bits/s/Hz
T_CAP = 64.0
# Extra e-folds added to ln(1/tail_epsilon) before cutting the inner integral
X_MARGIN = 5.0
# Outer panels double in width: [0,1], [1,2], [2,4], ... up to T_CAP
_FIRST_PANEL = 1.0
QUAD_LIMIT = 200


class QuadratureConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    rel_tol: float = Field(default=1e-8, gt=0.0)
    abs_tol: float = Field(default=1e-12, gt=0.0)
    tail_epsilon: float = Field(default=1e-12, gt=0.0, lt=1.0)


class RateResult(BaseModel):
    """An evaluated analytic quantity with its quadrature bookkeeping."""

    model_config = ConfigDict(frozen=True)

    value: float
    abs_error_estimate: float
    t_truncation: float
    x_truncation: float


@lru_cache(maxsize=65536)
def _kernel(T: float, alpha: float) -> float:
    # Outer quadrature nodes repeat across scenarios; rho depends only on (T, alpha).
    return rho_value(T, alpha)


def _quad(func, lower: float, upper: float, epsabs: float, epsrel: float) -> Tuple[float, float, bool]:
    """scipy quad returning (value, error, converged) instead of warning."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(func, lower, upper, epsabs=epsabs, epsrel=epsrel, limit=QUAD_LIMIT, full_output=1)
    value, error = out[0], out[1]
    return value, error, len(out) < 4


class _CoverageKernel:
    """Inner x-integral at a fixed threshold, for one (noise ratio, kappa, alpha)."""

    def __init__(self, noise_ratio: float, kappa: float, alpha: float, quad: QuadratureConfig) -> None:
        self.noise_ratio = noise_ratio
        self.kappa = kappa
        self.alpha = alpha
        self.half_alpha = alpha / 2.0
        self.quad = quad
        self.cut = math.log(1.0 / quad.tail_epsilon) + X_MARGIN
        self.x_truncation = 0.0
        # inner error split by which tolerance bounded it
        self.max_rel_error = 0.0
        self.max_abs_error = 0.0
        self.last_error = 0.0
        self.converged = True

    def x_max(self, T: float) -> float:
        linear = math.pi * (self.kappa * _kernel(T, self.alpha) + 1.0)
        bound = self.cut / linear
        if T > 0 and self.noise_ratio > 0:
            bound = min(bound, (self.cut / (self.noise_ratio * T)) ** (1.0 / self.half_alpha))
        return bound

    def __call__(self, T: float) -> float:
        """pi * int_0^x_max exp(-s T x^(alpha/2) - pi x (kappa rho(T) + 1)) dx."""
        if T == 0.0:
            # P[SINR >= 0] = 1, up to the truncated tail
            return 1.0
        linear = math.pi * (self.kappa * _kernel(T, self.alpha) + 1.0)
        noise = self.noise_ratio * T
        half_alpha = self.half_alpha
        upper = self.x_max(T)
        self.x_truncation = max(self.x_truncation, upper)
        epsabs = self.quad.abs_tol * 0.1
        value, error, ok = _quad(
            lambda x: math.exp(-noise * x ** half_alpha - linear * x),
            0.0,
            upper,
            epsabs=epsabs,
            epsrel=self.quad.rel_tol * 0.25,
        )
        if not ok:
            self.converged = False
        self.last_error = math.pi * error
        if error <= epsabs or not value > 0:
            self.max_abs_error = max(self.max_abs_error, error)
        else:
            self.max_rel_error = max(self.max_rel_error, error / value)
        return math.pi * value

    def propagated_error(self, outer_value: float, t_extent: float) -> float:
        """Bound on the inner errors carried through an outer integral over [0, t_extent]."""
        return self.max_rel_error * outer_value + math.pi * self.max_abs_error * t_extent


def _kernel_for(scenario: Scenario, params: NetworkParams, quad: QuadratureConfig) -> _CoverageKernel:
    return _CoverageKernel(
        noise_ratio=params.noise_power / received_power_scale(params),
        kappa=active_fraction(scenario),
        alpha=params.alpha,
        quad=quad,
    )


def _integrate_rate(kernel: _CoverageKernel, quad: QuadratureConfig) -> RateResult:
    accumulated = 0.0
    error = 0.0
    converged = True
    lower, upper = 0.0, _FIRST_PANEL
    t_truncation = T_CAP
    while lower < T_CAP:
        panel, panel_err, ok = _quad(
            lambda t: kernel(2.0 ** t - 1.0),
            lower,
            upper,
            epsabs=quad.abs_tol * 0.5,
            epsrel=quad.rel_tol * 0.5,
        )
        converged = converged and ok
        accumulated += panel
        error += panel_err
        logger.debug("Rate panel", extra={"t_lower": lower, "t_upper": upper, "panel": panel, "panel_err": panel_err})
        if kernel(2.0 ** upper - 1.0) < quad.tail_epsilon * accumulated:
            t_truncation = upper
            break
        lower, upper = upper, min(2.0 * upper, T_CAP)
    error += kernel.propagated_error(accumulated, t_truncation)
    result = RateResult(
        value=accumulated,
        abs_error_estimate=error,
        t_truncation=t_truncation,
        x_truncation=kernel.x_truncation,
    )
    if not (converged and kernel.converged):
        raise QuadratureConvergenceError("rate integral did not converge within the quadrature budget", partial=result)
    return result


def avg_rate(scenario: Scenario, params: NetworkParams, quad: QuadratureConfig = QuadratureConfig()) -> RateResult:
    """
    Average maximum achievable rate C_k in bits/s/Hz.

    The transmit power is pinned to the received-power rule, so all-on
    results do not depend on either density.
    """
    kernel = _kernel_for(scenario, params, quad)
    logger.debug(
        "Evaluating average rate",
        extra={"mode": scenario.mode.value, "mu": scenario.mu, "kappa": kernel.kappa, "noise_ratio": kernel.noise_ratio},
    )
    return _integrate_rate(kernel, quad)


def interference_free_rate(params: NetworkParams, quad: QuadratureConfig = QuadratureConfig()) -> RateResult:
    """Ceiling of the on-off rate as the cell load vanishes (no active interferers)."""
    kernel = _CoverageKernel(params.noise_power / received_power_scale(params), 0.0, params.alpha, quad)
    return _integrate_rate(kernel, quad)


def coverage(
    scenario: Scenario, threshold_T: float, params: NetworkParams, quad: QuadratureConfig = QuadratureConfig()
) -> RateResult:
    """P[SINR >= T] as a single integral at fixed threshold."""
    if not threshold_T > 0:
        raise DomainError(f"SINR threshold must be positive, got {threshold_T}")
    kernel = _kernel_for(scenario, params, quad)
    value = min(1.0, kernel(threshold_T))
    result = RateResult(
        value=value,
        abs_error_estimate=kernel.last_error,
        t_truncation=threshold_T,
        x_truncation=kernel.x_truncation,
    )
    if not kernel.converged:
        raise QuadratureConvergenceError("coverage integral did not converge", partial=result)
    return result


def outage(
    scenario: Scenario, threshold_T: float, params: NetworkParams, quad: QuadratureConfig = QuadratureConfig()
) -> RateResult:
    """P[SINR < T] = 1 - coverage."""
    cov = coverage(scenario, threshold_T, params, quad)
    return cov.model_copy(update={"value": max(0.0, 1.0 - cov.value)})


def _scaled(result: RateResult, factor: float) -> RateResult:
    return result.model_copy(update={"value": result.value * factor, "abs_error_estimate": result.abs_error_estimate * factor})


def cell_rate(scenario: Scenario, params: NetworkParams, quad: QuadratureConfig = QuadratureConfig()) -> RateResult:
    """(1 - p0(mu)) C_k: void cells contribute zero rate."""
    return _scaled(avg_rate(scenario, params, quad), non_void_probability(scenario.mu))


def user_rate(scenario: Scenario, params: NetworkParams, quad: QuadratureConfig = QuadratureConfig()) -> RateResult:
    """(1 - p0(mu)) / mu * C_k, the per-user share under equal resource split."""
    return _scaled(avg_rate(scenario, params, quad), load_factor(scenario.mu))

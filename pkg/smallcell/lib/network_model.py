"""
Physical-layer and point-process model of a single-tier small-cell network.

All quantities are SI internally: watts, metres, points per square metre.
dBm and per-km2 only appear at the configuration boundary (see
:func:`convert_units`).
"""
from __future__ import annotations

import math
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import integrate, stats

from smallcell.lib.errors import DomainError, UnitConversionError
from smallcell.lib.logging_config import get_logger
from smallcell.lib.special_functions import gamma_fn

logger = get_logger(__name__)

# Shape of the empirical cell-load distribution (gamma-fit Voronoi areas)
CELL_SHAPE = 3.5
PMF_TAIL_MASS = 1e-12
PMF_MAX_N = 10_000


class PowerMode(str, Enum):
    ALL_ON = "all-on"
    ON_OFF = "on-off"


class NetworkParams(BaseModel):
    """Propagation and BS power-model constants, SI units."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = Field(gt=2.0, description="path-loss exponent")
    path_loss_constant: float = Field(gt=0.0, description="C, m^alpha")
    delta: float = Field(gt=0.0, lt=1.0, description="received-power outage tolerance")
    p_r_min: float = Field(gt=0.0, description="minimum received power, W")
    noise_power: float = Field(gt=0.0, description="sigma_n^2, W")
    p0_circuit: float = Field(gt=0.0, description="P0 static on-power, W")
    delta_slope: float = Field(ge=0.0, description="power-amplifier slope")
    p_off: float = Field(gt=0.0, description="sleep power, W")

    @model_validator(mode="after")
    def _check_power_order(self) -> "NetworkParams":
        if not self.p0_circuit > self.p_off:
            raise ValueError(
                f"p0_circuit must exceed p_off (got p0_circuit={self.p0_circuit} W, p_off={self.p_off} W)"
            )
        return self


class Scenario(BaseModel):
    """A (lambda_b, lambda_u) pair in points per m^2 plus the BS power-control mode."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    lambda_b: float = Field(gt=0.0)
    lambda_u: float = Field(gt=0.0)
    mode: PowerMode = PowerMode.ALL_ON

    @property
    def mu(self) -> float:
        return self.lambda_u / self.lambda_b


def received_power_scale(params: NetworkParams) -> float:
    """P_r0 = (-ln(delta) / (pi * Gamma(1 + 2/alpha)))^(alpha/2) * P_r,min."""
    base = -math.log(params.delta) / (math.pi * gamma_fn(1.0 + 2.0 / params.alpha))
    return base ** (params.alpha / 2.0) * params.p_r_min


def min_transmit_power(lambda_b: float, params: NetworkParams) -> float:
    """Smallest BS transmit power meeting the received-power constraint at density lambda_b."""
    if not lambda_b > 0:
        raise DomainError(f"lambda_b must be positive, got {lambda_b}")
    return received_power_scale(params) / (params.path_loss_constant * lambda_b ** (params.alpha / 2.0))


def received_power_outage(params: NetworkParams) -> float:
    """
    Exact P[H C P_t R^-alpha <= P_r,min] at ``min_transmit_power``.

    Equals E_H[exp(-a H^(2/alpha))] with a = -ln(delta)/Gamma(1+2/alpha),
    independent of lambda_b. By Jensen this is never below delta.
    """
    a = -math.log(params.delta) / gamma_fn(1.0 + 2.0 / params.alpha)
    exponent = 2.0 / params.alpha
    value, _ = integrate.quad(lambda h: math.exp(-h - a * h ** exponent), 0.0, math.inf, epsabs=1e-13, epsrel=1e-10)
    return value


def void_probability(mu: float) -> float:
    """p0(mu) = (1 + mu/3.5)^-3.5, probability that a cell serves no user."""
    if mu < 0:
        raise DomainError(f"cell load must be nonnegative, got {mu}")
    return math.exp(-CELL_SHAPE * math.log1p(mu / CELL_SHAPE))


def non_void_probability(mu: float) -> float:
    """1 - p0(mu), without cancellation at small mu."""
    if mu < 0:
        raise DomainError(f"cell load must be nonnegative, got {mu}")
    return -math.expm1(-CELL_SHAPE * math.log1p(mu / CELL_SHAPE))


def load_factor(mu: float) -> float:
    """(1 - p0(mu)) / mu, continued by its limit 1 at mu = 0."""
    if mu < 0:
        raise DomainError(f"cell load must be nonnegative, got {mu}")
    if mu < 1e-8:
        # first-order expansion: 1 - (4.5/7) mu
        return 1.0 - (CELL_SHAPE + 1.0) / (2.0 * CELL_SHAPE) * mu
    return non_void_probability(mu) / mu


def _cell_load_dist(mu: float):
    return stats.nbinom(CELL_SHAPE, CELL_SHAPE / (CELL_SHAPE + mu))


def user_count_pmf(n: int, mu: float) -> float:
    """
    P[N_b = n] for the gamma-fit cell-load law.

    3.5^3.5 Gamma(n+3.5) mu^n / (Gamma(3.5) n! (mu+3.5)^(n+3.5)), which is a
    negative binomial with r = 3.5 and success probability 3.5/(3.5+mu);
    evaluated through its log-pmf.
    """
    if n < 0:
        raise DomainError(f"user count must be nonnegative, got {n}")
    if mu < 0:
        raise DomainError(f"cell load must be nonnegative, got {mu}")
    if mu == 0:
        return 1.0 if n == 0 else 0.0
    return float(np.exp(_cell_load_dist(mu).logpmf(n)))


def pmf_cutoff(mu: float) -> int:
    """Smallest n whose cumulative mass exceeds 1 - 1e-12, capped at 10,000."""
    if mu <= 0:
        return 0
    dist = _cell_load_dist(mu)
    n = int(dist.isf(PMF_TAIL_MASS))
    # isf is a quantile; step to the first n with sf(n) < tail
    while n > 0 and dist.sf(n - 1) < PMF_TAIL_MASS:
        n -= 1
    while dist.sf(n) >= PMF_TAIL_MASS and n < PMF_MAX_N:
        n += 1
    return min(n, PMF_MAX_N)


def active_density(scenario: Scenario) -> float:
    """Density of transmitting BSs: lambda_b all-on, (1 - p0(mu)) lambda_b on-off."""
    if scenario.mode is PowerMode.ALL_ON:
        return scenario.lambda_b
    return non_void_probability(scenario.mu) * scenario.lambda_b


def active_fraction(scenario: Scenario) -> float:
    """kappa = lambda_k / lambda_b, the interferer thinning seen by a typical user."""
    if scenario.mode is PowerMode.ALL_ON:
        return 1.0
    return non_void_probability(scenario.mu)


_POWER_UNITS = {"W", "mW", "dBm"}
_DENSITY_UNITS = {"per_m2", "per_km2"}


def _to_watts(value: float, unit: str) -> float:
    if unit == "W":
        return value
    if unit == "mW":
        return value * 1e-3
    return 10.0 ** ((value - 30.0) / 10.0)


def _from_watts(value: float, unit: str) -> float:
    if unit == "W":
        return value
    if unit == "mW":
        return value * 1e3
    if not value > 0:
        raise UnitConversionError(f"cannot express non-positive power {value} W in dBm")
    return 10.0 * math.log10(value) + 30.0


def convert_units(value: float, from_unit: str, to_unit: str) -> float:
    """
    Convert between boundary units: powers (W, mW, dBm) and densities (per_m2, per_km2).

    Example: ``convert_units(-100, "dBm", "W") == 1e-13``.
    """
    if from_unit == to_unit and (from_unit in _POWER_UNITS or from_unit in _DENSITY_UNITS):
        return value
    if from_unit in _POWER_UNITS and to_unit in _POWER_UNITS:
        return _from_watts(_to_watts(value, from_unit), to_unit)
    if from_unit == "per_km2" and to_unit == "per_m2":
        return value * 1e-6
    if from_unit == "per_m2" and to_unit == "per_km2":
        return value * 1e6
    raise UnitConversionError(f"unknown unit pair: {from_unit} -> {to_unit}")

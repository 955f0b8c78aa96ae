"""
Gamma, Gauss hypergeometric 2F1 on the negative real axis, and the
interference kernel rho(T, alpha) used by the coverage exponent.
"""
from __future__ import annotations

import math

from pydantic import BaseModel, ConfigDict
from scipy import special

from smallcell.lib.errors import DomainError, UnsupportedDomainError
from smallcell.lib.logging_config import get_logger

logger = get_logger(__name__)

SERIES_RTOL = 1e-16
SERIES_MAX_TERMS = 200_000
# Below this z the z/(z-1) series stalls; switch to the 1/z connection formula.
RECIPROCAL_SWITCH = -8.0


class Hyp2F1Args(BaseModel):
    """Real parameters of 2F1(a, b; c; z). Regime checks happen in :func:`hyp2f1`."""

    model_config = ConfigDict(frozen=True)

    a: float
    b: float
    c: float
    z: float


class RhoArgs(BaseModel):
    """SINR threshold T >= 0 (linear) and path-loss exponent alpha > 2."""

    model_config = ConfigDict(frozen=True)

    T: float
    alpha: float


def gamma_fn(x: float) -> float:
    """Gamma function for positive real arguments."""
    if not x > 0:
        raise DomainError(f"gamma_fn requires x > 0, got {x}")
    return float(special.gamma(x))


def _is_nonpositive_integer(value: float) -> bool:
    return value <= 0 and float(value).is_integer()


def _series(a: float, b: float, c: float, z: float) -> float:
    """Defining power series, summed until a term drops below 1e-16 of the partial sum."""
    if abs(z) >= 1.0:
        raise UnsupportedDomainError(f"power series needs |z| < 1, got z={z}")
    term = 1.0
    total = 1.0
    for n in range(SERIES_MAX_TERMS):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * z
        total += term
        if term == 0.0 or abs(term) <= SERIES_RTOL * abs(total):
            return total
    raise UnsupportedDomainError(
        f"2F1 series did not converge in {SERIES_MAX_TERMS} terms (a={a}, b={b}, c={c}, z={z})"
    )


def _pfaff(a: float, b: float, c: float, z: float) -> float:
    """2F1(a,b;c;z) = (1-z)^-a 2F1(a, c-b; c; z/(z-1)), maps z < 0 into (0, 1)."""
    w = z / (z - 1.0)
    return (1.0 - z) ** (-a) * _series(a, c - b, c, w)


def _reciprocal(a: float, b: float, c: float, z: float) -> float:
    """Connection formula around z = infinity; needs b - a not an integer."""
    inv = 1.0 / z
    first = (
        special.gamma(c) * special.gamma(b - a) * special.rgamma(b) * special.rgamma(c - a)
        * (-z) ** (-a) * _series(a, a - c + 1.0, a - b + 1.0, inv)
    )
    second = (
        special.gamma(c) * special.gamma(a - b) * special.rgamma(a) * special.rgamma(c - b)
        * (-z) ** (-b) * _series(b, b - c + 1.0, b - a + 1.0, inv)
    )
    return float(first + second)


def hyp2f1(args: Hyp2F1Args) -> float:
    """
    Gauss hypergeometric function for real parameters and z <= 0.

    Direct series on (-1, 0]; the z/(z-1) transformation on [-8, -1]; the
    reciprocal connection formula below -8 when b - a is not an integer.
    """
    a, b, c, z = args.a, args.b, args.c, args.z
    if z > 0:
        raise UnsupportedDomainError(f"hyp2f1 supports z <= 0 only, got z={z}")
    if _is_nonpositive_integer(c):
        raise UnsupportedDomainError(f"c must not be zero or a negative integer, got c={c}")
    if z == 0.0 or a == 0.0 or b == 0.0:
        return 1.0
    if z > -1.0:
        return _series(a, b, c, z)
    if z < RECIPROCAL_SWITCH and not float(b - a).is_integer() and not _is_nonpositive_integer(a - c + 1.0):
        return _reciprocal(a, b, c, z)
    return _pfaff(a, b, c, z)


def rho(args: RhoArgs) -> float:
    """(2T/(alpha-2)) * 2F1(1, 1-2/alpha; 2-2/alpha; -T)."""
    T, alpha = args.T, args.alpha
    if not alpha > 2:
        raise DomainError(f"rho requires alpha > 2, got {alpha}")
    if not T >= 0:
        raise DomainError(f"rho requires T >= 0, got {T}")
    if T == 0.0:
        return 0.0
    delta = 2.0 / alpha
    value = 2.0 * T / (alpha - 2.0) * hyp2f1(Hyp2F1Args(a=1.0, b=1.0 - delta, c=2.0 - delta, z=-T))
    if not math.isfinite(value):
        logger.warning("Non-finite interference kernel", extra={"T": T, "alpha": alpha})
    return value


def rho_value(T: float, alpha: float) -> float:
    """Plain-float shortcut of :func:`rho` for hot loops."""
    return rho(RhoArgs(T=T, alpha=alpha))

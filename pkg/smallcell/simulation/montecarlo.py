"""
Monte Carlo oracle for the small-cell model.

Each realization drops BSs and users as independent homogeneous PPPs on a
square window, associates every user with its nearest BS, and draws
unit-mean exponential fading per link. A user placed at the window centre
plays the typical user. Randomness comes from per-realization substreams of
one seed, so any realization can be regenerated alone and parallel runs
match sequential ones.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import partial
from typing import IO, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import spatial, stats

from smallcell.lib.errors import DomainError
from smallcell.lib.logging_config import get_logger
from smallcell.lib.network_model import NetworkParams, PowerMode, min_transmit_power
from smallcell.lib.parallel import ordered_map

logger = get_logger(__name__)

MIN_EXPECTED_BS = 500
# users per distance/fading block when evaluating every user's SINR
USER_BLOCK = 512


class Boundary(str, Enum):
    TORUS = "torus"
    GUARD = "guard"


class _Stream(int, Enum):
    POSITIONS = 0
    TYPICAL_FADING = 1
    USER_FADING = 2


class SimConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    window_side: Optional[float] = Field(default=None, gt=0.0, description="metres; sized from target_bs_count when unset")
    target_bs_count: float = Field(default=2000.0, ge=MIN_EXPECTED_BS)
    seed: int = Field(default=2015, ge=0, lt=2**64)
    n_realizations: int = Field(default=200, ge=1)
    boundary: Boundary = Boundary.TORUS
    guard_width: float = Field(default=0.0, ge=0.0, description="metres")
    workers: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _check_guard(self) -> "SimConfig":
        if self.boundary is Boundary.GUARD and not self.guard_width > 0:
            raise ValueError("guard boundary needs guard_width > 0")
        if self.window_side is not None and self.boundary is Boundary.GUARD and 2 * self.guard_width >= self.window_side:
            raise ValueError(f"guard_width {self.guard_width} m leaves no interior in a {self.window_side} m window")
        return self

    def side_for(self, lambda_b: float) -> float:
        """Window side in metres for BS density lambda_b (per m^2)."""
        if not lambda_b > 0:
            raise DomainError(f"lambda_b must be positive, got {lambda_b}")
        side = self.window_side if self.window_side is not None else math.sqrt(self.target_bs_count / lambda_b)
        if self.boundary is Boundary.GUARD:
            side = side if self.window_side is not None else side + 2 * self.guard_width
        expected = lambda_b * side * side
        if expected < MIN_EXPECTED_BS:
            raise DomainError(
                f"window of {side:.1f} m holds only {expected:.0f} expected BSs; need at least {MIN_EXPECTED_BS}"
            )
        return side


class EstimatorOutput(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean: float
    half_width_95: float
    n_samples: int


@dataclass(frozen=True)
class PointPattern:
    """One realization: BS and user positions (m), nearest-BS association and active BSs."""

    bs_positions: np.ndarray
    user_positions: np.ndarray
    association: np.ndarray
    active_mask: np.ndarray
    mode: PowerMode
    lambda_b: float
    lambda_u: float
    window_side: float
    boundary: Boundary = Boundary.TORUS
    guard_width: float = 0.0
    seed: int = 0
    index: int = 0

    @property
    def center(self) -> np.ndarray:
        return np.array([self.window_side / 2.0, self.window_side / 2.0])

    def user_counts(self) -> np.ndarray:
        return np.bincount(self.association, minlength=len(self.bs_positions))

    def active_for(self, mode: PowerMode) -> np.ndarray:
        if mode is PowerMode.ALL_ON:
            return np.ones(len(self.bs_positions), dtype=bool)
        return self.user_counts() > 0

    def interior_mask(self) -> np.ndarray:
        """BSs whose statistics are free of edge effects."""
        if self.boundary is Boundary.TORUS:
            return np.ones(len(self.bs_positions), dtype=bool)
        xy = self.bs_positions
        margin = np.minimum(np.minimum(xy[:, 0], xy[:, 1]), np.minimum(self.window_side - xy[:, 0], self.window_side - xy[:, 1]))
        return margin >= self.guard_width

    def distances(self, origins: np.ndarray) -> np.ndarray:
        """(len(origins), n_bs) distance matrix under the window metric."""
        delta = np.abs(origins[:, None, :] - self.bs_positions[None, :, :])
        if self.boundary is Boundary.TORUS:
            delta = np.minimum(delta, self.window_side - delta)
        return np.hypot(delta[..., 0], delta[..., 1])


def _substream(seed: int, index: int, stream: _Stream) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index, int(stream))))


def _nearest(bs: np.ndarray, points: np.ndarray, side: float, boundary: Boundary) -> np.ndarray:
    if len(points) == 0:
        return np.zeros(0, dtype=np.intp)
    tree = spatial.cKDTree(bs, boxsize=side if boundary is Boundary.TORUS else None)
    _, idx = tree.query(points)
    return np.asarray(idx, dtype=np.intp)


def sample_network(
    lambda_b: float,
    lambda_u: float,
    config: SimConfig,
    mode: PowerMode = PowerMode.ALL_ON,
    index: int = 0,
) -> PointPattern:
    """Draw realization ``index``: Poisson counts, uniform positions, nearest-BS association."""
    if lambda_u < 0:
        raise DomainError(f"lambda_u must be nonnegative, got {lambda_u}")
    side = config.side_for(lambda_b)
    area = side * side
    rng = _substream(config.seed, index, _Stream.POSITIONS)
    while True:
        n_bs = int(rng.poisson(lambda_b * area))
        if n_bs > 0:
            break
        logger.warning("Realization drew zero BSs; resampling", extra={"index": index, "lambda_b": lambda_b})
    bs = np.mod(rng.uniform(0.0, side, size=(n_bs, 2)), side)
    n_users = int(rng.poisson(lambda_u * area)) if lambda_u > 0 else 0
    users = np.mod(rng.uniform(0.0, side, size=(n_users, 2)), side)
    association = _nearest(bs, users, side, config.boundary)

    counts = np.bincount(association, minlength=n_bs)
    active = counts > 0 if mode is PowerMode.ON_OFF else np.ones(n_bs, dtype=bool)
    logger.debug("Sampled realization", extra={"index": index, "n_bs": n_bs, "n_users": n_users, "n_active": int(active.sum())})
    return PointPattern(
        bs_positions=bs,
        user_positions=users,
        association=association,
        active_mask=active,
        mode=mode,
        lambda_b=lambda_b,
        lambda_u=lambda_u,
        window_side=side,
        boundary=config.boundary,
        guard_width=config.guard_width,
        seed=config.seed,
        index=index,
    )


def sample_patterns(
    lambda_b: float, lambda_u: float, config: SimConfig, mode: PowerMode = PowerMode.ALL_ON
) -> List[PointPattern]:
    """All ``config.n_realizations`` realizations, in index order."""
    logger.info(
        "Sampling realizations",
        extra={"lambda_b": lambda_b, "lambda_u": lambda_u, "n": config.n_realizations, "seed": config.seed, "boundary": config.boundary.value},
    )
    func = partial(_sample_indexed, lambda_b=lambda_b, lambda_u=lambda_u, config=config, mode=mode)
    return ordered_map(func, range(config.n_realizations), config.workers)


def _sample_indexed(index: int, lambda_b: float, lambda_u: float, config: SimConfig, mode: PowerMode) -> PointPattern:
    return sample_network(lambda_b, lambda_u, config, mode, index)


def summarize(samples: Sequence[float]) -> EstimatorOutput:
    """Sample mean with a Student-t 95% half-width; compensated sums keep order effects below 1e-12."""
    values = [float(v) for v in samples]
    n = len(values)
    if n == 0:
        raise DomainError("estimator needs at least one sample")
    mean = math.fsum(values) / n
    if n == 1:
        return EstimatorOutput(mean=mean, half_width_95=math.inf, n_samples=1)
    variance = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    half_width = float(stats.t.ppf(0.975, n - 1)) * math.sqrt(variance / n)
    return EstimatorOutput(mean=mean, half_width_95=half_width, n_samples=n)


def sinr(serving_gain: float, interferer_gains: np.ndarray, noise_power: float) -> float:
    """Signal over noise plus summed interference, all in watts."""
    return float(serving_gain / (noise_power + math.fsum(np.asarray(interferer_gains, dtype=float))))


def typical_user_links(pattern: PointPattern, mode: PowerMode, params: NetworkParams) -> Tuple[float, np.ndarray]:
    """
    Received powers at the typical user: (serving link, active interferers).

    The serving BS always transmits, even under on-off control, because the
    typical user itself occupies its cell.
    """
    d = pattern.distances(pattern.center[None, :])[0]
    serving = int(np.argmin(d))
    fading = _substream(pattern.seed, pattern.index, _Stream.TYPICAL_FADING).exponential(1.0, size=len(d))
    tx = params.path_loss_constant * min_transmit_power(pattern.lambda_b, params)
    gains = tx * fading * d ** (-params.alpha)
    interferers = pattern.active_for(mode).copy()
    interferers[serving] = False
    return float(gains[serving]), gains[interferers]


def _typical_sinr(pattern: PointPattern, mode: PowerMode, params: NetworkParams) -> float:
    signal, interference = typical_user_links(pattern, mode, params)
    return sinr(signal, interference, params.noise_power)


def estimate_sinr_rate(patterns: Iterable[PointPattern], mode: PowerMode, params: NetworkParams) -> EstimatorOutput:
    """Mean of log2(1 + SINR) at the typical user, one draw per realization."""
    return summarize([math.log2(1.0 + _typical_sinr(p, mode, params)) for p in patterns])


def estimate_outage(patterns: Iterable[PointPattern], mode: PowerMode, T: float, params: NetworkParams) -> EstimatorOutput:
    """Fraction of typical-user SINR draws below T (linear)."""
    if not T > 0:
        raise DomainError(f"SINR threshold must be positive, got {T}")
    return summarize([1.0 if _typical_sinr(p, mode, params) < T else 0.0 for p in patterns])


def estimate_received_power_outage(patterns: Sequence[PointPattern], params: NetworkParams) -> EstimatorOutput:
    """Fraction of typical users whose serving-link power is at most P_r,min."""
    draws = []
    for p in patterns:
        signal, _ = typical_user_links(p, PowerMode.ALL_ON, params)
        draws.append(1.0 if signal <= params.p_r_min else 0.0)
    return summarize(draws)


def estimate_void_fraction(patterns: Sequence[PointPattern]) -> EstimatorOutput:
    """Share of BSs without users per realization (interior BSs only under a guard region)."""
    fractions = []
    for p in patterns:
        considered = p.interior_mask()
        counts = p.user_counts()[considered]
        fractions.append(float(np.mean(counts == 0)) if len(counts) else 1.0)
    return summarize(fractions)


def empirical_user_count_pmf(patterns: Sequence[PointPattern], n_max: int) -> np.ndarray:
    """Pooled relative frequencies of N_b = 0..n_max over considered BSs."""
    pooled = np.concatenate([p.user_counts()[p.interior_mask()] for p in patterns])
    freq = np.bincount(np.minimum(pooled, n_max + 1), minlength=n_max + 2)[: n_max + 1]
    return freq / max(len(pooled), 1)


def user_sinrs(pattern: PointPattern, mode: PowerMode, params: NetworkParams) -> np.ndarray:
    """SINR of every user in the realization towards its nearest BS."""
    n_users = len(pattern.user_positions)
    out = np.empty(n_users)
    if n_users == 0:
        return out
    rng = _substream(pattern.seed, pattern.index, _Stream.USER_FADING)
    tx = params.path_loss_constant * min_transmit_power(pattern.lambda_b, params)
    active = pattern.active_for(mode)
    for start in range(0, n_users, USER_BLOCK):
        stop = min(start + USER_BLOCK, n_users)
        d = pattern.distances(pattern.user_positions[start:stop])
        gains = tx * rng.exponential(1.0, size=d.shape) * d ** (-params.alpha)
        rows = np.arange(stop - start)
        serving = pattern.association[start:stop]
        signal = gains[rows, serving]
        interfering = gains * active[None, :]
        interfering[rows, serving] = 0.0
        out[start:stop] = signal / (params.noise_power + interfering.sum(axis=1))
    return out


def _cell_and_user_sample(pattern: PointPattern, mode: PowerMode, params: NetworkParams) -> Tuple[float, float]:
    considered = pattern.interior_mask()
    if not considered.any():
        return 0.0, 0.0
    rates = np.log2(1.0 + user_sinrs(pattern, mode, params))
    counts = pattern.user_counts()
    per_cell_sum = np.bincount(pattern.association, weights=rates, minlength=len(counts))
    per_cell = np.where(counts > 0, per_cell_sum / np.maximum(counts, 1), 0.0)
    cell = math.fsum(per_cell[considered]) / int(considered.sum())

    users = considered[pattern.association] if len(rates) else np.zeros(0, dtype=bool)
    if not users.any():
        return cell, 0.0
    shares = rates[users] / counts[pattern.association[users]]
    return cell, math.fsum(shares) / int(users.sum())


def estimate_cell_and_user_rate(
    patterns: Sequence[PointPattern], mode: PowerMode, params: NetworkParams
) -> Tuple[EstimatorOutput, EstimatorOutput]:
    """
    Cell rate: per-cell mean of log2(1 + SINR), void cells counting 0, averaged over cells.
    User rate: each user's log2(1 + SINR) divided by its cell's user count, averaged over users.
    """
    samples = [_cell_and_user_sample(p, mode, params) for p in patterns]
    return summarize([s[0] for s in samples]), summarize([s[1] for s in samples])


def write_pattern_csv(pattern: PointPattern, path: Union[str, IO[str]]) -> None:
    """Dump one realization as rows of (x, y, kind, serving_index, active) to a path or text stream."""
    n_bs = len(pattern.bs_positions)
    bs = pd.DataFrame(
        {
            "x": pattern.bs_positions[:, 0],
            "y": pattern.bs_positions[:, 1],
            "kind": "bs",
            "serving_index": np.arange(n_bs),
            "active": pattern.active_mask,
        }
    )
    users = pd.DataFrame(
        {
            "x": pattern.user_positions[:, 0],
            "y": pattern.user_positions[:, 1],
            "kind": "user",
            "serving_index": pattern.association,
            "active": pattern.active_mask[pattern.association] if len(pattern.association) else np.zeros(0, dtype=bool),
        }
    )
    frame = pd.concat([bs, users], ignore_index=True)
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    logger.info("Wrote point pattern", extra={"path": str(getattr(path, "name", path)), "n_bs": n_bs, "n_users": len(users)})

"""Derivative-free scalar maximization: log-spaced grid scan, then golden-section refinement."""
from __future__ import annotations

import math
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from smallcell.lib.logging_config import get_logger
from smallcell.lib.parallel import ordered_map

logger = get_logger(__name__)

INV_PHI = (math.sqrt(5) - 1) / 2  # 1 / phi
INV_PHI_SQUARED = (3 - math.sqrt(5)) / 2  # 1 / phi^2
# Relative difference below which two grid values count as a tie
NOISE_RTOL = 1e-9


class ScanResult(NamedTuple):
    best_index: int
    unimodal: bool


def log_grid(lower: float, upper: float, points: int) -> List[float]:
    if points == 1:
        return [upper]
    grid = np.geomspace(lower, upper, points)
    grid[-1] = upper
    return [float(v) for v in grid]


def _ties(a: float, b: float) -> bool:
    return abs(a - b) <= NOISE_RTOL * max(abs(a), abs(b), 1e-300)


def scan(values: Sequence[float]) -> ScanResult:
    """
    Index of the best grid value (ties go to the largest abscissa) and whether
    the sequence is single-peaked once ties are collapsed.
    """
    best = 0
    for i, v in enumerate(values):
        if v > values[best] or _ties(v, values[best]):
            best = i
    # collapse plateaus, then count strict local maxima
    collapsed: List[float] = []
    for v in values:
        if not collapsed or not _ties(v, collapsed[-1]):
            collapsed.append(v)
    peaks = 0
    for i, v in enumerate(collapsed):
        left = collapsed[i - 1] if i > 0 else -math.inf
        right = collapsed[i + 1] if i + 1 < len(collapsed) else -math.inf
        if v > left and v > right:
            peaks += 1
    return ScanResult(best, peaks <= 1)


def golden_section_max(
    func: Callable[[float], float], a: float, b: float, tol: float, trace: Optional[List[Tuple[float, float]]] = None
) -> Tuple[float, float]:
    """
    Golden-section search for the maximum of a unimodal ``func`` on [a, b].

    Reuses one interior evaluation per iteration and stops once the bracket
    is narrower than ``tol``. Returns (x, func(x)) at the best evaluated point.
    """
    (a, b) = (min(a, b), max(a, b))
    h = b - a

    def evaluate(x: float) -> float:
        y = func(x)
        if trace is not None:
            trace.append((x, y))
        return y

    if h <= tol:
        x = 0.5 * (a + b)
        return x, evaluate(x)

    # Required steps to achieve tolerance
    n = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))

    c = a + INV_PHI_SQUARED * h
    d = a + INV_PHI * h
    yc = evaluate(c)
    yd = evaluate(d)

    for _ in range(n - 1):
        if yc > yd:
            b = d
            d = c
            yd = yc
            h = INV_PHI * h
            c = a + INV_PHI_SQUARED * h
            yc = evaluate(c)
        else:
            a = c
            c = d
            yc = yd
            h = INV_PHI * h
            d = a + INV_PHI * h
            yd = evaluate(d)

    return (c, yc) if yc > yd else (d, yd)


def evaluate_grid(func: Callable[[float], float], grid: Sequence[float], workers: int = 1) -> List[float]:
    return ordered_map(func, grid, workers)

"""
Chemoattractant resolvent v = alpha (-Delta + gamma)^{-1} u on radial data.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded

from core.exceptions import InvalidParameterError
from core.utils.geometry import RadialField, RadialGrid, lp_norm, radial_derivative

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
SOURCE_DECAY_TOL = 1e-10


def _check_gamma(gamma: float) -> None:
    if not gamma >= 0:
        raise InvalidParameterError(f"Chemical decay rate gamma must be >= 0, got {gamma}.")


@lru_cache(maxsize=32)
def _resolvent_bands(grid: RadialGrid, gamma: float) -> np.ndarray:
    """
    Banded storage of -(v'' + (n-1) coth(r) v') + gamma v.

    Row 0 is the axis limit -n v''(0) with the even ghost node v_{-1} = v_1;
    the last row enforces v(r_max) = 0.
    """
    if gamma == 0:
        logger.warning(
            "gamma=0: the resolvent is solved with a Dirichlet condition at r_max=%g; "
            "truncation error is of order e^{-c r_max}.",
            grid.r_max,
        )
    N = grid.num_nodes
    dr2 = grid.spacing ** 2
    drift = (grid.n - 1) * grid.coth / (2.0 * grid.spacing)
    lower = np.zeros(N)
    diag = np.full(N, 2.0 / dr2 + gamma)
    upper = np.zeros(N)

    diag[0] = 2.0 * grid.n / dr2 + gamma
    upper[0] = -2.0 * grid.n / dr2
    lower[1:-1] = -(1.0 / dr2 - drift[1:-1])
    upper[1:-1] = -(1.0 / dr2 + drift[1:-1])
    diag[-1] = 1.0

    bands = np.zeros((3, N))
    bands[0, 1:] = upper[:-1]
    bands[1] = diag
    bands[2, :-1] = lower[1:]
    bands.setflags(write=False)
    return bands


def _apply_bands(bands: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = bands[1] * v
    out[:-1] += bands[0, 1:] * v[1:]
    out[1:] += bands[2, :-1] * v[:-1]
    return out


def _right_hand_side(source: RadialField, alpha: float) -> np.ndarray:
    rhs = alpha * np.array(source.values)
    rhs[-1] = 0.0
    return rhs


def solve_resolvent(source: RadialField, gamma: float, alpha: float) -> RadialField:
    """
    Solves -(v'' + (n-1) coth(r) v') + gamma v = alpha * source with v'(0) = 0 and v(r_max) = 0.

    Direct tridiagonal solve; the discrete residual is checked after every call.
    """
    _check_gamma(gamma)
    if not alpha > 0:
        raise InvalidParameterError(f"Production rate alpha must be positive, got {alpha}.")
    if abs(source.values[-1]) > SOURCE_DECAY_TOL:
        logger.warning(
            "Resolvent source is %.3e at r_max=%g; truncation assumes it has decayed.",
            abs(source.values[-1]), source.grid.r_max,
        )
    bands = _resolvent_bands(source.grid, float(gamma))
    rhs = _right_hand_side(source, alpha)
    v = solve_banded((1, 1), bands, rhs)
    residual = resolvent_residual(bands, v, rhs)
    if residual > RESIDUAL_TOL:
        logger.warning("Resolvent residual %.3e exceeds %.1e.", residual, RESIDUAL_TOL)
    return RadialField(source.grid, v)


def resolvent_residual(bands: np.ndarray, v: np.ndarray, rhs: np.ndarray) -> float:
    """Max-norm residual of the discrete system, relative to max(1, |rhs|_inf)."""
    scale = max(1.0, float(np.max(np.abs(rhs))))
    return float(np.max(np.abs(_apply_bands(bands, v) - rhs))) / scale


def discrete_residual(source: RadialField, v: RadialField, gamma: float, alpha: float) -> float:
    """Residual of a candidate solution v against the discrete resolvent system."""
    return resolvent_residual(_resolvent_bands(source.grid, float(gamma)), v.values, _right_hand_side(source, alpha))


def gradient_of_resolvent(source: RadialField, gamma: float, alpha: float) -> RadialField:
    """d/dr of solve_resolvent(source, gamma, alpha); zero on the axis."""
    return radial_derivative(solve_resolvent(source, gamma, alpha))


def k_gamma(gamma: float, n: int) -> float:
    """k(0) = 1 and k(gamma) = gamma^{-(n-1)} for gamma > 0."""
    _check_gamma(gamma)
    if gamma == 0:
        return 1.0
    return gamma ** (-(n - 1))


@dataclass
class ResolventBoundReport:
    n: int
    gamma: float
    p: float
    q: float
    k_gamma: float
    ratios: List[float] = field(default_factory=list)

    @property
    def empirical_constant(self) -> float:
        return max(self.ratios, default=0.0)

    def to_dict(self) -> Dict:
        return {
            "n": self.n,
            "gamma": self.gamma,
            "p": self.p,
            "q": self.q,
            "k_gamma": self.k_gamma,
            "empirical_constant": self.empirical_constant,
            "sources": len(self.ratios),
        }


def check_resolvent_bound(
    sources: Sequence[RadialField],
    gamma: float,
    p: float,
    q: Optional[float] = None,
) -> ResolventBoundReport:
    """
    Empirical constant in ||d/dr (-Delta + gamma)^{-1} f||_q <= C k(gamma) ||f||_p
    with the Sobolev pairing 1/q = 1/p - 1/n. q is derived from p when omitted.
    """
    if not sources:
        raise InvalidParameterError("Need at least one source profile.")
    n = sources[0].grid.n
    if not 1 < p < n:
        raise InvalidParameterError(f"Resolvent bound needs 1 < p < n={n}, got p={p}.")
    sobolev_q = 1.0 / (1.0 / p - 1.0 / n)
    if q is None:
        q = sobolev_q
    elif not math.isclose(1.0 / q, 1.0 / p - 1.0 / n, rel_tol=0, abs_tol=1e-12):
        raise InvalidParameterError(f"Exponents p={p}, q={q} violate 1/q = 1/p - 1/n.")
    report = ResolventBoundReport(n=n, gamma=gamma, p=p, q=q, k_gamma=k_gamma(gamma, n))
    for f in sources:
        base = lp_norm(f, p)
        if base == 0.0:
            continue
        gradient = gradient_of_resolvent(f, gamma, 1.0)
        report.ratios.append(lp_norm(gradient, q) / (report.k_gamma * base))
    logger.info(
        "Resolvent bound gamma=%g (p=%g, q=%.6g): empirical C = %.6g.",
        gamma, p, q, report.empirical_constant,
    )
    return report

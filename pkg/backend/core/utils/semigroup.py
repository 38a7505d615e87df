"""
Radial heat propagation e^{t Delta} on H^2 and H^3 and the dispersive-estimate constants.

n = 3 reduces to a flat 1-D heat problem through w = sinh(r) u, solved exactly
in the discrete sine basis. n = 2 convolves against the heat kernel, whose
spherical average is assembled once per (grid, t).
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.fft import dst, idst
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from core.exceptions import CalibrationError, InvalidParameterError
from core.utils.geometry import RadialField, RadialGrid, lp_norm, radial_divergence

logger = logging.getLogger(__name__)

DEFAULT_C_TILDE = 2.0
CERTIFY_RTOL = 1e-12
DELTA_SEARCH_MIN = 1e-3
DELTA_SEARCH_POINTS = 64
C_TILDE_SEARCH_MAX = 1e3

KERNEL_RTOL = 1e-10
# kernel mass beyond e^{-d^2/4t} < e^{-45} is dropped from the n = 2 convolution
KERNEL_CUTOFF_EXPONENT = 45.0
KERNEL_TABLE_NODES = 1025
ANGULAR_NODES = 64
# relative size below which propagated sinh(r) u is transform round-off
DST_ROUNDOFF_FLOOR = 1e-13


class Provenance(str, Enum):
    DEFAULT = "default"
    CALIBRATED = "calibrated"


@dataclass(frozen=True)
class DispersiveConstants:
    """C-tilde and delta_n of the dispersive estimate, with where they came from."""
    n: int
    c_tilde: float
    delta_n: float
    provenance: Provenance = Provenance.DEFAULT
    worst_ratio: Optional[float] = None
    profiles_used: int = 0

    def __post_init__(self):
        if not self.c_tilde > 0:
            raise InvalidParameterError(f"c_tilde must be positive, got {self.c_tilde}.")
        if not self.delta_n > 0:
            raise InvalidParameterError(f"delta_n must be positive, got {self.delta_n}.")
        object.__setattr__(self, "provenance", Provenance(self.provenance))

    @classmethod
    def default(cls, n: int) -> "DispersiveConstants":
        """C-tilde = 2 and delta_n = (n-1)^2/4, the bottom of the L^2 spectrum."""
        return cls(n=n, c_tilde=DEFAULT_C_TILDE, delta_n=(n - 1) ** 2 / 4.0)

    @classmethod
    def from_dict(cls, data: Dict) -> "DispersiveConstants":
        return cls(
            n=int(data["n"]),
            c_tilde=float(data["c_tilde"]),
            delta_n=float(data["delta_n"]),
            provenance=data.get("provenance", Provenance.DEFAULT),
            worst_ratio=data.get("worst_ratio"),
            profiles_used=int(data.get("profiles_used", 0)),
        )

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["provenance"] = self.provenance.value
        return data


@dataclass
class EstimateSample:
    profile_index: int
    t: float
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        if self.rhs == 0.0:
            return 0.0 if self.lhs == 0.0 else math.inf
        return self.lhs / self.rhs


@dataclass
class DispersiveReport:
    """Outcome of sweeping an L^p -> L^q estimate over profiles and times."""
    kind: str
    n: int
    p: float
    q: float
    c_tilde: float
    delta_n: float
    samples: List[EstimateSample] = field(default_factory=list)

    @property
    def worst_ratio(self) -> float:
        return max((s.ratio for s in self.samples), default=0.0)

    @property
    def certified(self) -> bool:
        return self.worst_ratio <= 1.0 + CERTIFY_RTOL

    def to_dict(self) -> Dict:
        return {
            "kind": self.kind,
            "n": self.n,
            "p": self.p,
            "q": self.q,
            "c_tilde": self.c_tilde,
            "delta_n": self.delta_n,
            "worst_ratio": self.worst_ratio,
            "certified": self.certified,
            "samples": len(self.samples),
        }


# --- heat kernels ---

def _check_time(t: float, allow_zero: bool = False) -> None:
    if allow_zero and not t >= 0:
        raise InvalidParameterError(f"Time must be non-negative, got {t}.")
    if not allow_zero and not t > 0:
        raise InvalidParameterError(f"Time must be positive, got {t}.")


def _r_over_sinh(r: np.ndarray) -> np.ndarray:
    out = np.ones_like(r)
    small = r < 1e-4
    out[small] = 1.0 - r[small] ** 2 / 6.0
    out[~small] = r[~small] / np.sinh(r[~small])
    return out


def _log_kernel_h2(t: float, r: float) -> float:
    """
    log p_t(r) on H^2.

    The factor e^{-r^2/4t} is pulled out of the inner integral over [r, inf),
    and s = r + xi^2 removes the (cosh s - cosh r)^{-1/2} endpoint singularity.
    """
    r = float(r)

    def integrand(xi: float) -> float:
        x2 = xi * xi
        gap = 2.0 * math.sinh(r + 0.5 * x2) * math.sinh(0.5 * x2)
        if gap <= 0.0:
            return 2.0 * r / math.sqrt(math.sinh(r)) if r > 0 else 0.0
        return 2.0 * xi * (r + x2) * math.exp(-x2 * (2.0 * r + x2) / (4.0 * t)) / math.sqrt(gap)

    # the Gaussian factor is below e^{-60} past xi_max
    xi_max = math.sqrt(math.sqrt(r * r + 240.0 * t) - r)
    inner, _ = quad(integrand, 0.0, xi_max, epsabs=0.0, epsrel=KERNEL_RTOL, limit=200)
    return (
        0.5 * math.log(2.0)
        - 1.5 * math.log(4.0 * math.pi * t)
        - 0.25 * t
        - r * r / (4.0 * t)
        + math.log(inner)
    )


def heat_kernel(t: float, r, n: int):
    """
    Heat kernel p_t(r) of H^n with respect to hyperbolic volume, n in {2, 3}.

    n = 3: (4 pi t)^{-3/2} e^{-t} (r / sinh r) e^{-r^2/4t}.
    n = 2: sqrt(2) (4 pi t)^{-3/2} e^{-t/4} int_r^inf s e^{-s^2/4t} (cosh s - cosh r)^{-1/2} ds.
    Accepts scalar or array radii.
    """
    _check_time(t)
    if n not in (2, 3):
        raise InvalidParameterError(f"Heat kernels are implemented for n in (2, 3), got {n}.")
    radii = np.asarray(r, dtype=float)
    if np.any(radii < 0):
        raise InvalidParameterError("Radius must be non-negative.")
    flat = np.atleast_1d(radii)
    if n == 3:
        values = (
            (4.0 * math.pi * t) ** -1.5 * math.exp(-t) * _r_over_sinh(flat) * np.exp(-flat ** 2 / (4.0 * t))
        )
    else:
        values = np.exp([_log_kernel_h2(t, s) for s in flat])
    if radii.ndim == 0:
        return float(values[0])
    return values.reshape(radii.shape)


# --- n = 2 spherical convolution ---

def _cutoff_distance(t: float) -> float:
    return math.sqrt(4.0 * t * KERNEL_CUTOFF_EXPONENT)


@lru_cache(maxsize=32)
def _log_kernel_table_h2(t: float, d_max: float) -> CubicSpline:
    nodes = np.linspace(0.0, d_max, KERNEL_TABLE_NODES)
    return CubicSpline(nodes, [_log_kernel_h2(t, d) for d in nodes])


@lru_cache(maxsize=1)
def _angular_rule() -> Tuple[np.ndarray, np.ndarray]:
    theta, weights = leggauss(ANGULAR_NODES)
    return 0.5 * math.pi * (theta + 1.0), 0.5 * math.pi * weights


def _spherical_average_h2(r: float, s: np.ndarray, d_cut: float, log_kernel: CubicSpline) -> np.ndarray:
    """
    K(r, s) = int_0^{2 pi} p_t(d) dphi with cosh d = cosh r cosh s - sinh r sinh s cos phi.

    Rewritten as an integral in d over [|r - s|, min(r + s, d_cut)]. The
    inverse-square-root endpoint singularities are absorbed by
    d = a + (h - a)(1 - cos theta)/2 with Gauss-Legendre in theta.
    """
    a = np.abs(r - s)
    b = r + s
    hi = np.minimum(b, d_cut)
    out = np.zeros_like(s)

    on_axis = (b - a) < 1e-12
    out[on_axis] = 2.0 * math.pi * np.exp(log_kernel(a[on_axis]))

    active = ~on_axis & (hi > a)
    if not np.any(active):
        return out
    theta, gl_weights = _angular_rule()
    A = a[active, None]
    B = b[active, None]
    H = hi[active, None]
    d = A + 0.5 * (H - A) * (1.0 - np.cos(theta))
    # cosh d - cosh a and cosh b - cosh d in product form
    pa = 2.0 * np.sinh(0.5 * (d + A)) * np.sinh(0.5 * (d - A))
    pb = 2.0 * np.sinh(0.5 * (B + d)) * np.sinh(0.5 * (B - d))
    product = pa * pb
    jacobian = np.broadcast_to(0.5 * (H - A) * np.sin(theta), d.shape)
    integrand = np.zeros_like(d)
    ok = product > 0
    integrand[ok] = np.exp(log_kernel(d[ok])) * np.sinh(d[ok]) * jacobian[ok] / np.sqrt(product[ok])
    out[active] = 2.0 * (integrand @ gl_weights)
    return out


@lru_cache(maxsize=16)
def _heat_matrix_h2(grid: RadialGrid, t: float) -> np.ndarray:
    """
    Quadrature matrix of e^{t Delta} on H^2 for one grid and time.

    Columns whose kernel support stays inside the grid are rescaled so that
    the trapezoid mass of each propagated node is exactly its own.
    """
    r = grid.nodes
    d_cut = min(_cutoff_distance(t), 2.0 * grid.r_max)
    log_kernel = _log_kernel_table_h2(t, d_cut)
    cells = grid.cells
    matrix = np.zeros((grid.num_nodes, grid.num_nodes))
    for i, ri in enumerate(r):
        band = np.abs(r - ri) < d_cut
        matrix[i, band] = _spherical_average_h2(ri, r[band], d_cut, log_kernel) * cells[band]
    column_mass = cells @ matrix
    interior = (r + d_cut <= grid.r_max) & (cells > 0) & (column_mass > 0)
    matrix[:, interior] *= cells[interior] / column_mass[interior]
    matrix.setflags(write=False)
    logger.debug("Assembled H^2 heat matrix for t=%g on %d nodes.", t, grid.num_nodes)
    return matrix


def _apply_heat_h3(values: np.ndarray, grid: RadialGrid, t: float) -> np.ndarray:
    """
    u -> e^{-t} sinh(r)^{-1} e^{t d^2/dr^2} (sinh(r) u) with Dirichlet ends at 0 and r_max.

    The axis value is the limit w'(0) of the propagated w = sinh(r) u.
    """
    r = grid.nodes
    w = np.sinh(r[1:-1]) * values[1:-1]
    coefficients = dst(w, type=1)
    wavenumbers = np.arange(1, w.size + 1) * math.pi / grid.r_max
    decayed = coefficients * np.exp(-wavenumbers ** 2 * t)
    damping = math.exp(-t)
    propagated = idst(decayed, type=1)
    # transform round-off far out is amplified by sinh(r) in the mass
    scale = np.max(np.abs(propagated), initial=0.0)
    propagated[np.abs(propagated) < DST_ROUNDOFF_FLOOR * scale] = 0.0
    out = np.empty_like(values)
    out[1:-1] = damping * propagated / np.sinh(r[1:-1])
    out[0] = damping * np.sum(decayed * wavenumbers) / (w.size + 1)
    out[-1] = 0.0
    return out


def apply_heat(u: RadialField, t: float) -> RadialField:
    """e^{t Delta} applied to a radial density; t = 0 is the identity."""
    _check_time(t, allow_zero=True)
    if t == 0:
        return u
    grid = u.grid
    grid.require_propagation()
    if grid.n == 3:
        return RadialField(grid, _apply_heat_h3(u.values, grid, t))
    return RadialField(grid, _heat_matrix_h2(grid, float(t)) @ u.values)


def apply_div_heat(vfield: RadialField, t: float) -> RadialField:
    """
    e^{t Delta}(div V) for the d/dr-component of a radial vector field.

    The divergence is taken first and the scalar heat flow applied after.
    """
    _check_time(t, allow_zero=True)
    return apply_heat(radial_divergence(vfield), t)


# --- dispersive constants ---

def h_n(t: float, constants: DispersiveConstants) -> float:
    """h_n(t) = C-tilde * max(t^{-n/2}, 1)."""
    _check_time(t)
    return constants.c_tilde * max(t ** (-0.5 * constants.n), 1.0)


def _inverse(p: float) -> float:
    return 0.0 if math.isinf(p) else 1.0 / p


def _check_pair(p: float, q: float) -> None:
    if not 1 <= p <= q:
        raise InvalidParameterError(f"Exponents must satisfy 1 <= p <= q, got p={p}, q={q}.")


def gamma_pq(p: float, q: float, constants: DispersiveConstants) -> float:
    """gamma_{p,q} = (delta_n / 2)[(1/p - 1/q) + (8/q)(1 - 1/p)]; q may be math.inf."""
    _check_pair(p, q)
    ip, iq = _inverse(p), _inverse(q)
    return 0.5 * constants.delta_n * ((ip - iq) + 8.0 * iq * (1.0 - ip))


def _propagate_all(profiles: Sequence[RadialField], times: Sequence[float]) -> List[List[RadialField]]:
    return [[apply_heat(u, t) for t in times] for u in profiles]


def _check_sweep(profiles: Sequence[RadialField], times: Sequence[float]) -> None:
    if not profiles or not times:
        raise InvalidParameterError("Estimate sweeps need at least one profile and one time.")
    for t in times:
        _check_time(t)


def check_dispersive(
    profiles: Sequence[RadialField],
    times: Sequence[float],
    p: float,
    q: float,
    constants: DispersiveConstants,
) -> DispersiveReport:
    """
    Compares ||e^{t Delta} u||_q with h_n(t)^{1/p - 1/q} e^{-t gamma_{p,q}} ||u||_p
    for every profile and time. Violations are report content.
    """
    _check_pair(p, q)
    _check_sweep(profiles, times)
    exponent = _inverse(p) - _inverse(q)
    rate = gamma_pq(p, q, constants)
    report = DispersiveReport("dispersive", constants.n, p, q, constants.c_tilde, constants.delta_n)
    for k, u in enumerate(profiles):
        base = lp_norm(u, p)
        for t in times:
            lhs = lp_norm(apply_heat(u, t), q)
            rhs = h_n(t, constants) ** exponent * math.exp(-t * rate) * base
            report.samples.append(EstimateSample(k, t, lhs, rhs))
    logger.info(
        "Dispersive sweep (p=%g, q=%g): worst ratio %.6g over %d samples.",
        p, q, report.worst_ratio, len(report.samples),
    )
    return report


def check_smoothing(
    vfields: Sequence[RadialField],
    times: Sequence[float],
    p: float,
    q: float,
    constants: DispersiveConstants,
) -> DispersiveReport:
    """
    Compares ||div e^{t Delta} V||_q with
    h_n(t)^{1/p - 1/q + 1/n} e^{-t (gamma_{q,q} + gamma_{p,q}) / 2} ||V||_p.
    """
    _check_pair(p, q)
    _check_sweep(vfields, times)
    n = constants.n
    exponent = _inverse(p) - _inverse(q) + 1.0 / n
    rate = 0.5 * (gamma_pq(q, q, constants) + gamma_pq(p, q, constants))
    report = DispersiveReport("smoothing", n, p, q, constants.c_tilde, constants.delta_n)
    for k, V in enumerate(vfields):
        base = lp_norm(V, p)
        for t in times:
            lhs = lp_norm(apply_div_heat(V, t), q)
            rhs = h_n(t, constants) ** exponent * math.exp(-t * rate) * base
            report.samples.append(EstimateSample(k, t, lhs, rhs))
    logger.info(
        "Smoothing sweep (p=%g, q=%g): worst ratio %.6g over %d samples.",
        p, q, report.worst_ratio, len(report.samples),
    )
    return report


def calibrate(
    profiles: Sequence[RadialField],
    times: Sequence[float],
    pq_pairs: Sequence[Tuple[float, float]],
) -> DispersiveConstants:
    """
    Largest delta_n on a logarithmic grid over [1e-3, (n-1)^2], and the
    smallest C-tilde >= 1 for it, such that the dispersive estimate holds on
    every profile, time and (p, q) pair.

    For p = q the estimate does not involve C-tilde, so delta_n alone must
    work. For p < q the required C-tilde is solved for in closed form.
    """
    _check_sweep(profiles, times)
    if not pq_pairs:
        raise InvalidParameterError("Calibration needs at least one (p, q) pair.")
    for p, q in pq_pairs:
        _check_pair(p, q)
    n = profiles[0].grid.n

    propagated = _propagate_all(profiles, times)
    # (t, p, q, lhs, ||u||_p) per sample
    samples = []
    for k, u in enumerate(profiles):
        for p, q in pq_pairs:
            base = lp_norm(u, p)
            if base == 0.0:
                continue
            for j, t in enumerate(times):
                samples.append((t, p, q, lp_norm(propagated[k][j], q), base))
    if not samples:
        raise CalibrationError("Every calibration profile is identically zero.")

    deltas = np.logspace(math.log10(DELTA_SEARCH_MIN), math.log10((n - 1) ** 2), DELTA_SEARCH_POINTS)[::-1]
    for delta in deltas:
        trial = DispersiveConstants(n=n, c_tilde=1.0, delta_n=float(delta))
        required = 1.0
        feasible = True
        for t, p, q, lhs, base in samples:
            exponent = _inverse(p) - _inverse(q)
            decay = math.exp(-t * gamma_pq(p, q, trial))
            if exponent == 0.0:
                if lhs > decay * base * (1.0 + CERTIFY_RTOL):
                    feasible = False
                    break
                continue
            growth = max(t ** (-0.5 * n), 1.0) ** exponent
            required = max(required, (lhs / (growth * decay * base)) ** (1.0 / exponent))
        if not feasible:
            continue
        c_tilde = required * (1.0 + 1e-9)
        if c_tilde > C_TILDE_SEARCH_MAX:
            continue
        candidate = DispersiveConstants(n=n, c_tilde=c_tilde, delta_n=float(delta))
        worst = 0.0
        for t, p, q, lhs, base in samples:
            rhs = h_n(t, candidate) ** (_inverse(p) - _inverse(q)) * math.exp(-t * gamma_pq(p, q, candidate)) * base
            worst = max(worst, lhs / rhs)
        constants = DispersiveConstants(
            n=n,
            c_tilde=float(c_tilde),
            delta_n=float(delta),
            provenance=Provenance.CALIBRATED,
            worst_ratio=worst,
            profiles_used=len(profiles),
        )
        logger.info(
            "Calibrated n=%d: c_tilde=%.6g, delta_n=%.6g, worst ratio %.6g.",
            n, constants.c_tilde, constants.delta_n, worst,
        )
        return constants
    raise CalibrationError(
        f"No (c_tilde, delta_n) in [1, {C_TILDE_SEARCH_MAX:g}] x [{DELTA_SEARCH_MIN:g}, {(n - 1) ** 2}] "
        f"certifies the sweep."
    )

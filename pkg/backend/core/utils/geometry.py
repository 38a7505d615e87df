"""
Radial discretization of real hyperbolic space H^n.

Radial data are sampled on a uniform grid r_i = i * dr over [0, r_max]. The
hyperbolic volume element in geodesic polar coordinates is
omega_{n-1} * sinh^{n-1}(r) dr, where omega_{n-1} is the area of the unit
sphere S^{n-1}. Integrals use the composite trapezoid rule on the grid.
"""
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Union

import numpy as np
from numpy.polynomial.legendre import leggauss

from core.exceptions import GridMismatchError, InvalidParameterError

logger = logging.getLogger(__name__)

DEFAULT_R_MAX = 20.0
DEFAULT_NUM_NODES = 2048
MIN_NUM_NODES = 16
PROPAGATION_DIMENSIONS = (2, 3)

# below this radius coth(r) is replaced by its Laurent series 1/r + r/3
COTH_SERIES_RADIUS = 1e-3
BOUNDARY_FLUX_TOL = 1e-10
FACE_QUADRATURE_POINTS = 4

_options = {"boundary_flux_tol": BOUNDARY_FLUX_TOL}

Number = Union[int, float]


@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial grid on [0, r_max] for H^n."""
    n: int
    r_max: float = DEFAULT_R_MAX
    num_nodes: int = DEFAULT_NUM_NODES

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise InvalidParameterError(f"Dimension must be an integer >= 2, got {self.n}.")
        if not self.r_max > 0:
            raise InvalidParameterError(f"r_max must be positive, got {self.r_max}.")
        if self.num_nodes < MIN_NUM_NODES:
            raise InvalidParameterError(
                f"A radial grid needs at least {MIN_NUM_NODES} nodes, got {self.num_nodes}."
            )

    @property
    def spacing(self) -> float:
        return self.r_max / (self.num_nodes - 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        nodes = np.arange(self.num_nodes) * self.spacing
        nodes[-1] = self.r_max
        nodes.setflags(write=False)
        return nodes

    @cached_property
    def weights(self) -> np.ndarray:
        """Composite trapezoid weights."""
        weights = np.full(self.num_nodes, self.spacing)
        weights[0] = weights[-1] = 0.5 * self.spacing
        weights.setflags(write=False)
        return weights

    @cached_property
    def volume(self) -> np.ndarray:
        """sinh^{n-1}(r) at every node."""
        volume = volume_weight(self.nodes, self.n)
        volume.setflags(write=False)
        return volume

    @cached_property
    def measure(self) -> np.ndarray:
        """Full quadrature weight omega_{n-1} * sinh^{n-1}(r_i) * w_i of every node."""
        measure = surface_area(self.n) * self.weights * self.volume
        measure.setflags(write=False)
        return measure

    @cached_property
    def cells(self) -> np.ndarray:
        """Trapezoid cell volumes w_i * sinh^{n-1}(r_i), without omega_{n-1}."""
        cells = self.weights * self.volume
        cells.setflags(write=False)
        return cells

    @cached_property
    def face_areas(self) -> np.ndarray:
        """
        sinh^{n-1} at the faces r_{i+1/2} between neighbouring nodes, scaled by
        the ratio of the trapezoid ball volume sum_{j<=i} cells_j to the exact
        ball volume int_0^{r_{i+1/2}} sinh^{n-1}. A field of unit divergence
        then differences to exactly 1 on every interior cell, and the face
        next to the axis has zero area.
        """
        faces = (np.arange(self.num_nodes - 1) + 0.5) * self.spacing
        edges = np.concatenate(([0.0], faces))
        x, w = leggauss(FACE_QUADRATURE_POINTS)
        half = 0.5 * np.diff(edges)
        points = 0.5 * (edges[1:] + edges[:-1])[:, None] + half[:, None] * x[None, :]
        exact = np.cumsum(half * (volume_weight(points, self.n) @ w))
        trapezoid = np.cumsum(self.cells)[:-1]
        areas = volume_weight(faces, self.n) * trapezoid / exact
        areas.setflags(write=False)
        return areas

    @cached_property
    def coth(self) -> np.ndarray:
        coth = regularized_coth(self.nodes)
        coth.setflags(write=False)
        return coth

    def refined(self) -> "RadialGrid":
        """The grid with half the spacing over the same interval."""
        return RadialGrid(self.n, self.r_max, 2 * self.num_nodes - 1)

    def require_propagation(self) -> None:
        if self.n not in PROPAGATION_DIMENSIONS:
            raise InvalidParameterError(
                f"Heat propagation is implemented for n in {PROPAGATION_DIMENSIONS}, got n={self.n}."
            )

    def zeros(self) -> "RadialField":
        return RadialField(self, np.zeros(self.num_nodes))

    def field(self, values) -> "RadialField":
        return RadialField(self, values)


@dataclass(frozen=True, eq=False)
class RadialField:
    """
    A radial profile sampled on a RadialGrid.

    Scalar densities and the d/dr-component of radial vector fields are both
    stored this way. Values are copied on construction and kept read-only.
    """
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.num_nodes,):
            raise InvalidParameterError(
                f"Expected {self.grid.num_nodes} samples, got shape {values.shape}."
            )
        if not np.all(np.isfinite(values)):
            raise InvalidParameterError("Radial field contains non-finite values.")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def _other_values(self, other) -> Union[np.ndarray, float]:
        if isinstance(other, RadialField):
            if other.grid != self.grid:
                raise GridMismatchError(
                    f"Cannot combine fields on {self.grid} and {other.grid}."
                )
            return other.values
        if isinstance(other, (int, float, np.floating, np.integer)):
            return float(other)
        return NotImplemented

    def __add__(self, other):
        values = self._other_values(other)
        if values is NotImplemented:
            return NotImplemented
        return RadialField(self.grid, self.values + values)

    __radd__ = __add__

    def __sub__(self, other):
        values = self._other_values(other)
        if values is NotImplemented:
            return NotImplemented
        return RadialField(self.grid, self.values - values)

    def __rsub__(self, other):
        values = self._other_values(other)
        if values is NotImplemented:
            return NotImplemented
        return RadialField(self.grid, values - self.values)

    def __mul__(self, other):
        values = self._other_values(other)
        if values is NotImplemented:
            return NotImplemented
        return RadialField(self.grid, self.values * values)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, (int, float, np.floating, np.integer)):
            return NotImplemented
        return RadialField(self.grid, self.values / float(other))

    def __neg__(self):
        return RadialField(self.grid, -self.values)

    def __repr__(self):
        return f"RadialField(n={self.grid.n}, nodes={self.grid.num_nodes}, max|u|={np.max(np.abs(self.values)):.3e})"


def surface_area(n: int) -> float:
    """Area of the unit sphere S^{n-1}: 2 pi^{n/2} / Gamma(n/2)."""
    return 2.0 * math.pi ** (0.5 * n) / math.gamma(0.5 * n)


def volume_weight(r, n: int):
    """sinh^{n-1}(r); works on scalars and arrays."""
    if np.any(np.asarray(r) < 0):
        raise InvalidParameterError("Radius must be non-negative.")
    weight = np.sinh(r) ** (n - 1)
    if np.ndim(weight) == 0:
        return float(weight)
    return weight


def regularized_coth(r: np.ndarray) -> np.ndarray:
    """coth(r) with the series 1/r + r/3 near the axis; the r = 0 entry is unused and set to 0."""
    r = np.asarray(r, dtype=float)
    coth = np.zeros_like(r)
    small = (r > 0) & (r < COTH_SERIES_RADIUS)
    large = r >= COTH_SERIES_RADIUS
    coth[small] = 1.0 / r[small] + r[small] / 3.0
    coth[large] = 1.0 / np.tanh(r[large])
    return coth


def _check_exponent(p: float) -> None:
    if not p >= 1:
        raise InvalidParameterError(f"L^p exponent must satisfy p >= 1, got {p}.")


def lp_norms(grid: RadialGrid, values: np.ndarray, p: float) -> np.ndarray:
    """Row-wise L^p(H^n) norms of a (times x nodes) array of samples."""
    _check_exponent(p)
    values = np.atleast_2d(values)
    if math.isinf(p):
        return np.max(np.abs(values), axis=1)
    integrals = (np.abs(values) ** p) @ grid.measure
    return integrals ** (1.0 / p)


def lp_norm(field: RadialField, p: float) -> float:
    """
    (omega_{n-1} * int_0^{r_max} |u|^p sinh^{n-1}(r) dr)^{1/p} by the trapezoid rule.
    p = math.inf gives the grid maximum of |u|.
    """
    return float(lp_norms(field.grid, field.values, p)[0])


def mass(field: RadialField) -> float:
    """Total hyperbolic mass omega_{n-1} * int u sinh^{n-1}(r) dr."""
    return float(field.values @ field.grid.measure)


def radial_derivative(field: RadialField) -> RadialField:
    """
    Centered second-order d/dr. The axis value is 0 (even profiles) and the
    last node uses the one-sided second-order backward difference.
    """
    u = field.values
    dr = field.grid.spacing
    du = np.empty_like(u)
    du[0] = 0.0
    du[1:-1] = (u[2:] - u[:-2]) / (2.0 * dr)
    du[-1] = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * dr)
    return RadialField(field.grid, du)


def radial_laplacian(field: RadialField) -> RadialField:
    """
    u'' + (n - 1) coth(r) u' by centered differences.

    At the axis the even-symmetry ghost node u_{-1} = u_1 gives the limit
    n * u''(0). The last node uses second-order backward differences.
    """
    grid = field.grid
    u = field.values
    dr = grid.spacing
    lap = np.empty_like(u)
    lap[0] = grid.n * 2.0 * (u[1] - u[0]) / dr ** 2
    second = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / dr ** 2
    first = (u[2:] - u[:-2]) / (2.0 * dr)
    lap[1:-1] = second + (grid.n - 1) * grid.coth[1:-1] * first
    second_end = (2.0 * u[-1] - 5.0 * u[-2] + 4.0 * u[-3] - u[-4]) / dr ** 2
    first_end = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * dr)
    lap[-1] = second_end + (grid.n - 1) * grid.coth[-1] * first_end
    return RadialField(grid, lap)


def configure(boundary_flux_tol: Optional[float] = None) -> None:
    """Process-wide defaults, set once at startup."""
    if boundary_flux_tol is not None:
        if not boundary_flux_tol > 0:
            raise InvalidParameterError(f"Boundary flux tolerance must be positive, got {boundary_flux_tol}.")
        _options["boundary_flux_tol"] = float(boundary_flux_tol)


def radial_divergence(vfield: RadialField, flux_tol: Optional[float] = None) -> RadialField:
    """
    Divergence of a radial vector field from its d/dr-component F.

    Staggered flux form (1 / sinh^{n-1} r) d/dr (sinh^{n-1} r * F): face fluxes
    Q_{i+1/2} = A_{i+1/2} (F_i + F_{i+1}) / 2 with the face areas of
    RadialGrid.face_areas, differenced over the trapezoid cells. The axis face
    carries no flux and the outer face carries sinh^{n-1}(r_max) F(r_max), so
    the trapezoid mass of the output is exactly omega_{n-1} times that
    boundary flux. The axis value is n * F'(0) with F odd.
    """
    grid = vfield.grid
    F = vfield.values
    dr = grid.spacing
    S = grid.volume
    if flux_tol is None:
        flux_tol = _options["boundary_flux_tol"]
    boundary_flux = abs(F[-1]) * S[-1]
    if boundary_flux > flux_tol:
        logger.warning(
            "Radial vector field carries boundary flux %.3e at r_max=%g (tolerance %.1e).",
            boundary_flux, grid.r_max, flux_tol,
        )
    Q = grid.face_areas * 0.5 * (F[1:] + F[:-1])
    cells = grid.cells
    div = np.empty_like(F)
    div[0] = grid.n * F[1] / dr
    div[1:-1] = (Q[1:] - Q[:-1]) / cells[1:-1]
    div[-1] = (S[-1] * F[-1] - Q[-1]) / cells[-1]
    return RadialField(grid, div)


def _bump(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    return out


def profile(
    grid: RadialGrid,
    family: str,
    amplitude: float = 1.0,
    width: float = 1.0,
    r_a: float = 1.0,
    r_b: float = 3.0,
    norm: Optional[float] = None,
    norm_exponent: float = 2.0,
) -> RadialField:
    """
    Named radial profile families.

    Scalar families: 'zero', 'gaussian' A e^{-(r/w)^2}, 'exponential' A e^{-r/w}.
    Vector-field families (d/dr-components): 'gaussian_flux' A (r/w) e^{-(r/w)^2},
    'bump_flux' a C-infinity bump on (r_a, r_b) divided by sinh^{n-1}(r), whose
    flux vanishes near both ends of the grid.

    When `norm` is given the profile is rescaled to that L^{norm_exponent} norm.
    """
    r = grid.nodes
    if width <= 0:
        raise InvalidParameterError(f"Profile width must be positive, got {width}.")
    if family == "zero":
        values = np.zeros_like(r)
    elif family == "gaussian":
        values = amplitude * np.exp(-((r / width) ** 2))
    elif family == "exponential":
        values = amplitude * np.exp(-r / width)
    elif family == "gaussian_flux":
        values = amplitude * (r / width) * np.exp(-((r / width) ** 2))
    elif family == "bump_flux":
        if not 0 < r_a < r_b <= grid.r_max:
            raise InvalidParameterError(f"Bump support ({r_a}, {r_b}) must lie inside (0, r_max].")
        x = (2.0 * r - (r_a + r_b)) / (r_b - r_a)
        values = np.zeros_like(r)
        inside = np.abs(x) < 1.0
        values[inside] = amplitude * _bump(x[inside]) / grid.volume[inside]
    else:
        raise InvalidParameterError(f"Unknown profile family '{family}'.")

    field = RadialField(grid, values)
    if norm is not None:
        current = lp_norm(field, norm_exponent)
        if current == 0.0:
            if norm != 0.0:
                raise InvalidParameterError("Cannot rescale a zero profile to a nonzero norm.")
            return field
        field = field * (norm / current)
    return field

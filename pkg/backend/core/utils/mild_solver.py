"""
Duhamel (mild) evolution of the forced parabolic-elliptic Keller-Segel system on H^n,

    u_t = Delta u + div(-alpha u grad (-Delta + gamma)^{-1} u + f),

and the Picard construction of its small-data solution.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from core.exceptions import BlowUpError, ContractionError, InvalidParameterError
from core.utils import bounds
from core.utils.elliptic import gradient_of_resolvent, k_gamma
from core.utils.geometry import RadialField, RadialGrid, lp_norm, lp_norms, radial_divergence
from core.utils.semigroup import DispersiveConstants, apply_div_heat, apply_heat, gamma_pq
from core.utils.signals import AAPSignal

logger = logging.getLogger(__name__)

MAX_DT = 0.1
BURN_IN_DECAY_TIMES = 5.0
MASSERA_RATE_TOLERANCE = 0.1
DISCRETIZATION_TOL = 1e-6


class Integrator(str, Enum):
    EULER = "euler"
    HEUN = "heun"


@dataclass(frozen=True)
class SolverConfig:
    """
    Parameters of one evolution. p must satisfy max(3, n) < p < 2n; the
    chemotactic sensitivity chi is normalized to 1.
    """
    grid: RadialGrid
    p: float
    alpha: float = 1.0
    gamma: float = 1.0
    chi: float = 1.0
    dt: float = 0.01
    t_end: float = 20.0
    rho: float = 0.1
    picard_tol: float = 1e-8
    picard_max_iters: int = 15
    integrator: Integrator = Integrator.EULER
    strict_smallness: bool = True
    blowup_factor: float = 10.0

    def __post_init__(self):
        n = self.grid.n
        self.grid.require_propagation()
        if not max(3, n) < self.p < 2 * n:
            raise InvalidParameterError(f"p must satisfy max(3, n) < p < 2n for n={n}, got p={self.p}.")
        if self.chi != 1:
            raise InvalidParameterError(f"chi is normalized to 1, got {self.chi}.")
        if not self.alpha >= 0:
            raise InvalidParameterError(f"alpha must be non-negative, got {self.alpha}.")
        if not self.gamma >= 0:
            raise InvalidParameterError(f"gamma must be non-negative, got {self.gamma}.")
        if not 0 < self.dt <= MAX_DT:
            raise InvalidParameterError(f"dt must lie in (0, {MAX_DT}], got {self.dt}.")
        if not self.t_end >= self.dt:
            raise InvalidParameterError(f"t_end must be at least one step, got {self.t_end}.")
        if abs(self.t_end / self.dt - round(self.t_end / self.dt)) > 1e-9 * self.t_end / self.dt:
            raise InvalidParameterError(f"t_end={self.t_end} is not a multiple of dt={self.dt}.")
        if not self.rho > 0:
            raise InvalidParameterError(f"rho must be positive, got {self.rho}.")
        if not self.picard_tol > 0 or self.picard_max_iters < 1:
            raise InvalidParameterError("picard_tol must be positive and picard_max_iters at least 1.")
        object.__setattr__(self, "integrator", Integrator(self.integrator))

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def num_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.num_steps + 1) * self.dt

    @property
    def contraction_factor(self) -> float:
        """Lipschitz constant 2 alpha k(gamma) rho of the Picard map on B_rho."""
        return 2.0 * self.alpha * k_gamma(self.gamma, self.n) * self.rho

    def with_(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time samples t_m = m dt from 0 with the L^{p/2} norm of every state."""
    grid: RadialGrid
    times: np.ndarray
    states: np.ndarray
    exponent: float
    norms: np.ndarray = field(init=False)

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        states = np.array(self.states, dtype=float)
        if states.shape != (times.size, self.grid.num_nodes):
            raise InvalidParameterError(f"States of shape {states.shape} do not match {times.size} times.")
        if times[0] != 0.0:
            raise InvalidParameterError(f"Trajectories start at t=0, got {times[0]}.")
        if times.size > 1 and not np.allclose(np.diff(times), times[1] - times[0], rtol=1e-9, atol=0):
            raise InvalidParameterError("Trajectory times must be uniformly spaced.")
        norms = lp_norms(self.grid, states, self.exponent)
        for array in (times, states, norms):
            array.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "norms", norms)

    @classmethod
    def zeros(cls, cfg: SolverConfig) -> "Trajectory":
        return cls(cfg.grid, cfg.times, np.zeros((cfg.num_steps + 1, cfg.grid.num_nodes)), cfg.p / 2.0)

    def __len__(self) -> int:
        return self.times.size

    def state(self, m: int) -> RadialField:
        return RadialField(self.grid, self.states[m])

    @property
    def sup_norm(self) -> float:
        return float(np.max(self.norms))

    def masses(self) -> np.ndarray:
        return self.states @ self.grid.measure

    def distance(self, other: "Trajectory") -> float:
        """sup_t ||u(t) - w(t)||_{p/2}."""
        if other.grid != self.grid or other.times.shape != self.times.shape:
            raise InvalidParameterError("Trajectories live on different grids or time grids.")
        return float(np.max(lp_norms(self.grid, self.states - other.states, self.exponent)))


@dataclass(frozen=True)
class Forcing:
    """Separable radial vector field f(t, r) = temporal(t) * spatial(r), spatial being the d/dr-component."""
    temporal: AAPSignal
    spatial: RadialField

    @classmethod
    def zero(cls, grid: RadialGrid) -> "Forcing":
        return cls(AAPSignal(), grid.zeros())

    @property
    def grid(self) -> RadialGrid:
        return self.spatial.grid

    def at(self, t: float) -> RadialField:
        return self.spatial * float(self.temporal.evaluate(t))

    def sup_norm(self, times: np.ndarray, exponent: float) -> float:
        """sup over the sampled times of ||f(t)||_exponent."""
        amplitude = np.max(np.abs(self.temporal.evaluate(np.asarray(times, dtype=float))))
        return float(amplitude) * lp_norm(self.spatial, exponent)

    def weighted_sup(self, times: np.ndarray, rate: float, exponent: float) -> float:
        """sup over the sampled times of e^{rate t} ||f(t)||_exponent."""
        times = np.asarray(times, dtype=float)
        amplitude = np.max(np.exp(rate * times) * np.abs(self.temporal.evaluate(times)))
        return float(amplitude) * lp_norm(self.spatial, exponent)

    def ap_only(self) -> "Forcing":
        return Forcing(self.temporal.ap_only(), self.spatial)

    def c0_only(self) -> "Forcing":
        return Forcing(self.temporal.c0_only(), self.spatial)


def nonlinear_term(u: RadialField, cfg: SolverConfig) -> RadialField:
    """Chemotactic flux -alpha u v' with v' = d/dr (-Delta + gamma)^{-1} u."""
    if cfg.alpha == 0:
        return u.grid.zeros()
    gradient = gradient_of_resolvent(u, cfg.gamma, 1.0)
    return -cfg.alpha * (u * gradient)


FluxFn = Callable[[int, RadialField], RadialField]


class ExponentialStepper:
    """
    Exponential Euler for u' = Delta u + div G(t, u):

        u_{m+1} = e^{dt Delta} u_m + dt e^{dt Delta} div G(t_m, u_m),

    optionally corrected by the exponential trapezoid rule
    u_{m+1} = e^{dt Delta} u_m + dt/2 [e^{dt Delta} div G_m + div G(t_{m+1}, u~_{m+1})].
    """

    def __init__(self, cfg: SolverConfig, flux: FluxFn, guard: Optional[float] = None):
        self.cfg = cfg
        self.flux = flux
        self.guard = guard

    def step(self, m: int, state: RadialField) -> RadialField:
        dt = self.cfg.dt
        propagated = apply_heat(state, dt)
        forced = apply_div_heat(self.flux(m, state), dt)
        predictor = propagated + dt * forced
        if self.cfg.integrator is Integrator.EULER:
            return predictor
        corrector = radial_divergence(self.flux(m + 1, predictor))
        return propagated + (0.5 * dt) * (forced + corrector)

    def forward_integrate(self, state: RadialField, start_index: int, num_steps: int) -> np.ndarray:
        """States at indices start_index .. start_index + num_steps, first row included."""
        states = np.empty((num_steps + 1, state.grid.num_nodes))
        states[0] = state.values
        exponent = self.cfg.p / 2.0
        for k in range(num_steps):
            state = self.step(start_index + k, state)
            states[k + 1] = state.values
            if self.guard is not None:
                norm = lp_norm(state, exponent)
                if norm > self.guard:
                    raise BlowUpError(
                        f"||u||_{exponent:g} = {norm:.6e} exceeds the blow-up guard {self.guard:.6e} "
                        f"at t={(start_index + k + 1) * self.cfg.dt:g}.",
                        step=start_index + k + 1,
                        norm=norm,
                        threshold=self.guard,
                    )
        return states


def _resolve_constants(cfg: SolverConfig, constants: Optional[DispersiveConstants]) -> DispersiveConstants:
    if constants is None:
        return DispersiveConstants.default(cfg.n)
    if constants.n != cfg.n:
        raise InvalidParameterError(f"Constants for n={constants.n} used with a grid of dimension {cfg.n}.")
    return constants


def _check_forcing(forcing: Forcing, cfg: SolverConfig) -> None:
    if forcing.grid != cfg.grid:
        raise InvalidParameterError("Forcing profile lives on a different grid than the solver.")


def blowup_threshold(
    u0: RadialField,
    forcing: Forcing,
    cfg: SolverConfig,
    constants: DispersiveConstants,
    c_resolvent: float = 1.0,
) -> float:
    """blowup_factor * (||u0|| + theoretical sup bound)."""
    u0_norm = lp_norm(u0, cfg.p / 2.0)
    forcing_sup = forcing.sup_norm(cfg.times, cfg.p / 3.0)
    bound = bounds.theoretical_sup_bound(cfg, constants, u0_norm, forcing_sup, c_resolvent=c_resolvent)
    return cfg.blowup_factor * (u0_norm + bound)


def evolve(
    u0: RadialField,
    forcing: Forcing,
    cfg: SolverConfig,
    constants: Optional[DispersiveConstants] = None,
    c_resolvent: float = 1.0,
) -> Trajectory:
    """Semilinear mild solution on [0, t_end] by exponential time stepping."""
    constants = _resolve_constants(cfg, constants)
    _check_forcing(forcing, cfg)
    if u0.grid != cfg.grid:
        raise InvalidParameterError("Initial datum lives on a different grid than the solver.")

    def flux(m: int, state: RadialField) -> RadialField:
        return nonlinear_term(state, cfg) + forcing.at(m * cfg.dt)

    guard = blowup_threshold(u0, forcing, cfg, constants, c_resolvent)
    stepper = ExponentialStepper(cfg, flux, guard)
    states = stepper.forward_integrate(u0, 0, cfg.num_steps)
    trajectory = Trajectory(cfg.grid, cfg.times, states, cfg.p / 2.0)
    logger.debug("evolve: %d steps, sup ||u||_%g = %.6e.", cfg.num_steps, cfg.p / 2.0, trajectory.sup_norm)
    return trajectory


def linear_solution_operator(
    forcing: Forcing,
    omega: Trajectory,
    u0: RadialField,
    cfg: SolverConfig,
    constants: Optional[DispersiveConstants] = None,
    c_resolvent: float = 1.0,
) -> Trajectory:
    """
    S(f, omega): the mild solution with frozen coefficient omega,
    u(t) = e^{t Delta} u0 + int_0^t div e^{(t-s) Delta} [-alpha omega grad(-Delta + gamma)^{-1} omega + f](s) ds,
    discretized exactly like evolve so that fixed points coincide.
    """
    constants = _resolve_constants(cfg, constants)
    _check_forcing(forcing, cfg)
    if omega.grid != cfg.grid or len(omega) != cfg.num_steps + 1 or not np.allclose(omega.times, cfg.times):
        raise InvalidParameterError("omega must be sampled on the solver's time grid.")

    def flux(m: int, state: RadialField) -> RadialField:
        return nonlinear_term(omega.state(m), cfg) + forcing.at(m * cfg.dt)

    guard = blowup_threshold(u0, forcing, cfg, constants, c_resolvent)
    stepper = ExponentialStepper(cfg, flux, guard)
    states = stepper.forward_integrate(u0, 0, cfg.num_steps)
    return Trajectory(cfg.grid, cfg.times, states, cfg.p / 2.0)


@dataclass
class PicardDiagnostics:
    contraction_factor: float
    ball: bounds.BallInvariance
    differences: List[float] = field(default_factory=list)
    ratios: List[float] = field(default_factory=list)
    converged: bool = False
    residual: Optional[float] = None

    @property
    def iterations(self) -> int:
        return len(self.differences)

    @property
    def max_ratio(self) -> Optional[float]:
        return max(self.ratios) if self.ratios else None

    def to_dict(self) -> Dict:
        return {
            "contraction_factor": self.contraction_factor,
            "ball": self.ball.to_dict(),
            "iterations": self.iterations,
            "differences": list(self.differences),
            "ratios": list(self.ratios),
            "max_ratio": self.max_ratio,
            "converged": self.converged,
            "residual": self.residual,
        }


def picard_solve(
    u0: RadialField,
    forcing: Forcing,
    cfg: SolverConfig,
    constants: Optional[DispersiveConstants] = None,
    c_resolvent: float = 1.0,
) -> Tuple[Trajectory, PicardDiagnostics]:
    """
    Fixed point of omega -> S(f, omega) from omega_0 = 0 in the sup_t L^{p/2} norm.

    Requires 2 alpha k(gamma) rho < 1. The ball-invariance estimate must hold
    as well when cfg.strict_smallness is set; otherwise its failure is logged.
    """
    constants = _resolve_constants(cfg, constants)
    factor = cfg.contraction_factor
    if not factor < 1:
        raise InvalidParameterError(f"Contraction factor 2 alpha k(gamma) rho = {factor:.6g} must be below 1.")
    u0_norm = lp_norm(u0, cfg.p / 2.0)
    forcing_norm = forcing.sup_norm(cfg.times, cfg.p / 3.0)
    ball = bounds.ball_invariance(cfg, constants, u0_norm, forcing_norm, c_resolvent)
    if not ball.holds:
        message = (
            f"Ball invariance fails: ||u0|| + K~(alpha k rho^2 + ||f||) = {ball.lhs:.6g} > rho = {cfg.rho:g} "
            f"(data budget {ball.data_budget:.6g})."
        )
        if cfg.strict_smallness:
            raise InvalidParameterError(message)
        logger.warning(message)

    diagnostics = PicardDiagnostics(contraction_factor=factor, ball=ball)
    omega = Trajectory.zeros(cfg)
    growing = 0
    for k in range(cfg.picard_max_iters):
        iterate = linear_solution_operator(forcing, omega, u0, cfg, constants, c_resolvent)
        if iterate.sup_norm > cfg.rho:
            raise ContractionError(
                f"Picard iterate {k + 1} left the ball: sup norm {iterate.sup_norm:.6g} > rho = {cfg.rho:g}.",
                diagnostics,
            )
        difference = iterate.distance(omega)
        if diagnostics.differences and diagnostics.differences[-1] > 0:
            ratio = difference / diagnostics.differences[-1]
            diagnostics.ratios.append(ratio)
            growing = growing + 1 if ratio >= 1 else 0
        diagnostics.differences.append(difference)
        omega = iterate
        logger.debug("Picard iteration %d: difference %.6e.", k + 1, difference)
        if growing >= 2:
            raise ContractionError("Picard map stopped contracting (ratio >= 1 twice in a row).", diagnostics)
        if difference < cfg.picard_tol:
            diagnostics.converged = True
            break

    if diagnostics.converged:
        image = linear_solution_operator(forcing, omega, u0, cfg, constants, c_resolvent)
        diagnostics.residual = image.distance(omega)
    else:
        logger.warning("Picard iteration did not reach tol %.1e in %d iterations.", cfg.picard_tol, cfg.picard_max_iters)
    logger.info(
        "Picard: %d iterations, max ratio %s, factor %.4g.",
        diagnostics.iterations, diagnostics.max_ratio, factor,
    )
    return omega, diagnostics


@dataclass
class ContractionEstimate:
    ratio: float
    bound: float

    @property
    def within(self) -> bool:
        return self.ratio <= self.bound

    def to_dict(self) -> Dict:
        return {"ratio": self.ratio, "bound": self.bound, "within": self.within}


def contraction_estimate(
    omega_1: Trajectory,
    omega_2: Trajectory,
    u0: RadialField,
    forcing: Forcing,
    cfg: SolverConfig,
    constants: Optional[DispersiveConstants] = None,
) -> ContractionEstimate:
    """||S(f, w1) - S(f, w2)|| / ||w1 - w2|| against 2 alpha k(gamma) rho."""
    separation = omega_1.distance(omega_2)
    if separation == 0:
        raise InvalidParameterError("Contraction estimate needs two distinct trajectories.")
    image_1 = linear_solution_operator(forcing, omega_1, u0, cfg, constants)
    image_2 = linear_solution_operator(forcing, omega_2, u0, cfg, constants)
    return ContractionEstimate(ratio=image_1.distance(image_2) / separation, bound=cfg.contraction_factor)


def minimum_burn_in(cfg: SolverConfig, constants: DispersiveConstants, margin: float = bounds.DEFAULT_SIGMA_MARGIN) -> float:
    """5 / sigma_eff."""
    sigma = bounds.rates(cfg, constants).sigma
    return BURN_IN_DECAY_TIMES / bounds.sigma_eff(sigma, margin)


def whole_line_ap_solution(
    forcing: Forcing,
    cfg: SolverConfig,
    burn_in: Optional[float] = None,
    omega: Optional[Forcing] = None,
    constants: Optional[DispersiveConstants] = None,
) -> Trajectory:
    """
    Approximates u(t) = int_{-inf}^t div e^{(t-s) Delta}[...](s) ds on [0, t_end]
    by starting from zero at -burn_in on the same dt lattice.

    Without omega the chemotactic term is taken self-consistently; with a
    separable omega the coefficient is frozen to it. Only almost periodic
    forcing can be continued to negative times.
    """
    constants = _resolve_constants(cfg, constants)
    _check_forcing(forcing, cfg)
    if forcing.temporal.c0_part or (omega is not None and omega.temporal.c0_part):
        raise InvalidParameterError("Whole-line solutions take almost periodic signals only.")
    required = minimum_burn_in(cfg, constants)
    if burn_in is None:
        burn_in = required
    if burn_in < required * (1.0 - 1e-12):
        raise InvalidParameterError(f"burn_in={burn_in:g} is shorter than 5 / sigma_eff = {required:.6g}.")
    lead = int(math.ceil(burn_in / cfg.dt - 1e-9))

    if omega is None:
        def flux(m: int, state: RadialField) -> RadialField:
            return nonlinear_term(state, cfg) + forcing.at(m * cfg.dt)
    else:
        def flux(m: int, state: RadialField) -> RadialField:
            return nonlinear_term(omega.at(m * cfg.dt), cfg) + forcing.at(m * cfg.dt)

    zero = cfg.grid.zeros()
    guard = blowup_threshold(zero, forcing, cfg, constants)
    stepper = ExponentialStepper(cfg, flux, guard)
    start = RadialField(cfg.grid, stepper.forward_integrate(zero, -lead, lead)[-1])
    states = stepper.forward_integrate(start, 0, cfg.num_steps)
    logger.debug("Whole-line solution after burn-in of %d steps.", lead)
    return Trajectory(cfg.grid, cfg.times, states, cfg.p / 2.0)


@dataclass
class MasseraReport:
    """Comparison of the half-line solution with the whole-line solution driven by the AP forcing alone."""
    times: np.ndarray
    difference_norms: np.ndarray
    layer_norms: np.ndarray
    difference_rate: float
    layer_rate: float
    layer_required_rate: float
    burn_in: float
    passes: Dict[str, bool] = field(default_factory=dict)
    ap_solution: Optional[Trajectory] = None

    @property
    def final_difference(self) -> float:
        return float(self.difference_norms[-1])

    @property
    def passed(self) -> bool:
        return all(self.passes.values())

    def to_dict(self) -> Dict:
        return {
            "difference_rate": self.difference_rate,
            "final_difference": self.final_difference,
            "max_difference": float(np.max(self.difference_norms)),
            "layer_rate": self.layer_rate,
            "layer_required_rate": self.layer_required_rate,
            "burn_in": self.burn_in,
            "passes": dict(self.passes),
            "passed": self.passed,
        }


def verify_massera_splitting(
    u0: RadialField,
    forcing: Forcing,
    cfg: SolverConfig,
    constants: Optional[DispersiveConstants] = None,
    burn_in: Optional[float] = None,
    match_initial: bool = False,
) -> MasseraReport:
    """
    Checks that the solution driven by the full AAP forcing approaches the
    whole-line solution driven by its AP part, and that the initial layer
    e^{t Delta}(u0 - u_ap(0)) decays at no less than 0.9 gamma_{p/2,p/2}.

    With match_initial the half-line run starts from u_ap(0).
    """
    constants = _resolve_constants(cfg, constants)
    if burn_in is None:
        burn_in = minimum_burn_in(cfg, constants)
    u_ap = whole_line_ap_solution(forcing.ap_only(), cfg, burn_in, constants=constants)
    start = u_ap.state(0) if match_initial else u0
    u_full = evolve(start, forcing, cfg, constants)
    exponent = cfg.p / 2.0
    times = cfg.times
    t_end = float(times[-1])
    tail = (0.5 * t_end, t_end)

    difference_norms = lp_norms(cfg.grid, u_full.states - u_ap.states, exponent)
    difference_rate = bounds.fit_decay_rate(times, difference_norms, tail)

    layer = start - u_ap.state(0)
    layer_norms = np.empty_like(times)
    layer_norms[0] = lp_norm(layer, exponent)
    for m in range(1, times.size):
        layer = apply_heat(layer, cfg.dt)
        layer_norms[m] = lp_norm(layer, exponent)
    layer_rate = bounds.fit_decay_rate(times, layer_norms, tail)
    required = (1.0 - MASSERA_RATE_TOLERANCE) * gamma_pq(exponent, exponent, constants)

    report = MasseraReport(
        times=times,
        difference_norms=difference_norms,
        layer_norms=layer_norms,
        difference_rate=difference_rate,
        layer_rate=layer_rate,
        layer_required_rate=required,
        burn_in=burn_in,
        ap_solution=u_ap,
    )
    report.passes["difference_decays"] = bool(
        difference_rate > 0 or float(np.max(difference_norms)) <= DISCRETIZATION_TOL
    )
    report.passes["initial_layer"] = bool(layer_rate >= required)
    logger.info(
        "Massera splitting: difference rate %.4g (final %.3e), layer rate %.4g (required %.4g).",
        difference_rate, report.final_difference, layer_rate, required,
    )
    return report

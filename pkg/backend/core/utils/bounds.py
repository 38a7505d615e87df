"""
Explicit constants of the small-data theory and their comparison with simulated trajectories.

Every check returns a BoundsReport; failed inequalities are flags on the
report, not exceptions.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, List, Optional, Tuple

import numpy as np

from core.exceptions import InvalidParameterError
from core.utils.elliptic import gradient_of_resolvent, k_gamma
from core.utils.geometry import lp_norm
from core.utils.semigroup import DispersiveConstants, gamma_pq
from core.utils.signals import DecayShape, find_translation_numbers

if TYPE_CHECKING:
    from core.utils.mild_solver import Forcing, SolverConfig, Trajectory

logger = logging.getLogger(__name__)

DEFAULT_SIGMA_MARGIN = 0.05
DECAY_RATE_TOLERANCE = 0.1
DECAY_FLOOR = 1e-14
ENVELOPE_RTOL = 1e-12

# Lanczos approximation, g = 7
_LANCZOS_G = 7
_LANCZOS_COEFFICIENTS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def gamma_function(x: float) -> float:
    """Gamma(x) for x > 0 by the Lanczos approximation, with reflection below 1/2."""
    if not x > 0:
        raise InvalidParameterError(f"Gamma function is evaluated for x > 0 only, got {x}.")
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * gamma_function(1.0 - x))
    z = x - 1.0
    series = _LANCZOS_COEFFICIENTS[0]
    for i, coefficient in enumerate(_LANCZOS_COEFFICIENTS[1:], start=1):
        series += coefficient / (z + i)
    t = z + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * t ** (z + 0.5) * math.exp(-t) * series


@dataclass(frozen=True)
class Rates:
    gamma_half: float
    beta: float
    beta_hat: float
    sigma: float


def _exponent_window(n: int, p: float) -> Tuple[float, float]:
    first = 1.0 - n / p
    second = 0.5 - n / (2.0 * p)
    if not (0 < first < 1 and 0 < second < 0.5):
        raise InvalidParameterError(
            f"Exponents 1 - n/p={first:.6g} and 1/2 - n/2p={second:.6g} leave their windows (n={n}, p={p})."
        )
    return first, second


def rates(cfg: "SolverConfig", constants: DispersiveConstants) -> Rates:
    """
    beta = (gamma_{p/2,p/2} + gamma_{pn/(4n-p),p/2}) / 2,
    beta_hat = (gamma_{p/2,p/2} + gamma_{p/3,p/2}) / 2,
    sigma = min(gamma_{p/2,p/2}, beta, beta_hat).
    """
    n, p = cfg.n, cfg.p
    half = p / 2.0
    product_exponent = p * n / (4.0 * n - p)
    if not product_exponent <= half or not p / 3.0 <= half:
        raise InvalidParameterError(f"Exponent ordering fails for n={n}, p={p}.")
    gamma_half = gamma_pq(half, half, constants)
    beta = 0.5 * (gamma_half + gamma_pq(product_exponent, half, constants))
    beta_hat = 0.5 * (gamma_half + gamma_pq(p / 3.0, half, constants))
    sigma = min(gamma_half, beta, beta_hat)
    if not (beta > 0 and beta_hat > 0 and sigma > 0):
        raise InvalidParameterError(f"Non-positive rates for n={n}, p={p}, delta_n={constants.delta_n}.")
    return Rates(gamma_half=gamma_half, beta=beta, beta_hat=beta_hat, sigma=sigma)


def sigma_eff(sigma: float, margin: float = DEFAULT_SIGMA_MARGIN) -> float:
    if not 0 < margin < 0.5:
        raise InvalidParameterError(f"sigma margin must lie in (0, 0.5), got {margin}.")
    return (1.0 - margin) * sigma


def k_tilde(cfg: "SolverConfig", constants: DispersiveConstants, c_resolvent: float = 1.0) -> float:
    """
    max{ (Gamma(1-n/p) / beta^{1-n/p} + 1/beta) C~^{2/p} C,
         (Gamma(1/2-n/2p) / beta_hat^{1/2-n/2p} + 1/beta_hat) C~^{1/p+1/n} }
    """
    n, p = cfg.n, cfg.p
    first, second = _exponent_window(n, p)
    r = rates(cfg, constants)
    c = constants.c_tilde
    product_bracket = (gamma_function(first) / r.beta ** first + 1.0 / r.beta) * c ** (2.0 / p) * c_resolvent
    forcing_bracket = (gamma_function(second) / r.beta_hat ** second + 1.0 / r.beta_hat) * c ** (1.0 / p + 1.0 / n)
    return max(product_bracket, forcing_bracket)


def theoretical_sup_bound(
    cfg: "SolverConfig",
    constants: DispersiveConstants,
    u0_norm: float,
    forcing_norm: float,
    omega_sup: Optional[float] = None,
    c_resolvent: float = 1.0,
) -> float:
    """||u0|| + K~ (alpha k(gamma) sup||omega||^2 + sup||f||), with omega at the ball radius by default."""
    omega = cfg.rho if omega_sup is None else omega_sup
    chemotaxis = cfg.alpha * k_gamma(cfg.gamma, cfg.n) * omega ** 2
    return u0_norm + k_tilde(cfg, constants, c_resolvent) * (chemotaxis + forcing_norm)


@dataclass
class BallInvariance:
    k_tilde: float
    lhs: float
    rho: float
    data_budget: float
    max_radius: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rho

    def to_dict(self) -> Dict:
        return {
            "k_tilde": self.k_tilde,
            "lhs": self.lhs,
            "rho": self.rho,
            "holds": self.holds,
            "data_budget": self.data_budget,
            "max_radius": self.max_radius,
        }


def ball_invariance(
    cfg: "SolverConfig",
    constants: DispersiveConstants,
    u0_norm: float,
    forcing_norm: float,
    c_resolvent: float = 1.0,
) -> BallInvariance:
    """
    ||u0|| + K~ (alpha k(gamma) rho^2 + ||f||) <= rho, the room left for data,
    rho - K~ alpha k(gamma) rho^2, and the largest radius 1 / (K~ alpha k(gamma)).
    """
    kt = k_tilde(cfg, constants, c_resolvent)
    coupling = kt * cfg.alpha * k_gamma(cfg.gamma, cfg.n)
    lhs = u0_norm + kt * (cfg.alpha * k_gamma(cfg.gamma, cfg.n) * cfg.rho ** 2 + forcing_norm)
    return BallInvariance(
        k_tilde=kt,
        lhs=lhs,
        rho=cfg.rho,
        data_budget=cfg.rho - coupling * cfg.rho ** 2,
        max_radius=math.inf if coupling == 0 else 1.0 / coupling,
    )


@dataclass(frozen=True)
class GronwallConstants:
    d_hat: float
    d_tilde: float
    exponent: float
    premultiplier: float


def gronwall_constants(
    cfg: "SolverConfig",
    constants: DispersiveConstants,
    sigma_effective: float,
    u0_norm: float = 0.0,
    forcing_weighted_sup: float = 0.0,
    c_resolvent: float = 1.0,
    c_hat: float = 1.0,
) -> GronwallConstants:
    """
    D^ = C~^{1/p+1/n} [Gamma(1/2-n/2p) / (beta_hat - s)^{1/2-n/2p} + 1/(beta_hat - s)],
    D~ = Gamma(1-n/p) / (beta - s)^{1-n/p} + 1/(beta - s),
    premultiplier = (C^ ||u0|| + D^ sup e^{s t}||f||) exp(alpha C~^{2/p} C k(gamma) rho D~).
    """
    n, p = cfg.n, cfg.p
    first, second = _exponent_window(n, p)
    r = rates(cfg, constants)
    if not sigma_effective < min(r.beta, r.beta_hat):
        raise InvalidParameterError(
            f"sigma_eff={sigma_effective:.6g} must lie below min(beta, beta_hat)={min(r.beta, r.beta_hat):.6g}."
        )
    gap_hat = r.beta_hat - sigma_effective
    gap = r.beta - sigma_effective
    c = constants.c_tilde
    d_hat = c ** (1.0 / p + 1.0 / n) * (gamma_function(second) / gap_hat ** second + 1.0 / gap_hat)
    d_tilde = gamma_function(first) / gap ** first + 1.0 / gap
    exponent = cfg.alpha * c ** (2.0 / p) * c_resolvent * k_gamma(cfg.gamma, n) * cfg.rho * d_tilde
    premultiplier = (c_hat * u0_norm + d_hat * forcing_weighted_sup) * math.exp(exponent)
    return GronwallConstants(d_hat=d_hat, d_tilde=d_tilde, exponent=exponent, premultiplier=premultiplier)


def fit_decay_rate(
    times,
    norms,
    window: Optional[Tuple[float, float]] = None,
    power: float = 0.0,
    floor: float = DECAY_FLOOR,
) -> float:
    """
    Least-squares rate in log||u(t)|| + power * log t ~ c - rate * t over the window.

    Samples at or below the floor are ignored; if nothing is left above it the
    norm has vanished and the rate is infinite.
    """
    times = np.asarray(times, dtype=float)
    norms = np.asarray(norms, dtype=float)
    mask = np.ones_like(times, dtype=bool)
    if window is not None:
        mask &= (times >= window[0] - 1e-12) & (times <= window[1] + 1e-12)
    if power != 0.0:
        mask &= times > 0
    mask &= norms > floor
    if not np.any(mask):
        return math.inf
    if np.count_nonzero(mask) < 2:
        return math.nan
    y = np.log(norms[mask])
    if power != 0.0:
        y = y + power * np.log(times[mask])
    slope, _ = np.polyfit(times[mask], y, 1)
    return float(-slope)


@dataclass
class BoundsReport:
    """Constants of the small-data theory, the measured counterpart, and a pass flag per inequality."""
    check: str
    n: int
    p: float
    beta: float
    beta_hat: float
    sigma: float
    sigma_eff: float
    k_tilde: float
    c_tilde: float
    delta_n: float
    constants_provenance: str
    c_resolvent: float = 1.0
    c_hat: float = 1.0
    gronwall_d_hat: Optional[float] = None
    gronwall_d_tilde: Optional[float] = None
    gronwall_premultiplier: Optional[float] = None
    theoretical_sup_bound: Optional[float] = None
    measured_sup: Optional[float] = None
    fitted_decay_rate: Optional[float] = None
    extras: Dict[str, float] = field(default_factory=dict)
    passes: Dict[str, bool] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.passes.values())

    def to_dict(self) -> Dict:
        data = {
            key: getattr(self, key)
            for key in (
                "check", "n", "p", "beta", "beta_hat", "sigma", "sigma_eff", "k_tilde", "c_tilde",
                "delta_n", "constants_provenance", "c_resolvent", "c_hat", "gronwall_d_hat",
                "gronwall_d_tilde", "gronwall_premultiplier", "theoretical_sup_bound",
                "measured_sup", "fitted_decay_rate",
            )
        }
        data["extras"] = dict(self.extras)
        data["passes"] = dict(self.passes)
        data["passed"] = self.passed
        data["notes"] = list(self.notes)
        return data

    def to_row(self) -> Dict:
        """Flat record for sweep aggregation."""
        row = {key: value for key, value in self.to_dict().items() if key not in ("extras", "passes", "notes")}
        row.update({f"extra_{key}": value for key, value in self.extras.items()})
        row.update({f"pass_{key}": value for key, value in self.passes.items()})
        return row


def _base_report(
    check: str,
    cfg: "SolverConfig",
    constants: DispersiveConstants,
    c_resolvent: float,
    c_hat: float,
    margin: float = DEFAULT_SIGMA_MARGIN,
) -> BoundsReport:
    r = rates(cfg, constants)
    report = BoundsReport(
        check=check,
        n=cfg.n,
        p=cfg.p,
        beta=r.beta,
        beta_hat=r.beta_hat,
        sigma=r.sigma,
        sigma_eff=sigma_eff(r.sigma, margin),
        k_tilde=k_tilde(cfg, constants, c_resolvent),
        c_tilde=constants.c_tilde,
        delta_n=constants.delta_n,
        constants_provenance=constants.provenance.value,
        c_resolvent=c_resolvent,
        c_hat=c_hat,
    )
    report.notes.append(
        f"sigma_eff = {1.0 - margin:g} * sigma is used wherever beta - sigma or beta_hat - sigma must be positive."
    )
    if c_resolvent == 1.0 or c_hat == 1.0:
        report.notes.append("Resolvent constant C and decay constant C^ are unvalued and default to 1 unless overridden.")
        logger.warning("Report '%s' uses default C=%g, C^=%g.", check, c_resolvent, c_hat)
    return report


def linear_bound_check(
    trajectory: "Trajectory",
    u0,
    forcing: "Forcing",
    omega: "Trajectory",
    cfg: "SolverConfig",
    constants: DispersiveConstants,
    c_resolvent: float = 1.0,
    c_hat: float = 1.0,
) -> BoundsReport:
    """
    sup_t ||u||_{p/2} <= ||u0||_{p/2} + K~ (alpha k(gamma) sup||omega||^2_{p/2} + sup||f||_{p/3})
    for a frozen-coefficient trajectory, together with the Hoelder pairing
    ||omega v'||_{pn/(4n-p)} <= ||omega||_{p/2} ||v'||_{pn/(2n-p)} at every time.
    """
    report = _base_report("linear_bound", cfg, constants, c_resolvent, c_hat)
    n, p = cfg.n, cfg.p
    u0_norm = lp_norm(u0, p / 2.0)
    omega_sup = float(np.max(omega.norms))
    forcing_sup = forcing.sup_norm(trajectory.times, p / 3.0)
    bound = theoretical_sup_bound(cfg, constants, u0_norm, forcing_sup, omega_sup, c_resolvent)
    measured = trajectory.sup_norm

    product_exponent = p * n / (4.0 * n - p)
    gradient_exponent = p * n / (2.0 * n - p)
    worst_holder = 0.0
    for m in range(len(omega.times)):
        state = omega.state(m)
        gradient = gradient_of_resolvent(state, cfg.gamma, 1.0)
        lhs = lp_norm(state * gradient, product_exponent)
        rhs = lp_norm(state, p / 2.0) * lp_norm(gradient, gradient_exponent)
        if rhs > 0:
            worst_holder = max(worst_holder, lhs / rhs)

    report.theoretical_sup_bound = bound
    report.measured_sup = measured
    report.extras.update({"slack": bound - measured, "omega_sup": omega_sup, "forcing_sup": forcing_sup,
                          "holder_worst_ratio": worst_holder})
    report.passes["sup_bound"] = measured <= bound
    report.passes["holder_pairing"] = worst_holder <= 1.0 + 1e-10
    return report


def whole_line_bound_check(
    trajectory: "Trajectory",
    omega_sup: float,
    forcing: "Forcing",
    cfg: "SolverConfig",
    constants: DispersiveConstants,
    c_resolvent: float = 1.0,
    c_hat: float = 1.0,
) -> BoundsReport:
    """sup_t ||u||_{p/2} <= K~ (alpha k(gamma) sup||omega||^2 + sup||f||_{p/3}) without initial data."""
    report = _base_report("whole_line_bound", cfg, constants, c_resolvent, c_hat)
    forcing_sup = forcing.sup_norm(trajectory.times, cfg.p / 3.0)
    bound = theoretical_sup_bound(cfg, constants, 0.0, forcing_sup, omega_sup, c_resolvent)
    report.theoretical_sup_bound = bound
    report.measured_sup = trajectory.sup_norm
    report.extras.update({"slack": bound - trajectory.sup_norm, "omega_sup": omega_sup, "forcing_sup": forcing_sup})
    report.passes["sup_bound"] = trajectory.sup_norm <= bound
    return report


def decay_check(
    trajectory: "Trajectory",
    forcing: "Forcing",
    cfg: "SolverConfig",
    constants: DispersiveConstants,
    margin: float = DEFAULT_SIGMA_MARGIN,
    c_resolvent: float = 1.0,
    c_hat: float = 1.0,
) -> BoundsReport:
    """
    Exponential decay ||u(t)||_{p/2} <= premultiplier * e^{-sigma_eff t}, and a
    least-squares tail rate over [t_end/2, t_end] of at least 0.9 sigma_eff.
    """
    report = _base_report("decay", cfg, constants, c_resolvent, c_hat, margin)
    s = report.sigma_eff
    temporal = forcing.temporal
    if not temporal.ap_part.is_empty:
        raise InvalidParameterError("Decay check needs a forcing without almost periodic part.")
    for term in temporal.c0_part:
        if term.shape is not DecayShape.EXPONENTIAL or term.rate < s:
            raise InvalidParameterError(
                f"Forcing term {term} must decay exponentially at rate >= sigma_eff={s:.6g}."
            )
    times = trajectory.times
    norms = trajectory.norms
    u0_norm = float(norms[0])
    weighted = forcing.weighted_sup(times, s, cfg.p / 3.0)
    gronwall = gronwall_constants(cfg, constants, s, u0_norm, weighted, c_resolvent, c_hat)
    envelope = gronwall.premultiplier * np.exp(-s * times)
    t_end = float(times[-1])
    rate = fit_decay_rate(times, norms, (0.5 * t_end, t_end))

    report.gronwall_d_hat = gronwall.d_hat
    report.gronwall_d_tilde = gronwall.d_tilde
    report.gronwall_premultiplier = gronwall.premultiplier
    report.theoretical_sup_bound = gronwall.premultiplier
    report.measured_sup = trajectory.sup_norm
    report.fitted_decay_rate = rate
    report.extras["required_rate"] = (1.0 - DECAY_RATE_TOLERANCE) * s
    ratios = np.divide(norms, envelope, out=np.zeros_like(norms), where=envelope > 0)
    report.extras["worst_envelope_ratio"] = float(np.max(ratios))
    report.passes["envelope"] = bool(np.all(norms <= envelope * (1.0 + ENVELOPE_RTOL)))
    report.passes["tail_rate"] = bool(rate >= (1.0 - DECAY_RATE_TOLERANCE) * s)
    return report


def translation_check(
    trajectory: "Trajectory",
    forcing: "Forcing",
    cfg: "SolverConfig",
    constants: DispersiveConstants,
    epsilon: float,
    tau: Optional[float] = None,
    c_resolvent: float = 1.0,
    c_hat: float = 1.0,
) -> BoundsReport:
    """
    Solution translation property for a certified epsilon-translation number tau
    of the forcing's AP part, snapped to the time grid:
    sup_{t in [t_end/2, t_end - tau]} ||u(t + tau) - u(t)|| <= C_trans eps + C_dec e^{-sigma_eff t_end / 2}.
    """
    report = _base_report("translation", cfg, constants, c_resolvent, c_hat)
    poly = forcing.temporal.ap_part
    times = trajectory.times
    dt = float(times[1] - times[0])
    t_end = float(times[-1])

    if tau is None:
        candidates = find_translation_numbers(poly, epsilon, (dt, 0.5 * t_end - dt))
    else:
        candidates = np.array([tau])
    steps = np.unique(np.round(candidates / dt).astype(int))
    steps = steps[(steps > 0) & (steps * dt <= 0.5 * t_end + 1e-9)]
    certified = [k for k in steps if poly.displacement_bound(k * dt) < epsilon]
    if not certified:
        report.notes.append(f"No certified translation number on the time grid for epsilon={epsilon:g}.")
        report.passes["translation"] = False
        return report
    shift = int(max(certified))
    tau_snapped = shift * dt

    start = int(np.searchsorted(times, 0.5 * t_end - 1e-9))
    differences = [
        lp_norm(trajectory.state(m + shift) - trajectory.state(m), cfg.p / 2.0)
        for m in range(start, len(times) - shift)
    ]
    measured = max(differences, default=0.0)
    sup_u = trajectory.sup_norm
    profile_norm = lp_norm(forcing.spatial, cfg.p / 3.0)
    c_trans = report.k_tilde * profile_norm * (1.0 + 2.0 * cfg.alpha * k_gamma(cfg.gamma, cfg.n) * sup_u)
    c_dec = 2.0 * c_hat * sup_u
    bound = c_trans * epsilon + c_dec * math.exp(-report.sigma_eff * 0.5 * t_end)

    report.theoretical_sup_bound = bound
    report.measured_sup = measured
    report.extras.update({"tau": tau_snapped, "epsilon": epsilon, "c_trans": c_trans, "c_dec": c_dec})
    report.passes["translation"] = measured <= bound
    return report

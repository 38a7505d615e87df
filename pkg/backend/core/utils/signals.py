"""
Almost periodic (AP) and asymptotically almost periodic (AAP) temporal signals.

An AAPSignal is stored as its two parts: a finite trigonometric polynomial
(the AP part) and a sum of decaying terms (the part vanishing at infinity).
The decomposition is never inferred from samples.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from core.exceptions import InvalidParameterError

logger = logging.getLogger(__name__)

MAX_SCAN_STEP = 0.01
MIN_DENSITY_WINDOWS = 10


@dataclass(frozen=True)
class TrigTerm:
    frequency: float
    cosine: float = 0.0
    sine: float = 0.0

    @property
    def amplitude(self) -> float:
        return math.hypot(self.cosine, self.sine)


@dataclass(frozen=True)
class TrigPolynomial:
    """h(t) = sum_j a_j cos(lambda_j t) + b_j sin(lambda_j t) with distinct finite frequencies."""
    terms: Tuple[TrigTerm, ...] = ()

    def __post_init__(self):
        terms = tuple(self.terms)
        frequencies = [term.frequency for term in terms]
        if not all(math.isfinite(f) for f in frequencies):
            raise InvalidParameterError("Trigonometric frequencies must be finite.")
        if len(set(frequencies)) != len(frequencies):
            raise InvalidParameterError(f"Trigonometric frequencies must be distinct, got {frequencies}.")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_triples(cls, triples: Iterable[Tuple[float, float, float]]) -> "TrigPolynomial":
        return cls(tuple(TrigTerm(float(f), float(a), float(b)) for f, a, b in triples))

    @property
    def is_empty(self) -> bool:
        return not self.terms

    @property
    def amplitude_sum(self) -> float:
        return sum(term.amplitude for term in self.terms)

    @property
    def lipschitz_constant(self) -> float:
        """sum_j |lambda_j| A_j, a bound on |h'|."""
        return sum(abs(term.frequency) * term.amplitude for term in self.terms)

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        value = np.zeros_like(t)
        for term in self.terms:
            value = value + term.cosine * np.cos(term.frequency * t) + term.sine * np.sin(term.frequency * t)
        return float(value) if value.ndim == 0 else value

    def displacement_bound(self, tau):
        """2 sum_j A_j |sin(lambda_j tau / 2)|, an upper bound of sup_t |h(t + tau) - h(t)|."""
        tau = np.asarray(tau, dtype=float)
        bound = np.zeros_like(tau)
        for term in self.terms:
            bound = bound + 2.0 * term.amplitude * np.abs(np.sin(0.5 * term.frequency * tau))
        return float(bound) if bound.ndim == 0 else bound

    def scaled(self, factor: float) -> "TrigPolynomial":
        return TrigPolynomial(tuple(TrigTerm(t.frequency, factor * t.cosine, factor * t.sine) for t in self.terms))

    def __add__(self, other: "TrigPolynomial") -> "TrigPolynomial":
        merged: Dict[float, Tuple[float, float]] = {}
        for term in self.terms + other.terms:
            a, b = merged.get(term.frequency, (0.0, 0.0))
            merged[term.frequency] = (a + term.cosine, b + term.sine)
        return TrigPolynomial(tuple(TrigTerm(f, a, b) for f, (a, b) in merged.items()))


class DecayShape(str, Enum):
    EXPONENTIAL = "exponential"
    STRETCHED = "stretched"


@dataclass(frozen=True)
class DecayingTerm:
    """c e^{-kappa t} or c (1 + t)^{-kappa}; both have sup |c| on t >= 0."""
    amplitude: float
    rate: float
    shape: DecayShape = DecayShape.EXPONENTIAL

    def __post_init__(self):
        if not self.rate > 0:
            raise InvalidParameterError(f"Decay rate must be positive, got {self.rate}.")
        object.__setattr__(self, "shape", DecayShape(self.shape))

    def envelope(self, t):
        t = np.asarray(t, dtype=float)
        if self.shape is DecayShape.EXPONENTIAL:
            return np.exp(-self.rate * t)
        return (1.0 + t) ** (-self.rate)

    def evaluate(self, t):
        value = self.amplitude * self.envelope(t)
        return float(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True)
class AAPSignal:
    ap_part: TrigPolynomial = field(default_factory=TrigPolynomial)
    c0_part: Tuple[DecayingTerm, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "c0_part", tuple(self.c0_part))

    def evaluate(self, t):
        """Exact sum of both parts. The AP part alone may be evaluated at t < 0."""
        t = np.asarray(t, dtype=float)
        value = np.asarray(self.ap_part.evaluate(t), dtype=float)
        if self.c0_part:
            if np.any(t < 0):
                raise InvalidParameterError("Decaying terms are defined for t >= 0 only.")
            for term in self.c0_part:
                value = value + term.evaluate(t)
        return float(value) if value.ndim == 0 else value

    def ap_only(self) -> "AAPSignal":
        return AAPSignal(self.ap_part, ())

    def c0_only(self) -> "AAPSignal":
        return AAPSignal(TrigPolynomial(), self.c0_part)

    def scaled(self, factor: float) -> "AAPSignal":
        return AAPSignal(
            self.ap_part.scaled(factor),
            tuple(DecayingTerm(factor * term.amplitude, term.rate, term.shape) for term in self.c0_part),
        )

    def __add__(self, other: "AAPSignal") -> "AAPSignal":
        return AAPSignal(self.ap_part + other.ap_part, self.c0_part + other.c0_part)

    def c0_tail_bound(self, settle_time: float) -> float:
        """sum |c| envelope(M), which bounds sup_{t >= M} |c0 part| because each envelope decreases."""
        return sum(abs(term.amplitude) * float(term.envelope(settle_time)) for term in self.c0_part)


def evaluate(signal: AAPSignal, t):
    return signal.evaluate(t)


def _scan_grid(start: float, length: float, step: float) -> np.ndarray:
    count = int(math.floor(length / step + 1e-9)) + 1
    return start + step * np.arange(count)


def ap_sup_norm(poly: TrigPolynomial, t_scan: float = 100.0) -> Tuple[float, float]:
    """
    (upper, lower) bracket of sup_t |h(t)|: the amplitude sum, and the
    maximum of |h| sampled on [0, t_scan] with step at most 0.01.
    """
    if poly.is_empty:
        return 0.0, 0.0
    samples = _scan_grid(0.0, t_scan, MAX_SCAN_STEP)
    return poly.amplitude_sum, float(np.max(np.abs(poly.evaluate(samples))))


def aap_norm(signal: AAPSignal, t_scan: float = 100.0) -> float:
    """sup |AP part| + sup |C0 part|, with the AP sup taken from its amplitude bound."""
    upper, _ = ap_sup_norm(signal.ap_part, t_scan)
    if not signal.c0_part:
        return upper
    samples = _scan_grid(0.0, t_scan, MAX_SCAN_STEP)
    c0 = signal.c0_only().evaluate(samples)
    return upper + float(np.max(np.abs(c0)))


def translation_scan_step(poly: TrigPolynomial, epsilon: float) -> float:
    lipschitz = poly.lipschitz_constant
    if lipschitz == 0.0:
        return MAX_SCAN_STEP
    return min(MAX_SCAN_STEP, epsilon / (4.0 * lipschitz))


def _check_scan(epsilon: float, length: float) -> None:
    if not epsilon > 0:
        raise InvalidParameterError(f"epsilon must be positive, got {epsilon}.")
    if not length > 0:
        raise InvalidParameterError(f"Scan window length must be positive, got {length}.")


def find_translation_numbers(poly: TrigPolynomial, epsilon: float, window: Tuple[float, float]) -> np.ndarray:
    """
    Certified epsilon-translation numbers of poly in [start, start + length].

    tau is returned when 2 sum_j A_j |sin(lambda_j tau / 2)| < epsilon, which
    bounds sup over all real t of |h(t + tau) - h(t)|. An empty array is a
    valid outcome.
    """
    start, length = window
    _check_scan(epsilon, length)
    taus = _scan_grid(start, length, translation_scan_step(poly, epsilon))
    certified = taus[poly.displacement_bound(taus) < epsilon]
    logger.debug(
        "%d certified translation numbers in [%g, %g] at epsilon=%g.",
        certified.size, start, start + length, epsilon,
    )
    return certified


@dataclass
class DensityReport:
    epsilon: float
    window_length: float
    num_windows: int
    witnesses: List[Optional[float]] = field(default_factory=list)

    @property
    def failed_windows(self) -> List[int]:
        return [k for k, tau in enumerate(self.witnesses) if tau is None]

    @property
    def passed(self) -> bool:
        return not self.failed_windows

    @property
    def suggestion(self) -> Optional[str]:
        if self.passed:
            return None
        return f"Window length {self.window_length:g} is too short; retry with {2 * self.window_length:g}."

    def to_dict(self) -> Dict:
        return {
            "epsilon": self.epsilon,
            "window_length": self.window_length,
            "num_windows": self.num_windows,
            "passed": self.passed,
            "witnesses": self.witnesses,
            "failed_windows": self.failed_windows,
            "suggestion": self.suggestion,
        }


def relative_density_check(
    poly: TrigPolynomial,
    epsilon: float,
    num_windows: int,
    window_length: float,
    start: float = 0.0,
) -> DensityReport:
    """Checks that every one of num_windows consecutive windows holds a certified translation number."""
    if num_windows < MIN_DENSITY_WINDOWS:
        raise InvalidParameterError(f"Relative density needs at least {MIN_DENSITY_WINDOWS} windows, got {num_windows}.")
    _check_scan(epsilon, window_length)
    taus = find_translation_numbers(poly, epsilon, (start, num_windows * window_length))
    report = DensityReport(epsilon=epsilon, window_length=window_length, num_windows=num_windows)
    window_index = np.floor((taus - start) / window_length).astype(int)
    for k in range(num_windows):
        hits = taus[window_index == k]
        report.witnesses.append(float(hits[0]) if hits.size else None)
    if not report.passed:
        logger.info("Relative density check failed in windows %s. %s", report.failed_windows, report.suggestion)
    return report


def frechet_translation_numbers(
    signal: AAPSignal,
    epsilon: float,
    settle_time: float,
    window: Tuple[float, float],
) -> np.ndarray:
    """
    Half-line translation numbers: |f(t + tau) - f(t)| < epsilon for all t >= settle_time.

    The AP displacement bound plus twice the tail bound of the decaying part
    must stay below epsilon.
    """
    if not settle_time >= 0:
        raise InvalidParameterError(f"settle_time must be non-negative, got {settle_time}.")
    tail = 2.0 * signal.c0_tail_bound(settle_time)
    if tail >= epsilon:
        return np.array([])
    return find_translation_numbers(signal.ap_part, epsilon - tail, window)

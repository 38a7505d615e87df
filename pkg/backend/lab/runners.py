import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Type

from core.utils import bounds
from core.utils.mild_solver import (
    Forcing,
    Integrator,
    evolve,
    linear_solution_operator,
    picard_solve,
    verify_massera_splitting,
)
from core.utils.semigroup import DispersiveConstants, calibrate, check_dispersive
from core.utils.signals import find_translation_numbers, frechet_translation_numbers, relative_density_check

from . import exports
from .scenario import Scenario

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_CHECK_FAILED = 3
EXIT_BLOWUP = 4

CONTRACTION_SLACK = 1.1
AGREEMENT_FACTOR = 10.0


@dataclass
class RunResult:
    passed: bool
    report: Dict[str, Any]
    summary: str
    artifacts: List[Path] = field(default_factory=list)
    constants: Optional[DispersiveConstants] = None

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.passed else EXIT_CHECK_FAILED


# --- Interface ---

class ScenarioRunner(ABC):
    """
    One laboratory command applied to a resolved scenario. Runners write
    their artifacts and a manifest into scenario.output_dir and return a
    RunResult; library exceptions propagate to the command.
    """
    name: str = ''

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.artifacts: List[Path] = []

    @property
    def output_dir(self) -> Path:
        return self.scenario.output_dir

    def write(self, path: Path) -> Path:
        self.artifacts.append(path)
        return path

    def execute(self) -> RunResult:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        exports.write_manifest(self.output_dir, self.name, self.scenario.resolved, [])
        result = self.run()
        self.write(exports.write_json(self.output_dir / 'report.json', result.report))
        exports.write_manifest(self.output_dir, self.name, self.scenario.resolved, self.artifacts)
        result.artifacts = list(self.artifacts)
        logger.info("%s on '%s': %s", self.name, self.scenario.name, result.summary)
        return result

    @abstractmethod
    def run(self) -> RunResult:
        pass


# --- Concrete runners ---

class SimulateRunner(ScenarioRunner):
    name = 'simulate'

    def run(self) -> RunResult:
        s = self.scenario
        cfg = s.cfg
        trajectory = evolve(s.initial, s.forcing, cfg, s.constants, s.c_resolvent)
        self.write(exports.write_trajectory(self.output_dir / 'trajectory.csv', trajectory, s.forcing, cfg.p))
        for t in s.snapshots:
            m = exports.snapshot_index(trajectory, t)
            path = self.output_dir / f'snapshot_{m:06d}.csv'
            self.write(exports.write_snapshot(path, trajectory.state(m), cfg.gamma, cfg.alpha))
        masses = trajectory.masses()
        report = {
            'steps': cfg.num_steps,
            'sup_norm': trajectory.sup_norm,
            'final_norm': float(trajectory.norms[-1]),
            'initial_mass': float(masses[0]),
            'final_mass': float(masses[-1]),
        }
        return RunResult(True, report, f"{cfg.num_steps} steps, sup ||u||_{cfg.p / 2:g} = {trajectory.sup_norm:.6e}")


class LinearBoundRunner(ScenarioRunner):
    """
    Frozen-coefficient bound over a matrix of coefficient profiles, forcing
    amplitudes and gammas. Each coefficient omega is the heat flow of a
    profile scaled into the ball B_rho.
    """
    name = 'verify_linear'

    def run(self) -> RunResult:
        s = self.scenario
        check = s.check
        rows = []
        reports = []
        for k, params in enumerate(check['profiles']):
            start = s.profile(params, s.cfg.p / 2.0)
            if params.get('norm') is None:
                start = s.profile({**params, 'norm': s.cfg.rho}, s.cfg.p / 2.0)
            for amplitude in check['forcing_amplitudes']:
                forcing = Forcing(s.forcing.temporal.scaled(amplitude), s.forcing.spatial)
                for gamma in check['gammas']:
                    cfg = s.cfg.with_(gamma=gamma)
                    omega = evolve(start, Forcing.zero(s.grid), cfg.with_(alpha=0.0), s.constants)
                    u = linear_solution_operator(forcing, omega, s.initial, cfg, s.constants, s.c_resolvent)
                    report = bounds.linear_bound_check(u, s.initial, forcing, omega, cfg, s.constants, s.c_resolvent, s.c_hat)
                    row = report.to_row()
                    row.update({'profile': k, 'forcing_amplitude': amplitude, 'gamma': gamma})
                    rows.append(row)
                    reports.append(report)
        self.write(exports.write_records(self.output_dir / 'linear_bounds.csv', rows))
        failed = [row for row in rows if not row['passed']]
        result = {'cases': len(rows), 'failed': len(failed), 'reports': [r.to_dict() for r in reports]}
        return RunResult(not failed, result, f"{len(rows) - len(failed)}/{len(rows)} cases within the linear bound")


class FixedPointRunner(ScenarioRunner):
    """
    Picard solution with its contraction record, agreement with direct time
    stepping and, when the forcing has an almost periodic part, the solution
    translation property.
    """
    name = 'verify_fixed_point'

    def run(self) -> RunResult:
        s = self.scenario
        cfg = s.cfg
        trajectory, diagnostics = picard_solve(s.initial, s.forcing, cfg, s.constants, s.c_resolvent)
        self.write(exports.write_trajectory(self.output_dir / 'trajectory.csv', trajectory, s.forcing, cfg.p))
        direct = evolve(s.initial, s.forcing, cfg, s.constants, s.c_resolvent)
        discrepancy = direct.distance(trajectory)
        tolerance = AGREEMENT_FACTOR * cfg.picard_tol / (1.0 - cfg.contraction_factor)
        if cfg.integrator is Integrator.HEUN:
            # the corrector sees omega_{m+1}, not the predictor
            tolerance += cfg.dt * trajectory.sup_norm

        passes = {
            'converged': diagnostics.converged,
            'contraction': diagnostics.max_ratio is None
            or diagnostics.max_ratio <= CONTRACTION_SLACK * cfg.contraction_factor,
            'residual': diagnostics.residual is not None and diagnostics.residual <= cfg.picard_tol,
            'evolve_agreement': discrepancy <= tolerance,
        }
        report = {
            'picard': diagnostics.to_dict(),
            'evolve_discrepancy': discrepancy,
            'agreement_tolerance': tolerance,
        }
        if not s.forcing.temporal.ap_part.is_empty:
            translation = bounds.translation_check(
                trajectory, s.forcing, cfg, s.constants, s.check['epsilon'], s.check['tau'], s.c_resolvent, s.c_hat,
            )
            report['translation'] = translation.to_dict()
            passes['translation'] = translation.passed
        report['passes'] = passes
        passed = all(passes.values())
        report['passed'] = passed
        return RunResult(passed, report, f"{diagnostics.iterations} Picard iterations, max ratio {diagnostics.max_ratio}")


class DecayRunner(ScenarioRunner):
    name = 'verify_decay'

    def run(self) -> RunResult:
        s = self.scenario
        trajectory, _ = picard_solve(s.initial, s.forcing, s.cfg, s.constants, s.c_resolvent)
        self.write(exports.write_trajectory(self.output_dir / 'trajectory.csv', trajectory, s.forcing, s.cfg.p))
        report = bounds.decay_check(
            trajectory, s.forcing, s.cfg, s.constants, s.check['sigma_margin'], s.c_resolvent, s.c_hat,
        )
        self.write(exports.write_records(self.output_dir / 'bounds.csv', [report.to_row()]))
        return RunResult(
            report.passed,
            report.to_dict(),
            f"fitted rate {report.fitted_decay_rate:.4g} against sigma_eff {report.sigma_eff:.4g}",
        )


class MasseraRunner(ScenarioRunner):
    """
    Splitting of the half-line solution into the whole-line almost periodic
    solution plus a decaying remainder.
    """
    name = 'verify_massera'

    def run(self) -> RunResult:
        s = self.scenario
        check = s.check
        massera = verify_massera_splitting(
            s.initial, s.forcing, s.cfg, s.constants, check['burn_in'], check['match_initial'],
        )
        self.write(exports.write_csv(
            self.output_dir / 'massera.csv',
            ('t', 'difference', 'layer'),
            zip(massera.times, massera.difference_norms, massera.layer_norms),
        ))
        whole_line = bounds.whole_line_bound_check(
            massera.ap_solution, massera.ap_solution.sup_norm, s.forcing.ap_only(), s.cfg, s.constants,
            s.c_resolvent, s.c_hat,
        )
        passes = dict(massera.passes)
        passes['whole_line_bound'] = whole_line.passed
        if check['threshold_time'] is not None:
            late = massera.times >= check['threshold_time'] - 1e-9
            passes['difference_threshold'] = bool(
                float(massera.difference_norms[late].max(initial=0.0)) <= check['difference_threshold']
            )
        report = massera.to_dict()
        report.update({'whole_line': whole_line.to_dict(), 'passes': passes, 'passed': all(passes.values())})
        return RunResult(
            report['passed'],
            report,
            f"difference rate {massera.difference_rate:.4g}, final difference {massera.final_difference:.3e}",
        )


class CalibrateRunner(ScenarioRunner):
    """Dispersive constants for the scenario's grid, certified on the calibration sweep."""
    name = 'calibrate'

    def run(self) -> RunResult:
        s = self.scenario
        check = s.check
        profiles = [s.profile(params, 2.0) for params in check['profiles']]
        times = list(check['times'])
        pairs = [tuple(pair) for pair in check['pq_pairs']]
        constants = calibrate(profiles, times, pairs)
        self.write(exports.write_json(self.output_dir / 'constants.json', constants.to_dict()))
        sweeps = [check_dispersive(profiles, times, p, q, constants) for p, q in pairs]
        report = {
            'constants': constants.to_dict(),
            'sweeps': [sweep.to_dict() for sweep in sweeps],
        }
        self.write(exports.write_records(self.output_dir / 'dispersive.csv', report['sweeps']))
        passed = all(sweep.certified for sweep in sweeps)
        report['passed'] = passed
        return RunResult(
            passed,
            report,
            f"c_tilde={constants.c_tilde:.6g}, delta_n={constants.delta_n:.6g}",
            constants=constants,
        )


class TranslationScanRunner(ScenarioRunner):
    """
    Certified epsilon-translation numbers of the forcing's temporal signal.
    With decaying terms and a settle time the half-line numbers are scanned.
    """
    name = 'translation_scan'

    def run(self) -> RunResult:
        s = self.scenario
        check = s.check
        signal = s.forcing.temporal
        epsilon = check['epsilon']
        window = (check['window_start'], check['window_length'])
        if signal.c0_part and check['settle_time'] is not None:
            taus = frechet_translation_numbers(signal, epsilon, check['settle_time'], window)
        else:
            taus = find_translation_numbers(signal.ap_part, epsilon, window)
        self.write(exports.write_csv(self.output_dir / 'translation_numbers.csv', ('tau',), ([tau] for tau in taus)))
        report: Dict[str, Any] = {'epsilon': epsilon, 'window': list(window), 'count': int(taus.size)}
        passed = True
        if check['num_windows'] is not None:
            density = relative_density_check(
                signal.ap_part, epsilon, check['num_windows'], check['density_window'], start=check['window_start'],
            )
            report['density'] = density.to_dict()
            passed = density.passed
        report['passed'] = passed
        first = f", first at {taus[0]:.6g}" if taus.size else ''
        return RunResult(passed, report, f"{taus.size} translation numbers{first}")


RUNNERS: Dict[str, Type[ScenarioRunner]] = {
    runner.name: runner
    for runner in (
        SimulateRunner, LinearBoundRunner, FixedPointRunner, DecayRunner,
        MasseraRunner, CalibrateRunner, TranslationScanRunner,
    )
}

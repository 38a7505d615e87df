import math

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import BlowUpError, InvalidParameterError
from core.utils import bounds
from core.utils.geometry import RadialGrid, lp_norm, profile
from core.utils.mild_solver import (
    ExponentialStepper,
    Forcing,
    Integrator,
    SolverConfig,
    Trajectory,
    contraction_estimate,
    evolve,
    linear_solution_operator,
    minimum_burn_in,
    nonlinear_term,
    picard_solve,
    verify_massera_splitting,
    whole_line_ap_solution,
)
from core.utils.semigroup import DispersiveConstants, apply_div_heat, apply_heat
from core.utils.signals import AAPSignal, DecayingTerm, TrigPolynomial

GRID = RadialGrid(3, 16.0, 256)
CONSTANTS = DispersiveConstants(3, 1.0, 1.0)
DECAYING = AAPSignal(c0_part=(DecayingTerm(1.0, 1.0),))
SIN = AAPSignal(TrigPolynomial.from_triples([(1.0, 0.0, 1.0)]))


def _config(**changes):
    params = {'alpha': 1.0, 'gamma': 1.0, 'rho': 0.1, 'dt': 0.05, 't_end': 1.0}
    params.update(changes)
    return SolverConfig(GRID, 4.0, **params)


def _initial(norm=1e-3):
    return profile(GRID, 'gaussian', norm=norm, norm_exponent=2.0)


def _forcing(temporal=DECAYING, norm=5e-4):
    return Forcing(temporal, profile(GRID, 'gaussian_flux', norm=norm, norm_exponent=4.0 / 3.0))


class SolverConfigTests(SimpleTestCase):
    def test_rejects_invalid_parameters(self):
        cases = [
            {'p': 3.0}, {'p': 6.0}, {'dt': 0.2}, {'dt': 0.0}, {'t_end': 1.03, 'dt': 0.05},
            {'chi': 2.0}, {'rho': 0.0}, {'alpha': -1.0}, {'picard_max_iters': 0},
        ]
        for case in cases:
            params = {'p': 4.0}
            params.update(case)
            with self.subTest(case=case), self.assertRaises(InvalidParameterError):
                SolverConfig(GRID, **params)

    def test_needs_a_propagating_dimension(self):
        with self.assertRaises(InvalidParameterError):
            SolverConfig(RadialGrid(4, 8.0, 64), 5.0)

    def test_derived_quantities(self):
        cfg = _config()
        self.assertEqual(cfg.num_steps, 20)
        self.assertEqual(cfg.times.size, 21)
        self.assertAlmostEqual(cfg.contraction_factor, 0.2, places=15)
        self.assertIs(cfg.with_(integrator='heun').integrator, Integrator.HEUN)


class EvolveTests(SimpleTestCase):
    def test_zero_data_stays_zero(self):
        trajectory = evolve(GRID.zeros(), Forcing.zero(GRID), _config(), CONSTANTS)
        self.assertEqual(np.max(np.abs(trajectory.states)), 0.0)
        self.assertEqual(trajectory.sup_norm, 0.0)

    def test_without_chemotaxis_reduces_to_heat_flow(self):
        u0 = _initial()
        trajectory = evolve(u0, Forcing.zero(GRID), _config(alpha=0.0), CONSTANTS)
        expected = apply_heat(u0, 1.0).values
        np.testing.assert_allclose(trajectory.states[-1], expected, rtol=0, atol=1e-12 * np.max(np.abs(expected)))

    def test_forced_heat_flow_is_the_duhamel_sum(self):
        cfg = _config(alpha=0.0, t_end=0.5)
        forcing = _forcing()
        trajectory = evolve(GRID.zeros(), forcing, cfg, CONSTANTS)
        total = GRID.zeros()
        M = cfg.num_steps
        for m in range(M):
            total = total + cfg.dt * apply_div_heat(forcing.at(m * cfg.dt), (M - m) * cfg.dt)
        scale = np.max(np.abs(total.values))
        self.assertGreater(scale, 0.0)
        np.testing.assert_allclose(trajectory.states[-1], total.values, rtol=0, atol=1e-10 * scale)

    def test_frozen_zero_coefficient_matches_linear_evolution(self):
        cfg = _config()
        u0, forcing = _initial(), _forcing()
        frozen = linear_solution_operator(forcing, Trajectory.zeros(cfg), u0, cfg, CONSTANTS)
        linear = evolve(u0, forcing, cfg.with_(alpha=0.0), CONSTANTS)
        np.testing.assert_allclose(frozen.states, linear.states, rtol=0, atol=1e-18)

    def test_euler_converges_at_first_order(self):
        u0, forcing = _initial(), _forcing()
        finals = [
            evolve(u0, forcing, _config(dt=dt, t_end=0.8), CONSTANTS).state(-1)
            for dt in (0.04, 0.02, 0.01)
        ]
        coarse = lp_norm(finals[0] - finals[1], 2.0)
        fine = lp_norm(finals[1] - finals[2], 2.0)
        self.assertAlmostEqual(math.log2(coarse / fine), 1.0, delta=0.3)

    def test_euler_departs_from_heun_at_first_order(self):
        u0, forcing = _initial(), _forcing()
        gaps = []
        for dt in (0.05, 0.025):
            euler = evolve(u0, forcing, _config(dt=dt, t_end=0.5), CONSTANTS)
            heun = evolve(u0, forcing, _config(dt=dt, t_end=0.5, integrator='heun'), CONSTANTS)
            gaps.append(lp_norm(euler.state(-1) - heun.state(-1), 2.0))
        self.assertAlmostEqual(math.log2(gaps[0] / gaps[1]), 1.0, delta=0.3)

    def test_mass_is_conserved_with_chemotaxis_and_forcing(self):
        u0 = _initial()
        for integrator in ('euler', 'heun'):
            masses = evolve(u0, _forcing(SIN), _config(t_end=5.0, integrator=integrator), CONSTANTS).masses()
            with self.subTest(integrator=integrator):
                self.assertGreater(masses[0], 0.0)
                self.assertLessEqual(np.max(np.abs(masses - masses[0])), 1e-7 * masses[0])

    def test_mass_is_conserved_on_h2(self):
        grid = RadialGrid(2, 20.0, 512)
        cfg = SolverConfig(
            grid, 3.5, alpha=1.0, gamma=1.0, rho=0.1, dt=0.05, t_end=4.0, strict_smallness=False,
        )
        u0 = profile(grid, 'gaussian', norm=1e-3, norm_exponent=1.75)
        forcing = Forcing(DECAYING, profile(grid, 'gaussian_flux', norm=5e-4, norm_exponent=3.5 / 3.0))
        masses = evolve(u0, forcing, cfg, DispersiveConstants(2, 1.0, 1.0)).masses()
        self.assertGreater(masses[0], 0.0)
        self.assertLessEqual(np.max(np.abs(masses - masses[0])), 1e-6 * masses[0])

    def test_positive_data_stays_positive(self):
        trajectory = evolve(_initial(), Forcing.zero(GRID), _config(t_end=5.0), CONSTANTS)
        scale = np.max(trajectory.states)
        self.assertGreater(scale, 0.0)
        self.assertGreaterEqual(trajectory.states.min(), -1e-12 * scale)

    def test_rejects_data_on_another_grid(self):
        other = RadialGrid(3, 16.0, 128)
        with self.assertRaises(InvalidParameterError):
            evolve(other.zeros(), Forcing.zero(GRID), _config(), CONSTANTS)
        with self.assertRaises(InvalidParameterError):
            evolve(GRID.zeros(), Forcing.zero(other), _config(), CONSTANTS)

    def test_nonlinear_term_vanishes_without_chemotaxis(self):
        self.assertEqual(np.max(np.abs(nonlinear_term(_initial(), _config(alpha=0.0)).values)), 0.0)


class StepperTests(SimpleTestCase):
    def test_guard_raises_blow_up(self):
        cfg = _config(alpha=0.0)
        stepper = ExponentialStepper(cfg, lambda m, state: GRID.zeros(), guard=1e-12)
        with self.assertRaises(BlowUpError) as raised:
            stepper.forward_integrate(_initial(), 0, 5)
        self.assertEqual(raised.exception.step, 1)
        self.assertEqual(raised.exception.threshold, 1e-12)

    def test_forward_integrate_keeps_the_first_row(self):
        cfg = _config(alpha=0.0)
        stepper = ExponentialStepper(cfg, lambda m, state: GRID.zeros())
        u0 = _initial()
        states = stepper.forward_integrate(u0, 0, 3)
        self.assertEqual(states.shape, (4, GRID.num_nodes))
        np.testing.assert_array_equal(states[0], u0.values)


class PicardTests(SimpleTestCase):
    def test_zero_data_converges_at_once(self):
        trajectory, diagnostics = picard_solve(GRID.zeros(), Forcing.zero(GRID), _config(), CONSTANTS)
        self.assertTrue(diagnostics.converged)
        self.assertEqual(diagnostics.iterations, 1)
        self.assertEqual(diagnostics.residual, 0.0)
        self.assertEqual(trajectory.sup_norm, 0.0)

    def test_small_data_contracts(self):
        cfg = _config()
        u0, forcing = _initial(), _forcing()
        trajectory, diagnostics = picard_solve(u0, forcing, cfg, CONSTANTS)
        self.assertTrue(diagnostics.ball.holds)
        self.assertTrue(diagnostics.converged)
        self.assertLessEqual(diagnostics.max_ratio, 1.1 * cfg.contraction_factor)
        self.assertLessEqual(diagnostics.residual, cfg.picard_tol)
        self.assertLessEqual(trajectory.sup_norm, cfg.rho)
        direct = evolve(u0, forcing, cfg, CONSTANTS)
        self.assertLess(direct.distance(trajectory), 10.0 * cfg.picard_tol)
        self.assertEqual(diagnostics.to_dict()['iterations'], diagnostics.iterations)

    def test_strict_smallness_rejects_large_data(self):
        with self.assertRaises(InvalidParameterError):
            picard_solve(_initial(0.05), _forcing(), _config(), CONSTANTS)

    def test_requires_a_contraction(self):
        with self.assertRaises(InvalidParameterError):
            picard_solve(_initial(), _forcing(), _config(rho=0.6), CONSTANTS)

    def test_constants_must_match_dimension(self):
        with self.assertRaises(InvalidParameterError):
            picard_solve(_initial(), _forcing(), _config(), DispersiveConstants(2, 1.0, 0.25))

    def test_contraction_estimate(self):
        cfg = _config()
        omega = Trajectory(GRID, cfg.times, np.tile(_initial().values, (cfg.num_steps + 1, 1)), 2.0)
        estimate = contraction_estimate(Trajectory.zeros(cfg), omega, _initial(), _forcing(), cfg, CONSTANTS)
        self.assertGreater(estimate.ratio, 0.0)
        self.assertTrue(estimate.within)
        with self.assertRaises(InvalidParameterError):
            contraction_estimate(omega, omega, _initial(), _forcing(), cfg, CONSTANTS)


class WholeLineTests(SimpleTestCase):
    def test_burn_in_is_five_decay_times(self):
        self.assertAlmostEqual(minimum_burn_in(_config(), CONSTANTS), 5.0 / 0.771875, places=12)

    def test_rejects_decaying_signals_and_short_burn_in(self):
        with self.assertRaises(InvalidParameterError):
            whole_line_ap_solution(_forcing(DECAYING), _config(), constants=CONSTANTS)
        with self.assertRaises(InvalidParameterError):
            whole_line_ap_solution(_forcing(SIN), _config(), burn_in=1.0, constants=CONSTANTS)

    def test_zero_forcing_gives_zero_solution(self):
        trajectory = whole_line_ap_solution(Forcing.zero(GRID), _config(), constants=CONSTANTS)
        self.assertEqual(trajectory.sup_norm, 0.0)

    def test_massera_without_forcing(self):
        report = verify_massera_splitting(GRID.zeros(), Forcing.zero(GRID), _config(), CONSTANTS)
        self.assertTrue(report.passed)
        self.assertEqual(report.final_difference, 0.0)

    def test_matched_start_follows_the_almost_periodic_solution(self):
        cfg = _config(t_end=2.0)
        forcing = _forcing(SIN, norm=2.5e-4)
        report = verify_massera_splitting(GRID.zeros(), forcing, cfg, CONSTANTS, match_initial=True)
        self.assertLessEqual(report.final_difference, 1e-12)
        self.assertTrue(report.passed)
        self.assertGreater(report.ap_solution.sup_norm, 0.0)
        self.assertNotIn('ap_solution', report.to_dict())


class TranslationTests(SimpleTestCase):
    def test_fixed_point_inherits_translation_numbers_of_the_forcing(self):
        cfg = _config(t_end=20.0)
        forcing = _forcing(SIN)
        trajectory, diagnostics = picard_solve(_initial(), forcing, cfg, CONSTANTS)
        self.assertTrue(diagnostics.converged)
        report = bounds.translation_check(trajectory, forcing, cfg, CONSTANTS, 0.1)
        self.assertTrue(report.passed)
        self.assertAlmostEqual(report.extras['tau'], 2.0 * math.pi, delta=0.05)
        self.assertGreater(report.measured_sup, 0.0)
        self.assertLess(report.measured_sup, report.theoretical_sup_bound)

        # half a period is no translation number and moves the solution far more
        shift = int(round(math.pi / cfg.dt))
        start = cfg.num_steps // 2
        half = max(
            lp_norm(trajectory.state(m + shift) - trajectory.state(m), 2.0)
            for m in range(start, cfg.num_steps - shift + 1)
        )
        self.assertGreater(half, 5.0 * report.measured_sup)

import math

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import InvalidParameterError
from core.utils.elliptic import (
    check_resolvent_bound,
    discrete_residual,
    gradient_of_resolvent,
    k_gamma,
    solve_resolvent,
)
from core.utils.geometry import RadialGrid, profile


def _manufactured(grid, gamma):
    """Source of v = e^{-r^2} on H^3: -(v'' + 2 coth(r) v') + gamma v."""
    r = grid.nodes
    r_coth = np.where(r > 0, r / np.tanh(np.where(r > 0, r, 1.0)), 1.0)
    v = np.exp(-r ** 2)
    laplacian = (4.0 * r ** 2 - 2.0) * v - 4.0 * r_coth * v
    return grid.field(-laplacian + gamma * v), v


class KGammaTests(SimpleTestCase):
    def test_values(self):
        self.assertEqual(k_gamma(0.0, 3), 1.0)
        self.assertEqual(k_gamma(2.0, 3), 0.25)
        self.assertEqual(k_gamma(4.0, 2), 0.25)

    def test_rejects_negative_gamma(self):
        with self.assertRaises(InvalidParameterError):
            k_gamma(-1.0, 3)


class SolveResolventTests(SimpleTestCase):
    def test_manufactured_solution_converges_at_second_order(self):
        errors = []
        for num_nodes in (129, 257, 513):
            grid = RadialGrid(3, 8.0, num_nodes)
            source, exact = _manufactured(grid, 1.0)
            self.assertAlmostEqual(source.values[0], 7.0, places=12)
            v = solve_resolvent(source, 1.0, 1.0)
            errors.append(np.max(np.abs(v.values - exact)))
        orders = [math.log2(errors[k] / errors[k + 1]) for k in range(2)]
        for order in orders:
            self.assertAlmostEqual(order, 2.0, delta=0.2)

    def test_discrete_residual_is_small(self):
        grid = RadialGrid(3, 12.0, 300)
        source = profile(grid, 'gaussian', width=1.5)
        v = solve_resolvent(source, 0.5, 2.0)
        self.assertLess(discrete_residual(source, v, 0.5, 2.0), 1e-10)

    def test_alpha_scales_linearly(self):
        grid = RadialGrid(2, 10.0, 200)
        source = profile(grid, 'gaussian')
        once = solve_resolvent(source, 1.0, 1.0)
        thrice = solve_resolvent(source, 1.0, 3.0)
        np.testing.assert_allclose(thrice.values, 3.0 * once.values, rtol=1e-12, atol=1e-16)

    def test_concentration_decreases_from_the_axis(self):
        grid = RadialGrid(3, 10.0, 200)
        v = solve_resolvent(profile(grid, 'gaussian'), 1.0, 1.0)
        self.assertGreater(v.values[0], v.values[50])
        self.assertGreater(v.values[50], 0.0)
        self.assertEqual(v.values[-1], 0.0)

    def test_gradient_vanishes_on_axis(self):
        grid = RadialGrid(3, 10.0, 200)
        gradient = gradient_of_resolvent(profile(grid, 'gaussian'), 1.0, 1.0)
        self.assertEqual(gradient.values[0], 0.0)
        self.assertLess(gradient.values[20], 0.0)

    def test_gamma_zero_warns_about_truncation(self):
        grid = RadialGrid(3, 9.0, 77)
        with self.assertLogs('core.utils.elliptic', level='WARNING') as logs:
            solve_resolvent(profile(grid, 'gaussian'), 0.0, 1.0)
        self.assertIn('gamma=0', logs.output[0])

    def test_rejects_invalid_rates(self):
        grid = RadialGrid(3, 9.0, 64)
        source = profile(grid, 'gaussian')
        with self.assertRaises(InvalidParameterError):
            solve_resolvent(source, -0.5, 1.0)
        with self.assertRaises(InvalidParameterError):
            solve_resolvent(source, 1.0, 0.0)


class ResolventBoundTests(SimpleTestCase):
    def setUp(self):
        self.grid = RadialGrid(3, 12.0, 400)
        self.sources = [profile(self.grid, 'gaussian', width=w) for w in (0.5, 1.0, 2.0)]

    def test_sobolev_exponent_is_derived(self):
        report = check_resolvent_bound(self.sources, 1.0, 2.0)
        self.assertAlmostEqual(report.q, 6.0, places=12)
        self.assertEqual(report.k_gamma, 1.0)
        self.assertEqual(len(report.ratios), 3)
        self.assertGreater(report.empirical_constant, 0.0)
        self.assertTrue(math.isfinite(report.empirical_constant))
        self.assertEqual(report.to_dict()['sources'], 3)

    def test_zero_sources_are_skipped(self):
        report = check_resolvent_bound([self.grid.zeros()], 1.0, 2.0)
        self.assertEqual(report.ratios, [])
        self.assertEqual(report.empirical_constant, 0.0)

    def test_rejects_exponents_off_the_sobolev_line(self):
        with self.assertRaises(InvalidParameterError):
            check_resolvent_bound(self.sources, 1.0, 2.0, q=4.0)
        with self.assertRaises(InvalidParameterError):
            check_resolvent_bound(self.sources, 1.0, 3.0)
        with self.assertRaises(InvalidParameterError):
            check_resolvent_bound([], 1.0, 2.0)

import json
import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from core.utils import bounds
from core.utils.elliptic import solve_resolvent
from core.utils.geometry import RadialGrid, profile
from core.utils.mild_solver import Forcing, SolverConfig, Trajectory
from core.utils.semigroup import DispersiveConstants
from lab.exports import format_value, plain, write_json, write_records, write_snapshot


class FormatTests(SimpleTestCase):
    def test_format_value(self):
        self.assertEqual(format_value(None), '')
        self.assertEqual(format_value(True), 'true')
        self.assertEqual(format_value(np.bool_(False)), 'false')
        self.assertEqual(format_value(np.int64(7)), '7')
        self.assertEqual(format_value(0.1), '0.10000000000000001')
        self.assertEqual(format_value('gaussian'), 'gaussian')

    def test_plain_handles_numpy_and_non_finite_values(self):
        data = {'a': np.float64(1.5), 'b': [np.inf, -math.inf, math.nan], 'c': np.arange(2), 'd': Path('x')}
        self.assertEqual(plain(data), {'a': 1.5, 'b': ['inf', '-inf', 'nan'], 'c': [0, 1], 'd': 'x'})


class WriterTests(SimpleTestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)
        self.addCleanup(self._tmp.cleanup)

    def test_json_is_sorted_and_finite(self):
        path = write_json(self.tmp / 'report.json', {'b': 1, 'a': math.inf})
        self.assertEqual(path.read_text(), '{\n  "a": "inf",\n  "b": 1\n}\n')

    def test_records_share_a_sorted_header(self):
        path = write_records(self.tmp / 'rows.csv', [{'b': 1, 'a': 0.5}, {'c': True}])
        self.assertEqual(path.read_text(), 'a,b,c\n0.5,1,\n,,true\n')

    def _snapshot_columns(self, path):
        data = np.loadtxt(path, delimiter=',', skiprows=1)
        return data[:, 0], data[:, 1], data[:, 2]

    def test_snapshot_concentration_scales_with_production_rate(self):
        grid = RadialGrid(3, 12.0, 128)
        u = profile(grid, 'gaussian', norm=1e-3, norm_exponent=2.0)
        _, _, unit = self._snapshot_columns(write_snapshot(self.tmp / 'unit.csv', u, 1.0, 1.0))
        r, values, doubled = self._snapshot_columns(write_snapshot(self.tmp / 'doubled.csv', u, 1.0, 2.0))
        np.testing.assert_array_equal(r, grid.nodes)
        np.testing.assert_array_equal(values, u.values)
        np.testing.assert_allclose(doubled, solve_resolvent(u, 1.0, 2.0).values, rtol=1e-15, atol=0)
        np.testing.assert_allclose(doubled, 2.0 * unit, rtol=1e-12, atol=0)
        self.assertGreater(unit.max(), 0.0)

    def test_snapshot_without_production_has_no_concentration(self):
        grid = RadialGrid(3, 12.0, 128)
        u = profile(grid, 'gaussian', norm=1e-3, norm_exponent=2.0)
        _, _, v = self._snapshot_columns(write_snapshot(self.tmp / 'idle.csv', u, 1.0, 0.0))
        self.assertEqual(np.max(np.abs(v)), 0.0)

    def test_bounds_report_is_written_as_plain_json(self):
        grid = RadialGrid(3, 16.0, 256)
        cfg = SolverConfig(grid, 4.0, alpha=1.0, gamma=1.0, rho=0.1, dt=0.05, t_end=1.0)
        report = bounds.decay_check(Trajectory.zeros(cfg), Forcing.zero(grid), cfg, DispersiveConstants(3, 1.0, 1.0))
        data = json.loads(write_json(self.tmp / 'report.json', report.to_dict()).read_text())
        self.assertEqual(data['check'], 'decay')
        self.assertEqual(data['fitted_decay_rate'], 'inf')
        self.assertIs(data['passed'], True)
        self.assertIsInstance(data['passes'], dict)

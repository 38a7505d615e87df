import json
import math
import tempfile
from pathlib import Path

from django.conf import settings
from django.test import SimpleTestCase, override_settings

from core.utils.geometry import lp_norm
from core.utils.mild_solver import verify_massera_splitting
from core.utils.semigroup import Provenance
from lab.scenario import ScenarioError, load_scenario

SCENARIO_DIR = Path(__file__).resolve().parent.parent / 'scenarios'

MINIMAL = """
[grid]
n = 3

[solver]
p = 4.0
"""

FORCED = """
name = "forced"

[grid]
n = 3
r_max = 8.0
num_nodes = 64

[solver]
p = 4.0
dt = 0.05
t_end = 1.0

[initial]
family = "gaussian"
norm = 1e-3

[forcing]
family = "gaussian_flux"
norm = 5e-4
"""


class ScenarioTestCase(SimpleTestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)
        self.addCleanup(self._tmp.cleanup)
        hyperks = {
            **settings.HYPERKS,
            'NUM_NODES': 64, 'R_MAX': 8.0, 'DT': 0.05, 'T_END': 1.0,
            'OUTPUT_DIR': str(self.tmp / 'runs'),
        }
        override = override_settings(HYPERKS=hyperks)
        override.enable()
        self.addCleanup(override.disable)

    def write(self, text, name='scenario.toml'):
        path = self.tmp / name
        path.write_text(text)
        return path


class LoadScenarioTests(ScenarioTestCase):
    def test_missing_file(self):
        path = self.tmp / 'absent.toml'
        with self.assertRaisesMessage(ScenarioError, str(path)):
            load_scenario(path)

    def test_invalid_toml(self):
        with self.assertRaises(ScenarioError):
            load_scenario(self.write('[grid\nn = 3'))

    def test_exponent_outside_the_admissible_window(self):
        for n, p in ((3, 3.0), (3, 6.0), (2, 4.0)):
            path = self.write(f"[grid]\nn = {n}\n\n[solver]\np = {p}\n")
            with self.subTest(n=n, p=p):
                with self.assertRaisesMessage(ScenarioError, 'solver'):
                    load_scenario(path)

    def test_defaults_are_resolved_and_recorded(self):
        scenario = load_scenario(self.write(MINIMAL, 'minimal.toml'))
        self.assertEqual(scenario.name, 'minimal')
        self.assertEqual(scenario.grid.num_nodes, 64)
        self.assertEqual(scenario.grid.r_max, 8.0)
        self.assertEqual(scenario.cfg.dt, 0.05)
        self.assertEqual(scenario.snapshots, [1.0])
        self.assertEqual(scenario.output_dir, self.tmp / 'runs' / 'minimal')
        self.assertEqual(scenario.constants.c_tilde, 2.0)
        self.assertEqual(scenario.constants.provenance, Provenance.DEFAULT)
        self.assertEqual(scenario.forcing.temporal.evaluate(2.0), 0.0)

        resolved = scenario.resolved
        self.assertEqual(resolved['grid']['num_nodes'], 64)
        self.assertEqual(resolved['solver']['t_end'], 1.0)
        self.assertEqual(resolved['solver']['integrator'], 'euler')
        self.assertEqual(resolved['constants']['provenance'], 'default')
        self.assertEqual(resolved['constants']['c_tilde'], 2.0)
        self.assertIn([1.0, 'inf'], resolved['check']['pq_pairs'])
        self.assertEqual(resolved['check']['sigma_margin'], 0.05)
        self.assertEqual(len(resolved['check']['profiles']), 3)
        self.assertEqual(resolved['check']['forcing_amplitudes'], [0.25, 0.5, 1.0])
        self.assertEqual(resolved['check']['gammas'], [0.0, 1.0, 4.0])
        self.assertEqual(resolved['output']['dir'], str(self.tmp / 'runs' / 'minimal'))

    def test_initial_norm_is_in_half_p(self):
        scenario = load_scenario(self.write(FORCED))
        self.assertAlmostEqual(lp_norm(scenario.initial, 2.0), 1e-3, delta=1e-15)
        self.assertAlmostEqual(lp_norm(scenario.forcing.spatial, 4.0 / 3.0), 5e-4, delta=1e-15)

    def test_profile_without_temporal_terms_is_constant_in_time(self):
        scenario = load_scenario(self.write(FORCED))
        temporal = scenario.forcing.temporal
        self.assertEqual(temporal.evaluate(0.0), 1.0)
        self.assertEqual(temporal.evaluate(3.7), 1.0)
        self.assertEqual(scenario.resolved['forcing']['ap'], [{'a': 1.0, 'b': 0.0, 'lambda': 0.0}])

    def test_trigonometric_terms_use_lambda(self):
        text = FORCED + "\n[[forcing.ap]]\nlambda = 2.0\nb = 1.0\n\n[[forcing.c0]]\nc = 0.5\nkappa = 2.0\n"
        scenario = load_scenario(self.write(text))
        temporal = scenario.forcing.temporal
        self.assertEqual(temporal.ap_part.terms[0].frequency, 2.0)
        self.assertAlmostEqual(temporal.evaluate(1.0), math.sin(2.0) + 0.5 * math.exp(-2.0), places=15)
        self.assertEqual(scenario.resolved['forcing']['ap'][0]['lambda'], 2.0)
        self.assertEqual(scenario.resolved['forcing']['c0'][0]['shape'], 'exponential')

    def test_repeated_frequencies_are_rejected(self):
        text = FORCED + "\n[[forcing.ap]]\nlambda = 1.0\na = 1.0\n\n[[forcing.ap]]\nlambda = 1.0\nb = 1.0\n"
        with self.assertRaises(ScenarioError):
            load_scenario(self.write(text))

    def test_snapshot_beyond_t_end(self):
        with self.assertRaisesMessage(ScenarioError, 't_end'):
            load_scenario(self.write(FORCED + "\n[output]\nsnapshots = [0.5, 2.0]\n"))

    def test_out_argument_and_relocation(self):
        scenario = load_scenario(self.write(FORCED), out=self.tmp / 'here')
        self.assertEqual(scenario.output_dir, self.tmp / 'here')
        scenario.relocate(self.tmp / 'there')
        self.assertEqual(scenario.resolved['output']['dir'], str(self.tmp / 'there'))


class ConstantsResolutionTests(ScenarioTestCase):
    def write_constants(self, n=3, c_tilde=1.7, delta_n=0.9):
        path = self.tmp / 'constants.json'
        path.write_text(json.dumps({
            'n': n, 'c_tilde': c_tilde, 'delta_n': delta_n,
            'provenance': 'calibrated', 'worst_ratio': 0.98, 'profiles_used': 4,
        }))
        return path

    def test_calibrated_file_is_used(self):
        scenario = load_scenario(self.write(FORCED), constants_path=self.write_constants())
        self.assertEqual(scenario.constants.provenance, Provenance.CALIBRATED)
        self.assertEqual(scenario.constants.c_tilde, 1.7)
        self.assertEqual(scenario.resolved['constants']['provenance'], 'calibrated')
        self.assertEqual(scenario.resolved['constants']['delta_n'], 0.9)

    def test_scenario_values_override_the_file(self):
        text = FORCED + "\n[constants]\nc_tilde = 1.2\n"
        scenario = load_scenario(self.write(text), constants_path=self.write_constants())
        self.assertEqual(scenario.constants.c_tilde, 1.2)
        self.assertEqual(scenario.constants.delta_n, 0.9)
        self.assertEqual(scenario.constants.provenance, Provenance.DEFAULT)

    def test_file_for_another_dimension(self):
        with self.assertRaisesMessage(ScenarioError, 'n=2'):
            load_scenario(self.write(FORCED), constants_path=self.write_constants(n=2))

    def test_missing_constants_file(self):
        with self.assertRaises(ScenarioError):
            load_scenario(self.write(FORCED), constants_path=self.tmp / 'absent.json')

    def test_non_positive_constants_are_rejected(self):
        with self.assertRaises(ScenarioError):
            load_scenario(self.write(FORCED + "\n[constants]\nc_tilde = 0.0\n"))


class ShippedScenarioTests(SimpleTestCase):
    def test_shipped_scenarios_load(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        paths = sorted(SCENARIO_DIR.glob('*.toml'))
        self.assertEqual(len(paths), 5)
        for path in paths:
            with self.subTest(scenario=path.name):
                scenario = load_scenario(path, out=Path(tmp.name) / path.stem)
                self.assertEqual(scenario.name, path.stem)

    def test_asymptotically_almost_periodic_scenario_settles(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        scenario = load_scenario(SCENARIO_DIR / 'aap_h3_p4.toml', out=Path(tmp.name))
        frequencies = sorted(term.frequency for term in scenario.forcing.temporal.ap_part.terms)
        self.assertEqual(frequencies, [1.0, math.sqrt(2.0)])
        self.assertEqual(len(scenario.forcing.temporal.c0_part), 1)

        report = verify_massera_splitting(scenario.initial, scenario.forcing, scenario.cfg, scenario.constants)
        self.assertGreater(report.difference_rate, 0.0)
        late = report.times >= 15.0 - 1e-9
        self.assertLess(report.difference_norms[late].max(), 1e-3)
        self.assertLess(report.difference_norms[late].max(), 1e-3 * report.difference_norms.max())

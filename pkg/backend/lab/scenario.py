"""
Scenario files: TOML documents validated by ScenarioSerializer and resolved
against the HYPERKS settings into library objects.
"""
import json
import logging
import math
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from django.conf import settings

from core.exceptions import InvalidParameterError
from core.utils.geometry import RadialField, RadialGrid, profile
from core.utils.mild_solver import Forcing, SolverConfig
from core.utils.semigroup import DispersiveConstants, Provenance
from core.utils.signals import AAPSignal, DecayingTerm, TrigPolynomial, TrigTerm

from .serializers import (
    CheckSerializer,
    ConstantsSerializer,
    DispersiveConstantsSerializer,
    ForcingSerializer,
    InitialSerializer,
    ScenarioSerializer,
)

logger = logging.getLogger(__name__)

DEFAULT_CALIBRATION_TIMES = tuple(float(t) for t in np.logspace(math.log10(0.05), 1.0, 12))
DEFAULT_PQ_PAIRS = ((2.0, 2.0), (1.5, 2.0), (4.0 / 3.0, 2.0), (1.0, math.inf))
DEFAULT_PROFILES = (
    {'family': 'gaussian', 'width': 0.5},
    {'family': 'gaussian', 'width': 1.0},
    {'family': 'gaussian', 'width': 2.0},
)
DEFAULT_GAMMAS = (0.0, 1.0, 4.0)
DEFAULT_FORCING_AMPLITUDES = (0.25, 0.5, 1.0)


class ScenarioError(InvalidParameterError):
    """The scenario file is missing, unreadable, or fails validation."""


@dataclass
class Scenario:
    """A fully validated and resolved scenario, ready for a runner."""
    name: str
    path: Path
    cfg: SolverConfig
    initial: RadialField
    forcing: Forcing
    constants: DispersiveConstants
    c_resolvent: float
    c_hat: float
    output_dir: Path
    snapshots: List[float]
    check: Dict[str, Any]
    resolved: Dict[str, Any] = field(default_factory=dict)

    @property
    def grid(self) -> RadialGrid:
        return self.cfg.grid

    def relocate(self, output_dir) -> None:
        self.output_dir = Path(output_dir)
        self.resolved['output']['dir'] = str(self.output_dir)

    def profile(self, params: Dict[str, Any], norm_exponent: float) -> RadialField:
        return profile(
            self.grid,
            params['family'],
            amplitude=params.get('amplitude', 1.0),
            width=params.get('width', 1.0),
            r_a=params.get('r_a', 1.0),
            r_b=params.get('r_b', 3.0),
            norm=params.get('norm'),
            norm_exponent=norm_exponent,
        )


def _read(path: Path) -> Dict[str, Any]:
    if not path.is_file():
        raise ScenarioError(f"Scenario file not found: {path}")
    try:
        with path.open('rb') as handle:
            return tomllib.load(handle)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"Scenario file {path} is not valid TOML: {exc}") from exc


def read_constants(path: Path, n: int) -> DispersiveConstants:
    """Constants file written by the calibrate command."""
    if not path.is_file():
        raise ScenarioError(f"Constants file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"Constants file {path} is not valid JSON: {exc}") from exc
    serializer = DispersiveConstantsSerializer(data=data)
    if not serializer.is_valid():
        raise ScenarioError(f"Constants file {path} is invalid: {serializer.errors}")
    constants = DispersiveConstants.from_dict(serializer.validated_data)
    if constants.n != n:
        raise ScenarioError(f"Constants file {path} is for n={constants.n}, the scenario has n={n}.")
    return constants


def _resolve_constants(data: Dict[str, Any], n: int, constants_path: Optional[Path]) -> DispersiveConstants:
    base = read_constants(constants_path, n) if constants_path else DispersiveConstants.default(n)
    overrides = {key: data[key] for key in ('c_tilde', 'delta_n') if key in data}
    if not overrides:
        return base
    return DispersiveConstants(
        n=n,
        c_tilde=overrides.get('c_tilde', base.c_tilde),
        delta_n=overrides.get('delta_n', base.delta_n),
        provenance=Provenance.DEFAULT,
    )


def _temporal(forcing: Dict[str, Any]) -> AAPSignal:
    ap = TrigPolynomial(tuple(TrigTerm(t['frequency'], t['a'], t['b']) for t in forcing['ap']))
    c0 = tuple(DecayingTerm(t['c'], t['kappa'], t['shape']) for t in forcing['c0'])
    return AAPSignal(ap, c0)


def _defaults(serializer_class) -> Dict[str, Any]:
    serializer = serializer_class(data={})
    serializer.is_valid(raise_exception=True)
    return dict(serializer.validated_data)


def _fill_defaults(data: Dict[str, Any], name: str, output_dir: Path) -> Dict[str, Any]:
    hyperks = settings.HYPERKS
    grid = data['grid']
    grid.setdefault('r_max', hyperks['R_MAX'])
    grid.setdefault('num_nodes', hyperks['NUM_NODES'])
    solver = data['solver']
    solver.setdefault('dt', hyperks['DT'])
    solver.setdefault('t_end', hyperks['T_END'])

    data['name'] = name
    data.setdefault('initial', _defaults(InitialSerializer))
    forcing = data.setdefault('forcing', _defaults(ForcingSerializer))
    if forcing['family'] != 'zero' and not forcing['ap'] and not forcing['c0']:
        # a profile without temporal terms is forced at constant unit strength
        forcing['ap'] = [{'frequency': 0.0, 'a': 1.0, 'b': 0.0}]
    data.setdefault('constants', _defaults(ConstantsSerializer))

    output = data.setdefault('output', {})
    output['dir'] = str(output_dir)
    output.setdefault('snapshots', [solver['t_end']])
    late = [t for t in output['snapshots'] if t > solver['t_end']]
    if late:
        raise ScenarioError(f"Snapshot times {late} lie beyond t_end={solver['t_end']}.")

    check = data.setdefault('check', _defaults(CheckSerializer))
    check.setdefault('sigma_margin', hyperks['SIGMA_MARGIN'])
    check.setdefault('times', list(DEFAULT_CALIBRATION_TIMES))
    check.setdefault('pq_pairs', [list(pair) for pair in DEFAULT_PQ_PAIRS])
    check.setdefault('profiles', [
        {'amplitude': 1.0, 'r_a': 1.0, 'r_b': 3.0, 'norm': None, **params} for params in DEFAULT_PROFILES
    ])
    check.setdefault('gammas', list(DEFAULT_GAMMAS))
    check.setdefault('forcing_amplitudes', list(DEFAULT_FORCING_AMPLITUDES))
    return data


def load_scenario(path, constants_path=None, out=None) -> Scenario:
    """
    Reads, validates and resolves one scenario file. Every default the file
    leaves out is filled in and recorded in Scenario.resolved.
    """
    path = Path(path)
    raw = _read(path)
    serializer = ScenarioSerializer(data=raw)
    if not serializer.is_valid():
        raise ScenarioError(f"Scenario {path} is invalid: {json.dumps(serializer.errors, sort_keys=True)}")
    data = serializer.validated_data
    name = data.get('name') or path.stem

    if out is not None:
        output_dir = Path(out)
    elif data.get('output', {}).get('dir'):
        output_dir = Path(data['output']['dir'])
    else:
        output_dir = Path(settings.HYPERKS['OUTPUT_DIR']) / name
    data = _fill_defaults(data, name, output_dir)

    grid = RadialGrid(**data['grid'])
    cfg = SolverConfig(grid=grid, **data['solver'])
    constants = _resolve_constants(data['constants'], grid.n, Path(constants_path) if constants_path else None)
    data['constants'].update({'c_tilde': constants.c_tilde, 'delta_n': constants.delta_n})

    scenario = Scenario(
        name=name,
        path=path,
        cfg=cfg,
        initial=grid.zeros(),
        forcing=Forcing.zero(grid),
        constants=constants,
        c_resolvent=data['constants']['c_resolvent'],
        c_hat=data['constants']['c_hat'],
        output_dir=output_dir,
        snapshots=sorted(data['output']['snapshots']),
        check=data['check'],
    )
    scenario.initial = scenario.profile(data['initial'], cfg.p / 2.0)
    scenario.forcing = Forcing(_temporal(data['forcing']), scenario.profile(data['forcing'], cfg.p / 3.0))

    resolved = dict(ScenarioSerializer(data).data)
    resolved['constants']['provenance'] = constants.provenance.value
    scenario.resolved = json.loads(json.dumps(resolved))
    logger.info("Loaded scenario '%s' from %s (n=%d, p=%g).", name, path, grid.n, cfg.p)
    return scenario

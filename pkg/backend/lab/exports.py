"""
File writers for run artifacts. Floats are written with 17 significant
digits and JSON keys are sorted, so identical runs give identical files.
"""
import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np

from core.utils.elliptic import solve_resolvent
from core.utils.geometry import RadialField, lp_norm
from core.utils.mild_solver import Forcing, Trajectory

TRAJECTORY_COLUMNS = ('t', 'norm_p2', 'norm_p3_forcing', 'mass', 'min_u', 'max_u')
SNAPSHOT_COLUMNS = ('r', 'u', 'v')
MANIFEST_NAME = 'manifest.json'


def format_value(value: Any) -> str:
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return '%.17g' % float(value)
    return str(value)


def plain(value: Any) -> Any:
    """Converts numpy scalars and arrays, paths and non-finite floats into JSON-ready values."""
    if isinstance(value, dict):
        return {str(key): plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [plain(item) for item in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return 'nan'
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return value
    if isinstance(value, Path):
        return str(value)
    return value


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(value) for value in row])
    return path


def write_records(path: Path, records: List[Dict[str, Any]]) -> Path:
    """CSV of flat records; the header is the sorted union of their keys."""
    columns = sorted({key for record in records for key in record})
    return write_csv(path, columns, ([record.get(key) for key in columns] for record in records))


def write_json(path: Path, data: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(plain(data), sort_keys=True, indent=2, allow_nan=False) + '\n')
    return path


def trajectory_rows(trajectory: Trajectory, forcing: Forcing, p: float) -> List[List[float]]:
    times = trajectory.times
    amplitudes = np.abs(np.asarray(forcing.temporal.evaluate(times), dtype=float))
    forcing_norms = amplitudes * lp_norm(forcing.spatial, p / 3.0)
    masses = trajectory.masses()
    states = trajectory.states
    return [
        [times[m], trajectory.norms[m], forcing_norms[m], masses[m], states[m].min(), states[m].max()]
        for m in range(len(trajectory))
    ]


def write_trajectory(path: Path, trajectory: Trajectory, forcing: Forcing, p: float) -> Path:
    return write_csv(path, TRAJECTORY_COLUMNS, trajectory_rows(trajectory, forcing, p))


def snapshot_index(trajectory: Trajectory, t: float) -> int:
    dt = float(trajectory.times[1] - trajectory.times[0]) if len(trajectory) > 1 else 1.0
    return min(int(round(t / dt)), len(trajectory) - 1)


def write_snapshot(path: Path, u: RadialField, gamma: float, alpha: float) -> Path:
    """r, u and the chemical concentration v = alpha (-Delta + gamma)^{-1} u, which is 0 when alpha = 0."""
    v = solve_resolvent(u, gamma, alpha) if alpha > 0 else u.grid.zeros()
    rows = zip(u.grid.nodes, u.values, v.values)
    return write_csv(path, SNAPSHOT_COLUMNS, rows)


def write_manifest(output_dir: Path, command: str, resolved: Dict[str, Any], artifacts: Sequence[Path]) -> Path:
    manifest = {
        'command': command,
        'scenario': resolved,
        'artifacts': sorted(Path(a).name for a in artifacts),
    }
    return write_json(output_dir / MANIFEST_NAME, manifest)

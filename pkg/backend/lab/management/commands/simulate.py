from lab.runners import SimulateRunner

from ._base import ScenarioCommand


class Command(ScenarioCommand):
    help = 'Runs the mild evolution of each scenario and writes the trajectory, snapshots and manifest.'
    runner_class = SimulateRunner

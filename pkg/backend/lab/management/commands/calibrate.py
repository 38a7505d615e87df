from lab.runners import CalibrateRunner

from ._base import ScenarioCommand


class Command(ScenarioCommand):
    help = 'Calibrates the dispersive constants on the scenario grid and writes constants.json.'
    runner_class = CalibrateRunner

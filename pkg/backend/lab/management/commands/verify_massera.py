from lab.runners import MasseraRunner

from ._base import ScenarioCommand


class Command(ScenarioCommand):
    help = 'Compares the half-line solution with the whole-line almost periodic solution.'
    runner_class = MasseraRunner

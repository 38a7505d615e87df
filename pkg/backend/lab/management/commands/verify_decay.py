from lab.runners import DecayRunner

from ._base import ScenarioCommand


class Command(ScenarioCommand):
    help = 'Checks exponential decay of the solution against the Gronwall envelope.'
    runner_class = DecayRunner

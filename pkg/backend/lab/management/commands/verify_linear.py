from lab.runners import LinearBoundRunner

from ._base import ScenarioCommand


class Command(ScenarioCommand):
    help = 'Checks the frozen-coefficient sup bound over profiles, forcing amplitudes and gammas.'
    runner_class = LinearBoundRunner

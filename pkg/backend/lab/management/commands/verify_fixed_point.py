from lab.runners import FixedPointRunner

from ._base import ScenarioCommand


class Command(ScenarioCommand):
    help = 'Builds the Picard solution and checks contraction, agreement with time stepping and translation.'
    runner_class = FixedPointRunner

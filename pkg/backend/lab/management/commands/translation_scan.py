from lab.runners import TranslationScanRunner

from ._base import ScenarioCommand


class Command(ScenarioCommand):
    help = 'Lists certified epsilon-translation numbers of the forcing signal.'
    runner_class = TranslationScanRunner

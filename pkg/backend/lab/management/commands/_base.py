import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Tuple, Type

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from django.db import DatabaseError, transaction
from rest_framework.exceptions import ValidationError

from core.exceptions import BlowUpError, CalibrationError, ContractionError, InvalidParameterError
from lab.exports import plain
from lab.models import CalibrationRecord, RunRecord
from lab.runners import EXIT_BLOWUP, EXIT_CHECK_FAILED, EXIT_INVALID, EXIT_OK, RunResult, ScenarioRunner
from lab.scenario import Scenario, load_scenario

logger = logging.getLogger(__name__)


def exit_code_for(exc: Exception) -> int:
    if isinstance(exc, BlowUpError):
        return EXIT_BLOWUP
    if isinstance(exc, (ContractionError, CalibrationError)):
        return EXIT_CHECK_FAILED
    if isinstance(exc, (InvalidParameterError, ValidationError)):
        return EXIT_INVALID
    raise exc


class ScenarioCommand(BaseCommand):
    """
    Shared surface of the laboratory commands: one or more scenario files,
    an output directory, a thread count for independent scenarios and an
    optional calibrated constants file.
    """
    runner_class: Type[ScenarioRunner]

    def add_arguments(self, parser):
        parser.add_argument('--scenario', action='append', required=True, help='Scenario TOML file (repeatable).')
        parser.add_argument('--out', default=None, help='Output directory; one subdirectory per scenario when several are given.')
        parser.add_argument('--jobs', type=int, default=settings.HYPERKS['JOBS'], help='Scenarios run concurrently.')
        parser.add_argument('--constants', default=None, help='Constants file written by the calibrate command.')

    def _output_for(self, name: str, out: Optional[str], many: bool) -> Optional[Path]:
        if out is None:
            return None
        return Path(out) / name if many else Path(out)

    def _load(self, paths: List[str], out: Optional[str], constants: Optional[str]) -> Tuple[List[Scenario], int]:
        scenarios = []
        worst = EXIT_OK
        many = len(paths) > 1
        for path in paths:
            try:
                scenario = load_scenario(path, constants_path=constants)
                target = self._output_for(scenario.name, out, many)
                if target is not None:
                    scenario.relocate(target)
            except (InvalidParameterError, ValidationError) as exc:
                self.stderr.write(self.style.ERROR(f"{path}: {exc}"))
                worst = max(worst, EXIT_INVALID)
                continue
            scenarios.append(scenario)
        return scenarios, worst

    def _execute(self, scenario: Scenario) -> Tuple[Optional[RunResult], int, str]:
        try:
            result = self.runner_class(scenario).execute()
        except Exception as exc:  # mapped to an exit code or re-raised
            code = exit_code_for(exc)
            logger.error("%s on '%s' failed: %s", self.runner_class.name, scenario.name, exc)
            return None, code, str(exc)
        return result, result.exit_code, result.summary

    def _record(self, scenario: Scenario, result: Optional[RunResult], code: int, message: str) -> None:
        report = result.report if result is not None else {'error': message}
        try:
            with transaction.atomic():
                run = RunRecord.objects.create(
                    scenario=scenario.name,
                    command=self.runner_class.name,
                    exit_code=code,
                    passed=code == EXIT_OK,
                    output_dir=str(scenario.output_dir),
                    manifest=scenario.resolved,
                    report=plain(report),
                )
                if result is not None and result.constants is not None:
                    constants = result.constants
                    CalibrationRecord.objects.create(
                        run=run,
                        n=constants.n,
                        c_tilde=constants.c_tilde,
                        delta_n=constants.delta_n,
                        worst_ratio=constants.worst_ratio,
                        profiles_used=constants.profiles_used,
                    )
        except DatabaseError as exc:
            logger.warning("Run of '%s' not recorded: %s", scenario.name, exc)

    def handle(self, *args, **options):
        scenarios, worst = self._load(options['scenario'], options['out'], options['constants'])
        jobs = max(1, options['jobs'])
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            outcomes = list(executor.map(self._execute, scenarios))

        for scenario, (result, code, message) in zip(scenarios, outcomes):
            self._record(scenario, result, code, message)
            line = f"{self.runner_class.name} {scenario.name}: {message} -> {scenario.output_dir}"
            if code == EXIT_OK:
                self.stdout.write(self.style.SUCCESS(line))
            else:
                self.stderr.write(self.style.ERROR(f"{line} (exit {code})"))
            worst = max(worst, code)

        if worst != EXIT_OK:
            raise CommandError(f"{self.runner_class.name} finished with exit code {worst}.", returncode=worst)


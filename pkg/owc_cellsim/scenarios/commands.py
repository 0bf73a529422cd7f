"""
Base class for the simulator management commands.

Every failure leaves as a CommandError whose message starts with an error code:
E_CONFIG and E_USAGE exit with 2, E_SCENARIO with 3, E_OUTPUT with 4, E_CALIBRATION with 5.
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Dict, Tuple

from django.core.management.base import BaseCommand, CommandError

from links.receiver import AdrEvaluation, Combining
from optics.photometry import ZeroCoverageError

from .grid_output import OutputError
from .loader import ScenarioError, load_scenario
from .runner import RunResult, run_command

logger = logging.getLogger(__name__)

EXIT_CODES = {
    'E_CONFIG': 2,
    'E_USAGE': 2,
    'E_SCENARIO': 3,
    'E_OUTPUT': 4,
    'E_CALIBRATION': 5,
}


def fail(code: str, message: str) -> CommandError:
    return CommandError(f"{code}: {message}", returncode=EXIT_CODES[code])


def parse_probe(value: str) -> Tuple[float, float]:
    parts = value.split(',')
    if len(parts) != 2:
        raise ValueError(f"expected X,Y, got {value!r}")
    x, y = (float(p) for p in parts)
    return x, y


class SimulationCommand(BaseCommand):
    """Loads the scenario, applies flag overrides, runs ``self.command`` and reports."""

    command = ''
    sweep_options = True

    def add_arguments(self, parser):
        parser.add_argument('--config', help='Scenario JSON file; omitted keys keep their defaults')
        parser.add_argument('--grid-step', help='Receiver grid spacing in metres')
        parser.add_argument('--out', help='Output directory')
        parser.add_argument('--threads', type=int, help='Worker threads (0 = all cores; default OWC_THREADS)')
        if self.sweep_options:
            parser.add_argument('--serving', help='Serving cell system: micro, pico or atto')
            parser.add_argument('--interfering', help="Comma separated interfering systems, or 'none'")
            parser.add_argument('--combining', help='sc or mrc')
            parser.add_argument('--probe', help='Print the per-branch breakdown at floor position X,Y')

    def overrides(self, options: Dict[str, Any]) -> Dict[str, Any]:
        flags = {
            'sweep.grid_step': options.get('grid_step'),
            'output.directory': options.get('out'),
            'sweep.serving': options.get('serving'),
            'sweep.interfering': options.get('interfering'),
            'sweep.combining': options.get('combining'),
        }
        return {key: value for key, value in flags.items() if value is not None}

    def run_options(self, options: Dict[str, Any]) -> Dict[str, Any]:
        probe = None
        if options.get('probe'):
            try:
                probe = parse_probe(options['probe'])
            except ValueError as exc:
                raise fail('E_USAGE', f"--probe: {exc}")
        return {'probe': probe}

    def handle(self, *args, **options):
        combining = options.get('combining')
        if combining is not None and combining not in Combining.values:
            raise fail('E_USAGE', f"--combining must be one of {', '.join(Combining.values)}, got {combining!r}")
        if options.get('threads') is not None and options['threads'] < 0:
            raise fail('E_USAGE', "--threads must not be negative")
        extra = self.run_options(options)

        try:
            config = load_scenario(options.get('config'), self.overrides(options))
            self.stdout.write(f"Running {self.command} ...")
            result = run_command(
                self.command,
                config,
                out_dir=Path(config.output_dir),
                threads=options.get('threads'),
                **extra,
            )
        except (ScenarioError, OutputError) as exc:
            logger.error(f"{self.command} failed: {exc}")
            raise fail(exc.code, str(exc))
        except ZeroCoverageError as exc:
            logger.error(f"{self.command} failed: {exc}")
            raise fail('E_CALIBRATION', str(exc))

        self.report(result)

    def report(self, result: RunResult) -> None:
        for block in result.blocks:
            s = block.summary
            self.stdout.write(
                f"  {block.name}: min {s.minimum:.2f}  max {s.maximum:.2f}  mean {s.mean:.2f}"
                + (f"  coverage {s.coverage:.1f}%" if s.coverage is not None else '')
            )
        if result.probe is not None:
            self.write_probe(result.probe)
        self.stdout.write('\n' + '=' * 50)
        self.stdout.write(self.style.SUCCESS(f"✓ Wrote {len(result.files)} files"))
        for path in result.files:
            self.stdout.write(f"  {path}")

    def write_probe(self, evaluation: AdrEvaluation) -> None:
        self.stdout.write('\nbranch        snr          sinr        sigma_t (A)')
        for i, branch in enumerate(evaluation.branches, start=1):
            self.stdout.write(f"  {i}      {branch.snr:11.4g}  {branch.sinr:11.4g}  {branch.sigma_total:11.4g}")
        self.stdout.write(f"  SC  sinr: {evaluation.sc_sinr:.4g}")
        self.stdout.write(f"  MRC sinr: {evaluation.mrc_sinr:.4g}")
        if evaluation.mrc_sinr == 0:
            self.stdout.write(self.style.WARNING("No serving signal reaches this position"))

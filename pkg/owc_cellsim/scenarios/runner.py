"""
Runs simulator commands against a validated scenario and writes their grid files.
"""
from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from django.conf import settings

from links.coexistence import CellSystem, CoexistenceScenario, CoexistenceSimulator, ScalarGrid, summarize
from links.receiver import AdrEvaluation, Combining, max_rate_at_ber, sinr_threshold_for_ber
from optics.emitters import CELL_SYSTEMS, SystemLayout, build_layout, merge_coincident
from optics.geometry import FloorGrid, Vec3, cf_grid
from optics.photometry import IlluminanceMap, calibrate_flux, illuminance_map
from optics.propagation import ChannelModel

from .config import ScenarioConfig
from .grid_output import SummaryBlock, ensure_directory, write_grid_csv, write_summary
from .loader import ScenarioError

logger = logging.getLogger(__name__)

COMMANDS = ('illumination', 'snr', 'sinr', 'gain', 'report')
# Minimum illuminance counted as covered on the lux map
LUX_REQUIREMENT = 300.0


class InvalidCombinationError(ScenarioError):
    code = 'E_SCENARIO'


@dataclass
class RunResult:
    command: str
    files: List[Path] = field(default_factory=list)
    blocks: List[SummaryBlock] = field(default_factory=list)
    luminous_flux: Optional[float] = None
    probe: Optional[AdrEvaluation] = None


def resolve_threads(threads: Optional[int] = None) -> int:
    if threads is None:
        threads = settings.OWC_THREADS
    if threads <= 0:
        threads = os.cpu_count() or 1
    return threads


def map_filename(scenario: CoexistenceScenario, combining: str) -> str:
    prefix = 'sinr' if scenario.has_interference else 'snr'
    return f"{prefix}_{scenario.label}_{combining}.csv"


def gain_filename(scenario: CoexistenceScenario) -> str:
    prefix = 'sinr' if scenario.has_interference else 'snr'
    return f"gain_{prefix}_{scenario.label}.csv"


class SimulationRun:
    """Lazily built simulation state for one scenario configuration."""

    def __init__(
        self,
        config: ScenarioConfig,
        threads: Optional[int] = None,
        model: Optional[ChannelModel] = None,
    ):
        self.config = config
        self.threads = resolve_threads(threads)
        if model is not None:
            self.model = model

    @cached_property
    def luminous_flux(self) -> float:
        if self.config.needs_calibration:
            return self.calibrate(self.config.illumination.target_min_lux)
        return self.config.illumination.luminous_flux

    def calibrate(self, target_min: float) -> float:
        light = self.config.illumination
        return calibrate_flux(
            build_layout(self.config, luminous_flux=1.0),
            self.config.room,
            target_min,
            step=self.config.sweep.grid_step,
            include_reflections=light.include_reflections,
            model=self.model,
        )

    @cached_property
    def layout(self) -> SystemLayout:
        return build_layout(self.config, luminous_flux=self.luminous_flux)

    @cached_property
    def grid(self) -> FloorGrid:
        return cf_grid(self.config.room, self.config.sweep.grid_step)

    @cached_property
    def model(self) -> ChannelModel:
        return ChannelModel(self.config.room, self.config.discretization, self.config.max_reflection_order)

    @cached_property
    def systems(self) -> Dict[str, CellSystem]:
        return {
            system.value: CellSystem(
                id=system.value,
                sources=self.layout.sources_for(system),
                noise=self.config.systems[system.value].noise,
            )
            for system in CELL_SYSTEMS
        }

    @cached_property
    def simulator(self) -> CoexistenceSimulator:
        background = ()
        if self.config.illumination.background_noise:
            background = merge_coincident(self.layout.illumination)
        return CoexistenceSimulator(
            model=self.model,
            receiver=self.config.receiver.build(Vec3(0.0, 0.0, self.config.room.comm_floor_z)),
            systems=self.systems,
            background_sources=background,
            threads=self.threads,
        )

    def scenario(self, serving: str, interfering: Sequence[str] = (), intra: Optional[bool] = None) -> CoexistenceScenario:
        if intra is None:
            intra = self.config.sweep.intra_system_interference
        try:
            return CoexistenceScenario(
                serving=self.systems[serving],
                interfering=tuple(self.systems[s] for s in interfering),
                intra_system_interference=intra,
            )
        except ValueError as exc:
            raise InvalidCombinationError(str(exc))

    def illumination(self) -> IlluminanceMap:
        light = self.config.illumination
        return illuminance_map(
            self.layout,
            self.config.room,
            self.config.sweep.grid_step,
            include_reflections=light.include_reflections,
            model=self.model,
        )

    @property
    def threshold_db(self) -> float:
        return 10.0 * math.log10(sinr_threshold_for_ber(self.config.sweep.target_ber))

    def link_block(self, name: str, grid: ScalarGrid, scenario: CoexistenceScenario) -> SummaryBlock:
        summary = summarize(grid, threshold=self.threshold_db)
        bandwidth = scenario.serving.noise.bandwidth
        sweep = self.config.sweep

        def rate(db: float) -> float:
            return max_rate_at_ber(10.0 ** (db / 10.0), bandwidth, sweep.target_ber, sweep.spectral_efficiency)

        notes = (
            f"rate at best point: {rate(summary.maximum) / 1e6:.1f} Mbit/s",
            f"rate at worst point: {rate(summary.minimum) / 1e6:.1f} Mbit/s",
        )
        return SummaryBlock(name=name, summary=summary, notes=notes)


def _write_map(run: SimulationRun, result: RunResult, out: Path, scenario: CoexistenceScenario, combining: str) -> None:
    grid = run.simulator.sweep_map(scenario, run.grid, combining)
    name = map_filename(scenario, combining)
    result.files.append(write_grid_csv(grid, out / name))
    result.blocks.append(run.link_block(name, grid, scenario))


def _write_gain(run: SimulationRun, result: RunResult, out: Path, scenario: CoexistenceScenario) -> None:
    grid = run.simulator.gain_map(scenario, run.grid)
    name = gain_filename(scenario)
    result.files.append(write_grid_csv(grid, out / name))
    result.blocks.append(SummaryBlock(name=name, summary=summarize(grid)))


def _write_illumination(run: SimulationRun, result: RunResult, out: Path) -> None:
    lux = run.illumination()
    name = 'illumination_lux.csv'
    result.files.append(write_grid_csv(lux.grid, out / name))
    result.blocks.append(SummaryBlock(
        name=name,
        summary=summarize(lux.grid, threshold=LUX_REQUIREMENT),
        notes=(f"luminous flux per LD: {run.luminous_flux:.6g} lm",),
    ))


def _interference_sets(serving: str) -> List[Tuple[str, ...]]:
    others = [s.value for s in CELL_SYSTEMS if s.value != serving]
    return [()] + [(other,) for other in others] + [tuple(others)]


def run_command(
    command: str,
    config: ScenarioConfig,
    *,
    out_dir: Optional[Path] = None,
    threads: Optional[int] = None,
    calibrate_target: Optional[float] = None,
    probe: Optional[Tuple[float, float]] = None,
) -> RunResult:
    """
    Execute one simulator command and write its grid files and ``<command>_summary.txt``.

    Raises:
        ValueError: for an unknown command
        InvalidCombinationError: for serving/interfering combinations that cannot be simulated
        OutputError: if the output directory or files cannot be written
        ZeroCoverageError: if illumination calibration finds an unlit floor
    """
    if command not in COMMANDS:
        raise ValueError(f"Unknown command '{command}'")
    out = ensure_directory(out_dir or config.output_dir)
    run = SimulationRun(config, threads)
    if calibrate_target is not None:
        config = config.with_luminous_flux(run.calibrate(calibrate_target))
        run = SimulationRun(config, threads, model=run.model)
    result = RunResult(command=command)
    sweep = config.sweep
    logger.info(f"Running '{command}' into {out}")

    if command == 'illumination':
        _write_illumination(run, result, out)
    elif command in ('snr', 'sinr', 'gain'):
        interfering = () if command == 'snr' else sweep.interfering
        scenario = run.scenario(sweep.serving, interfering, intra=False if command == 'snr' else None)
        if command == 'sinr' and not scenario.has_interference:
            raise InvalidCombinationError(
                "The sinr command needs at least one interfering system (--interfering)"
            )
        if command == 'gain':
            _write_gain(run, result, out, scenario)
        else:
            _write_map(run, result, out, scenario, sweep.combining)
        if probe is not None:
            x, y = probe
            result.probe = run.simulator.evaluate_point(scenario, Vec3(x, y, config.room.comm_floor_z))
    else:
        _write_illumination(run, result, out)
        for serving in CELL_SYSTEMS:
            for interfering in _interference_sets(serving.value):
                scenario = run.scenario(serving.value, interfering)
                for combining in Combining.values:
                    _write_map(run, result, out, scenario, combining)
                _write_gain(run, result, out, scenario)

    result.luminous_flux = run.luminous_flux
    summary_path = write_summary(
        out / f"{command}_summary.txt",
        result.blocks,
        header=f"# owc-cellsim {command}\nluminous flux per LD: {run.luminous_flux:.6g} lm",
    )
    result.files.append(summary_path)
    logger.info(f"'{command}' wrote {len(result.files)} files")
    return result

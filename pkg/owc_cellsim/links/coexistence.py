"""
Co-existence sweeps: serving-source selection, interference sets and SNR/SINR/gain maps
over the communication floor.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from links.receiver import (
    ADR_BRANCHES,
    AdrEvaluation,
    AngleDiversityReceiver,
    Combining,
    NoiseParams,
    branch_link_arrays,
    evaluate_adr,
)
from optics.emitters import LambertianSource
from optics.geometry import FloorGrid, ScalarGrid, Vec3
from optics.propagation import ChannelModel

logger = logging.getLogger(__name__)

__all__ = [
    'CellSystem', 'CoexistenceScenario', 'CoexistenceSimulator', 'GridSummary', 'ScalarGrid',
    'ServingChoice', 'SinrMaps', 'summarize', 'to_db',
]

DB_FLOOR = -200.0
# Relative margin within which two serving candidates count as tied
TIE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class CellSystem:
    id: str
    sources: Tuple[LambertianSource, ...]
    noise: NoiseParams

    def __post_init__(self):
        if not self.sources:
            raise ValueError(f"Cell system '{self.id}' has no sources")


@dataclass(frozen=True)
class CoexistenceScenario:
    serving: CellSystem
    interfering: Tuple[CellSystem, ...] = ()
    intra_system_interference: bool = False

    def __post_init__(self):
        ids = [system.id for system in self.interfering]
        if self.serving.id in ids:
            raise ValueError(f"Serving system '{self.serving.id}' cannot also interfere")
        if len(set(ids)) != len(ids):
            raise ValueError("Each interfering system may appear only once")

    @property
    def has_interference(self) -> bool:
        return bool(self.interfering) or self.intra_system_interference

    @property
    def label(self) -> str:
        parts = [s.id for s in self.interfering]
        if self.intra_system_interference:
            parts.append('intra')
        if not parts:
            return self.serving.id
        return f"{self.serving.id}_vs_{'+'.join(parts)}"


@dataclass(frozen=True)
class ServingChoice:
    source: LambertianSource
    index: int
    powered: bool


@dataclass(frozen=True)
class SinrMaps:
    """Linear combined SINR per grid point (SNR when the scenario has no interference)."""
    grid: FloorGrid
    sc: np.ndarray
    mrc: np.ndarray
    serving_index: np.ndarray


@dataclass(frozen=True)
class GridSummary:
    quantity: str
    minimum: float
    maximum: float
    mean: float
    argmin: Vec3
    argmax: Vec3
    threshold: Optional[float] = None
    coverage: Optional[float] = None


def to_db(values) -> np.ndarray:
    """10*log10 of linear values, floored at DB_FLOOR so zero power stays finite."""
    values = np.asarray(values, dtype=float)
    with np.errstate(divide='ignore'):
        db = np.where(values > 0, 10.0 * np.log10(np.where(values > 0, values, 1.0)), DB_FLOOR)
    return np.maximum(db, DB_FLOOR)


def _pick_serving(totals: np.ndarray) -> Tuple[int, bool]:
    best = float(totals.max())
    if best <= 0.0:
        return 0, False
    candidates = np.flatnonzero(totals >= best * (1.0 - TIE_TOLERANCE))
    return int(candidates[0]), True


class CoexistenceSimulator:
    """
    Evaluates co-existence scenarios on a fixed room, receiver and set of cell systems.

    Received power for every source into every ADR branch is computed once per grid and
    reused by all scenarios; grid points are farmed out to a thread pool and results come
    back in grid order.
    """

    def __init__(
        self,
        model: ChannelModel,
        receiver: AngleDiversityReceiver,
        systems: Mapping[str, CellSystem],
        background_sources: Sequence[LambertianSource] = (),
        threads: int = 1,
    ):
        self.model = model
        self.receiver = receiver
        self.systems = dict(systems)
        self.background_sources = tuple(background_sources)
        self.threads = max(1, threads)

        unique: Dict[LambertianSource, int] = {}
        for system in self.systems.values():
            for source in system.sources:
                unique.setdefault(source, len(unique))
        for source in self.background_sources:
            unique.setdefault(source, len(unique))
        self._sources: Tuple[LambertianSource, ...] = tuple(unique)
        self._index = unique
        self._tensors: Dict[FloorGrid, np.ndarray] = {}

    def _indices(self, sources: Sequence[LambertianSource]) -> np.ndarray:
        try:
            return np.array([self._index[s] for s in sources], dtype=int)
        except KeyError as exc:
            raise ValueError("Source is not part of the simulated systems") from exc

    def _point_powers(self, position: Vec3) -> np.ndarray:
        apertures = self.receiver.at(position).apertures()
        return self.model.power_components(self._sources, apertures).total

    def power_tensor(self, grid: FloorGrid) -> np.ndarray:
        """(N, U, 7) total received power per grid point, source and ADR branch."""
        tensor = self._tensors.get(grid)
        if tensor is not None:
            return tensor
        self.model.prepare(self._sources)
        logger.info(
            f"Sweeping {len(grid)} points x {len(self._sources)} sources on {self.threads} thread(s)"
        )
        rows: List[np.ndarray] = Parallel(n_jobs=self.threads, prefer='threads')(
            delayed(self._point_powers)(p) for p in grid.points
        )
        tensor = np.stack(rows).reshape(len(grid), len(self._sources), ADR_BRANCHES)
        self._tensors[grid] = tensor
        return tensor

    def serving_source(self, system: CellSystem, receiver_pos: Vec3) -> ServingChoice:
        """Source of ``system`` delivering the most power summed over the ADR branches."""
        powers = self._point_powers(receiver_pos)[self._indices(system.sources)]
        index, powered = _pick_serving(np.einsum('sb->s', powers))
        if not powered:
            logger.warning(f"No source of '{system.id}' reaches {receiver_pos.as_tuple()}")
        return ServingChoice(source=system.sources[index], index=index, powered=powered)

    def _group_sources(self, scenario: CoexistenceScenario) -> List[Tuple[LambertianSource, ...]]:
        return [system.sources for system in scenario.interfering]

    def sweep(self, scenario: CoexistenceScenario, grid: FloorGrid) -> SinrMaps:
        tensor = self.power_tensor(grid)
        serving_idx = self._indices(scenario.serving.sources)
        serving_all = tensor[:, serving_idx, :]

        chosen = np.array(
            [_pick_serving(np.einsum('sb->s', serving_all[n]))[0] for n in range(len(grid))],
            dtype=int,
        )
        points = np.arange(len(grid))
        serving = serving_all[points, chosen, :]

        groups = [np.einsum('nsb->nb', tensor[:, self._indices(g), :]) for g in self._group_sources(scenario)]
        if scenario.intra_system_interference:
            others = np.ones(serving_all.shape[:2])
            others[points, chosen] = 0.0
            groups.append(np.einsum('nsb,ns->nb', serving_all, others))
        interfering = np.array(groups).reshape(len(groups), len(grid), ADR_BRANCHES)

        background = np.zeros_like(serving)
        if self.background_sources:
            background = np.einsum('nsb->nb', tensor[:, self._indices(self.background_sources), :])

        _, sinr, _ = branch_link_arrays(
            serving, interfering, background, scenario.serving.noise, self.receiver.responsivities,
        )
        sc = np.max(sinr, axis=1)
        mrc = np.einsum('nb->n', sinr)
        unpowered = int(np.count_nonzero(np.einsum('nb->n', serving) <= 0.0))
        if unpowered:
            logger.warning(f"{unpowered} grid points receive no power from '{scenario.serving.id}'")
        return SinrMaps(grid=grid, sc=sc, mrc=mrc, serving_index=chosen)

    def sweep_map(self, scenario: CoexistenceScenario, grid: FloorGrid, combining: str) -> ScalarGrid:
        maps = self.sweep(scenario, grid)
        linear = maps.mrc if Combining(combining) == Combining.MRC else maps.sc
        quantity = 'sinr_db' if scenario.has_interference else 'snr_db'
        return ScalarGrid.from_values(grid, to_db(linear), quantity)

    def gain_map(self, scenario: CoexistenceScenario, grid: FloorGrid) -> ScalarGrid:
        """Pointwise MRC minus SC in dB; zero where neither combiner sees any signal."""
        maps = self.sweep(scenario, grid)
        positive = maps.sc > 0
        ratio = np.where(positive, maps.mrc / np.where(positive, maps.sc, 1.0), 1.0)
        return ScalarGrid.from_values(grid, 10.0 * np.log10(ratio), 'gain_db')

    def evaluate_point(self, scenario: CoexistenceScenario, position: Vec3) -> AdrEvaluation:
        """Full per-branch breakdown at one receiver position."""
        choice = self.serving_source(scenario.serving, position)
        groups = list(self._group_sources(scenario))
        if scenario.intra_system_interference:
            groups.append(tuple(s for i, s in enumerate(scenario.serving.sources) if i != choice.index))
        return evaluate_adr(
            self.receiver.at(position),
            (choice.source,),
            groups,
            self.model,
            scenario.serving.noise,
            background_sources=self.background_sources,
        )


def summarize(grid: ScalarGrid, threshold: Optional[float] = None) -> GridSummary:
    """Min, max, mean and, with a threshold, the percentage of points at or above it."""
    values = np.asarray(grid.values, dtype=float)
    coverage = None
    if threshold is not None:
        coverage = 100.0 * float(np.count_nonzero(values >= threshold)) / len(values)
    return GridSummary(
        quantity=grid.quantity,
        minimum=float(values.min()),
        maximum=float(values.max()),
        mean=math.fsum(values) / len(values),
        argmin=grid.position(int(np.argmin(values))),
        argmax=grid.position(int(np.argmax(values))),
        threshold=threshold,
        coverage=coverage,
    )

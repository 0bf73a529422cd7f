"""
Illuminance on the communication floor from the illumination units.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from optics.emitters import LambertianSource, SystemLayout, merge_coincident
from optics.geometry import FloorGrid, Room, ScalarGrid, Vec3, cf_grid, stack_vectors
from optics.propagation import ChannelModel, ReceiverAperture

logger = logging.getLogger(__name__)

UP = Vec3(0.0, 0.0, 1.0)
# Points evaluated per reflected-illuminance batch
_BATCH = 64


class ZeroCoverageError(ValueError):
    """The illumination layout leaves the whole floor dark, so no flux can meet a target."""


@dataclass(frozen=True)
class IlluminanceMap:
    grid: ScalarGrid
    min_lux: float
    max_lux: float

    def __post_init__(self):
        if self.min_lux > self.max_lux:
            raise ValueError("min_lux exceeds max_lux")


def _los_illuminance(points: np.ndarray, sources: Sequence[LambertianSource]) -> np.ndarray:
    """(N,) LOS illuminance on horizontal up-facing patches at ``points``."""
    lux = np.zeros(len(points))
    if not sources:
        return lux
    positions = stack_vectors([s.position for s in sources])
    orientations = stack_vectors([s.orientation for s in sources])
    orders = np.array([s.order_n for s in sources])
    flux = np.array([s.luminous_flux for s in sources])

    d = points[:, None, :] - positions[None, :, :]
    dist = np.sqrt(np.einsum('nsk,nsk->ns', d, d))
    dist = np.where(dist > 0.0, dist, np.inf)
    cos_phi = np.einsum('nsk,sk->ns', d, orientations) / dist
    cos_theta = -d[:, :, 2] / dist
    visible = (cos_phi > 0.0) & (cos_theta > 0.0)
    intensity = (orders + 1.0) * flux / (2.0 * math.pi) * np.where(visible, cos_phi, 0.0) ** orders
    contributions = np.where(visible, intensity * cos_theta / dist ** 2, 0.0)
    return np.einsum('ns->n', contributions)


def illuminance_at(point: Vec3, sources: Sequence[LambertianSource]) -> float:
    """LOS illuminance (lx) at ``point`` on a horizontal surface facing up."""
    return float(_los_illuminance(point.as_array()[None, :], sources)[0])


def _reflected_illuminance(
    grid: FloorGrid,
    sources: Sequence[LambertianSource],
    model: ChannelModel,
) -> np.ndarray:
    photometric = tuple(
        replace(s, optical_power=s.luminous_flux) for s in merge_coincident(sources, power='luminous_flux')
    )
    model.prepare(photometric)
    lux = np.zeros(len(grid))
    for start in range(0, len(grid), _BATCH):
        apertures = [
            ReceiverAperture(position=p, orientation=UP, fov=90.0, area=1.0)
            for p in grid.points[start:start + _BATCH]
        ]
        budget = model.power_components(photometric, apertures)
        reflected = budget.first_order + budget.second_order
        lux[start:start + len(apertures)] = np.einsum('sb->b', reflected)
    return lux


def illuminance_map(
    layout: SystemLayout,
    room: Room,
    step: float = 0.25,
    include_reflections: bool = False,
    model: Optional[ChannelModel] = None,
) -> IlluminanceMap:
    """
    Illuminance over the communication floor grid.

    Args:
        layout: sources; only the illumination LDs contribute
        room: room whose communication floor is evaluated
        step: grid spacing in metres
        include_reflections: add reflected illuminance up to the model's reflection order
        model: channel model of ``room``; required with ``include_reflections``
    """
    grid = cf_grid(room, step)
    points = stack_vectors(grid.points)
    lux = _los_illuminance(points, layout.illumination)
    if include_reflections:
        if model is None:
            raise ValueError("A channel model is required for reflected illuminance")
        if model.room != room:
            raise ValueError("The channel model belongs to a different room")
        if model.max_order > 0:
            lux = lux + _reflected_illuminance(grid, layout.illumination, model)
    scalar = ScalarGrid.from_values(grid, lux, 'lux')
    result = IlluminanceMap(grid=scalar, min_lux=float(lux.min()), max_lux=float(lux.max()))
    logger.debug(f"Illuminance map {grid.nx}x{grid.ny}: min {result.min_lux:.1f} lx, max {result.max_lux:.1f} lx")
    return result


def calibrate_flux(
    layout: SystemLayout,
    room: Room,
    target_min: float,
    step: float = 0.25,
    include_reflections: bool = False,
    model: Optional[ChannelModel] = None,
) -> float:
    """
    Per-LD luminous flux (lm) that brings the minimum of the floor illuminance to ``target_min``.

    Illuminance is linear in flux, so a single unit-flux map is enough.

    Raises:
        ValueError: if ``target_min`` is not positive
        ZeroCoverageError: if the unit-flux map has a zero minimum
    """
    if target_min <= 0:
        raise ValueError(f"Target illuminance must be positive, got {target_min}")
    unit = illuminance_map(
        layout.with_luminous_flux(1.0), room, step,
        include_reflections=include_reflections, model=model,
    )
    if unit.min_lux <= 0.0:
        raise ZeroCoverageError("Illumination layout leaves part of the floor unlit; cannot calibrate")
    flux = target_min / unit.min_lux
    logger.info(
        f"Calibrated flux {flux:.4f} lm per LD for {target_min} lx minimum "
        f"(max {unit.max_lux * flux:.1f} lx)"
    )
    return flux

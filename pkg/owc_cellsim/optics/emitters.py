"""
Optical sources: the Micro-cell infrared transmitter, the angle diversity transmitter (ADT)
units carrying the Pico and Atto branches, and the RYGB illumination units.
"""
from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Dict, Optional, Sequence, Tuple

from django.db import models

from optics.geometry import Vec3, az_el_to_direction

if TYPE_CHECKING:
    from scenarios.config import ScenarioConfig

logger = logging.getLogger(__name__)

DOWN = Vec3(0.0, 0.0, -1.0)


class SystemId(models.TextChoices):
    MICRO = 'micro', 'Micro cell (infrared)'
    PICO = 'pico', 'Pico cell (ADT down branch)'
    ATTO = 'atto', 'Atto cell (ADT side branches)'
    ILLUMINATION = 'illumination', 'Illumination'


CELL_SYSTEMS = (SystemId.MICRO, SystemId.PICO, SystemId.ATTO)


@dataclass(frozen=True)
class LambertianSource:
    position: Vec3
    orientation: Vec3
    order_n: float
    optical_power: float
    luminous_flux: float = 0.0
    system_id: str = SystemId.MICRO
    label: str = ''

    def __post_init__(self):
        if self.order_n <= 0:
            raise ValueError(f"Lambertian order must be positive, got {self.order_n}")
        if self.optical_power < 0 or self.luminous_flux < 0:
            raise ValueError("Source power and flux must be non-negative")


@dataclass(frozen=True)
class AdtUnit:
    position: Vec3
    branches: Tuple[LambertianSource, ...]

    def __post_init__(self):
        if len(self.branches) != 5:
            raise ValueError(f"An ADT unit has 5 branches, got {len(self.branches)}")
        if self.branches[0].orientation != DOWN:
            raise ValueError("The first ADT branch must face straight down")

    @property
    def down_branch(self) -> LambertianSource:
        return self.branches[0]

    @property
    def side_branches(self) -> Tuple[LambertianSource, ...]:
        return self.branches[1:]


@dataclass(frozen=True)
class SystemLayout:
    micro: Tuple[LambertianSource, ...]
    pico: Tuple[LambertianSource, ...]
    atto: Tuple[LambertianSource, ...]
    illumination: Tuple[LambertianSource, ...]
    adt_units: Tuple[AdtUnit, ...] = ()

    def sources_for(self, system_id: str) -> Tuple[LambertianSource, ...]:
        return {
            SystemId.MICRO: self.micro,
            SystemId.PICO: self.pico,
            SystemId.ATTO: self.atto,
            SystemId.ILLUMINATION: self.illumination,
        }[SystemId(system_id)]

    def all_sources(self) -> Tuple[LambertianSource, ...]:
        return self.micro + self.pico + self.atto + self.illumination

    def with_luminous_flux(self, flux: float) -> SystemLayout:
        """Same layout with every illumination LD set to ``flux`` lumens."""
        return replace(
            self,
            illumination=tuple(replace(s, luminous_flux=flux) for s in self.illumination),
        )


def lambertian_order(semi_angle: float) -> float:
    """
    Lambertian order whose radiant intensity halves at ``semi_angle`` degrees.

    Raises:
        ValueError: unless 0 < semi_angle < 90
    """
    if not 0.0 < semi_angle < 90.0:
        raise ValueError(f"Semi-angle must lie in (0, 90) degrees, got {semi_angle}")
    return -math.log(2.0) / math.log(math.cos(math.radians(semi_angle)))


def radiant_intensity(src: LambertianSource, direction: Vec3) -> float:
    """Radiant intensity (W/sr) of ``src`` along a unit ``direction``."""
    cos_phi = src.orientation.dot(direction)
    if cos_phi <= 0.0:
        return 0.0
    return src.optical_power * (src.order_n + 1) / (2 * math.pi) * cos_phi ** src.order_n


def merge_coincident(sources: Sequence[LambertianSource], power: str = 'optical_power') -> Tuple[LambertianSource, ...]:
    """
    Collapse identical sources into one carrying their combined output.

    ``power`` names the field that gets scaled (``optical_power`` or ``luminous_flux``).
    """
    counts = Counter(sources)
    return tuple(replace(s, **{power: getattr(s, power) * count}) for s, count in counts.items())


def build_adt_unit(
    position: Vec3,
    pico_order: float,
    atto_order: float,
    atto_elevation: float,
    atto_azimuths: Tuple[float, ...],
    pico_power: float,
    atto_power: float,
    label: str = '',
) -> AdtUnit:
    down = LambertianSource(
        position=position,
        orientation=DOWN,
        order_n=pico_order,
        optical_power=pico_power,
        system_id=SystemId.PICO,
        label=f"{label}/down",
    )
    sides = tuple(
        LambertianSource(
            position=position,
            orientation=az_el_to_direction(az, atto_elevation),
            order_n=atto_order,
            optical_power=atto_power,
            system_id=SystemId.ATTO,
            label=f"{label}/az{az:g}",
        )
        for az in atto_azimuths
    )
    return AdtUnit(position=position, branches=(down,) + sides)


def build_layout(config: ScenarioConfig, luminous_flux: Optional[float] = None) -> SystemLayout:
    """
    Build every source of the co-existence scenario from a scenario configuration.

    Args:
        config: validated scenario configuration
        luminous_flux: per-LD flux override in lumens; defaults to the configured flux, or
            1 lm when the configuration asks for calibration

    Returns:
        SystemLayout with 1 Micro, 8 Pico, 32 Atto and 40 illumination sources for the
        default office scenario
    """
    layout = config.layout
    powers: Dict[str, float] = {key: s.optical_power for key, s in config.systems.items()}

    if luminous_flux is None:
        luminous_flux = config.illumination.luminous_flux
    if luminous_flux is None:
        luminous_flux = 1.0

    micro = LambertianSource(
        position=layout.micro_position,
        orientation=DOWN,
        order_n=lambertian_order(layout.micro_semi_angle),
        optical_power=powers[SystemId.MICRO],
        system_id=SystemId.MICRO,
        label='micro',
    )

    pico_order = lambertian_order(layout.pico_semi_angle)
    atto_order = lambertian_order(layout.atto_semi_angle)
    units = tuple(
        build_adt_unit(
            position,
            pico_order=pico_order,
            atto_order=atto_order,
            atto_elevation=layout.atto_elevation,
            atto_azimuths=layout.atto_azimuths,
            pico_power=powers[SystemId.PICO],
            atto_power=powers[SystemId.ATTO],
            label=f"adt{i + 1}",
        )
        for i, position in enumerate(layout.adt_positions)
    )

    illumination_order = lambertian_order(layout.illumination_semi_angle)
    illumination = tuple(
        LambertianSource(
            position=position,
            orientation=DOWN,
            order_n=illumination_order,
            optical_power=config.illumination.optical_power,
            luminous_flux=luminous_flux,
            system_id=SystemId.ILLUMINATION,
            label=f"lamp{i + 1}",
        )
        for i, position in enumerate(layout.illumination_positions)
        for _ in range(layout.leds_per_unit)
    )

    result = SystemLayout(
        micro=(micro,),
        pico=tuple(unit.down_branch for unit in units),
        atto=tuple(branch for unit in units for branch in unit.side_branches),
        illumination=illumination,
        adt_units=units,
    )
    logger.info(
        f"Built layout: {len(result.micro)} micro, {len(result.pico)} pico, "
        f"{len(result.atto)} atto, {len(result.illumination)} illumination sources"
    )
    return result

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

from links.receiver import AngleDiversityReceiver, NoiseParams
from optics.geometry import DiscretizationPolicy, Room, Vec3


@dataclass(frozen=True)
class SystemSettings:
    optical_power: float
    bandwidth: float
    preamp_noise_density: float
    background_current: float = 0.0

    @property
    def noise(self) -> NoiseParams:
        return NoiseParams(
            bandwidth=self.bandwidth,
            preamp_noise_density=self.preamp_noise_density,
            background_current=self.background_current,
        )


@dataclass(frozen=True)
class LayoutSettings:
    micro_position: Vec3
    micro_semi_angle: float
    adt_positions: Tuple[Vec3, ...]
    pico_semi_angle: float
    atto_semi_angle: float
    atto_elevation: float
    atto_azimuths: Tuple[float, ...]
    illumination_positions: Tuple[Vec3, ...]
    leds_per_unit: int
    illumination_semi_angle: float


@dataclass(frozen=True)
class IlluminationSettings:
    # None means "calibrate to target_min_lux"
    luminous_flux: Optional[float]
    target_min_lux: float
    optical_power: float
    include_reflections: bool = True
    background_noise: bool = True


@dataclass(frozen=True)
class ReceiverSettings:
    area: float
    responsivity: float
    side_elevation: float
    side_fov: float
    side_azimuths: Tuple[float, ...]
    top_fov: float

    def build(self, position: Vec3) -> AngleDiversityReceiver:
        return AngleDiversityReceiver.build(
            position,
            side_elevation=self.side_elevation,
            side_fov=self.side_fov,
            side_azimuths=self.side_azimuths,
            top_fov=self.top_fov,
            area=self.area,
            responsivity=self.responsivity,
        )


@dataclass(frozen=True)
class SweepSettings:
    grid_step: float
    combining: str
    serving: str
    interfering: Tuple[str, ...] = ()
    intra_system_interference: bool = False
    spectral_efficiency: float = 1.0
    target_ber: float = 1e-9


@dataclass(frozen=True)
class ScenarioConfig:
    room: Room
    discretization: DiscretizationPolicy
    max_reflection_order: int
    layout: LayoutSettings
    systems: Dict[str, SystemSettings] = field(hash=False)
    illumination: IlluminationSettings
    receiver: ReceiverSettings
    sweep: SweepSettings
    output_dir: str = ''

    @property
    def needs_calibration(self) -> bool:
        return self.illumination.luminous_flux is None

    def with_luminous_flux(self, flux: float) -> ScenarioConfig:
        return replace(self, illumination=replace(self.illumination, luminous_flux=flux))

    def with_sweep(self, **changes) -> ScenarioConfig:
        return replace(self, sweep=replace(self.sweep, **changes))

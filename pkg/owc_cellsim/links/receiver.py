"""
Angle diversity receiver (ADR), noise model and the OOK link equations.

BER = Q(sqrt(SINR)) with Q(x) = erfc(x / sqrt 2) / 2, SINR per branch from the OOK signal
swing over total noise plus interference, and selection (SC) or maximum ratio (MRC)
combining across the seven branches.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Sequence, Tuple

import numpy as np
from django.db import models
from scipy import special

from optics.emitters import LambertianSource
from optics.geometry import Vec3, az_el_to_direction
from optics.propagation import ChannelModel, ReceiverAperture

logger = logging.getLogger(__name__)

ELECTRON_CHARGE = 1.602176634e-19
ADR_BRANCHES = 7


class Combining(models.TextChoices):
    SC = 'sc', 'Selection combining'
    MRC = 'mrc', 'Maximum ratio combining'


@dataclass(frozen=True)
class ReceiverBranch:
    azimuth: float
    elevation: float
    fov: float
    area: float
    responsivity: float

    @property
    def direction(self) -> Vec3:
        return az_el_to_direction(self.azimuth, self.elevation)

    def aperture(self, position: Vec3) -> ReceiverAperture:
        return ReceiverAperture(position=position, orientation=self.direction, fov=self.fov, area=self.area)


@dataclass(frozen=True)
class AngleDiversityReceiver:
    position: Vec3
    branches: Tuple[ReceiverBranch, ...]

    def __post_init__(self):
        if len(self.branches) != ADR_BRANCHES:
            raise ValueError(f"An ADR has {ADR_BRANCHES} branches, got {len(self.branches)}")

    @classmethod
    def build(
        cls,
        position: Vec3,
        side_elevation: float = 40.0,
        side_fov: float = 25.0,
        side_azimuths: Sequence[float] = (0.0, 60.0, 120.0, 180.0, 240.0, 300.0),
        top_fov: float = 30.0,
        area: float = 4e-6,
        responsivity: float = 0.4,
    ) -> AngleDiversityReceiver:
        """Six tilted side detectors followed by one detector facing straight up."""
        sides = tuple(
            ReceiverBranch(az, side_elevation, side_fov, area, responsivity) for az in side_azimuths
        )
        top = ReceiverBranch(0.0, 90.0, top_fov, area, responsivity)
        return cls(position=position, branches=sides + (top,))

    def at(self, position: Vec3) -> AngleDiversityReceiver:
        return replace(self, position=position)

    def apertures(self) -> Tuple[ReceiverAperture, ...]:
        return tuple(branch.aperture(self.position) for branch in self.branches)

    @property
    def responsivities(self) -> np.ndarray:
        return np.array([b.responsivity for b in self.branches], dtype=float)


@dataclass(frozen=True)
class NoiseParams:
    bandwidth: float
    preamp_noise_density: float
    background_current: float = 0.0

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ValueError(f"Bandwidth must be positive, got {self.bandwidth}")
        if self.preamp_noise_density < 0 or self.background_current < 0:
            raise ValueError("Noise density and background current must be non-negative")


@dataclass(frozen=True)
class OokSignal:
    p1: float
    p0: float = 0.0

    def __post_init__(self):
        if not self.p1 >= self.p0 >= 0.0:
            raise ValueError(f"OOK levels must satisfy p1 >= p0 >= 0, got ({self.p1}, {self.p0})")

    @classmethod
    def from_average(cls, power: float) -> OokSignal:
        """Ideal-extinction OOK carrying ``power`` on average."""
        return cls(p1=2.0 * power, p0=0.0)

    @property
    def swing(self) -> float:
        return self.p1 - self.p0


@dataclass(frozen=True)
class BranchMetrics:
    snr: float
    sinr: float
    signal: OokSignal
    interferers: Tuple[OokSignal, ...]
    sigma_total: float


@dataclass(frozen=True)
class AdrEvaluation:
    sc_sinr: float
    mrc_sinr: float
    branches: Tuple[BranchMetrics, ...]

    @property
    def sc_snr(self) -> float:
        return combine_sc([b.snr for b in self.branches])

    @property
    def mrc_snr(self) -> float:
        return combine_mrc([b.snr for b in self.branches])


def q_function(x):
    """Gaussian tail probability, evaluated exactly through erfc."""
    return special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0)) / 2.0


def inverse_q(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError(f"Probability must lie in (0, 1), got {p}")
    return float(math.sqrt(2.0) * special.erfcinv(2.0 * p))


def ber_from_sinr(sinr: float) -> float:
    if sinr < 0:
        raise ValueError(f"SINR must be non-negative, got {sinr}")
    return float(q_function(math.sqrt(sinr)))


def sinr_threshold_for_ber(target_ber: float) -> float:
    """Smallest linear SINR whose BER does not exceed ``target_ber``."""
    if not 0.0 < target_ber < 0.5:
        raise ValueError(f"Target BER must lie in (0, 0.5), got {target_ber}")
    return inverse_q(target_ber) ** 2


def noise_sigma(
    p_received: float,
    params: NoiseParams,
    responsivity: float,
    background_power: float = 0.0,
) -> float:
    """
    Total noise standard deviation (A): preamplifier, background shot and signal shot noise.

    ``background_power`` is ambient optical power on the detector; its photocurrent adds to
    the configured background current.
    """
    if p_received < 0 or background_power < 0:
        raise ValueError("Received powers must be non-negative")
    bandwidth = params.bandwidth
    preamp = params.preamp_noise_density ** 2 * bandwidth
    background = 2 * ELECTRON_CHARGE * (params.background_current + responsivity * background_power) * bandwidth
    signal = 2 * ELECTRON_CHARGE * responsivity * p_received * bandwidth
    return math.sqrt(preamp + background + signal)


def branch_sinr(
    signal: OokSignal,
    interferers: Sequence[OokSignal],
    sigma_total: float,
    responsivity: float,
) -> float:
    if sigma_total <= 0:
        raise ValueError("Total noise must be positive")
    numerator = (responsivity * signal.swing) ** 2
    interference = sum((responsivity * i.swing) ** 2 for i in interferers)
    return numerator / (sigma_total ** 2 + interference)


def combine_sc(branch_sinrs: Sequence[float]) -> float:
    if len(branch_sinrs) == 0:
        raise ValueError("Cannot combine an empty set of branches")
    return float(max(branch_sinrs))


def combine_mrc(branch_sinrs: Sequence[float]) -> float:
    if len(branch_sinrs) == 0:
        raise ValueError("Cannot combine an empty set of branches")
    return float(math.fsum(branch_sinrs))


def max_rate_at_ber(sinr: float, bandwidth: float, target_ber: float, efficiency: float = 1.0) -> float:
    """OOK data rate (bit/s) the link sustains at ``target_ber``; zero when the BER is missed."""
    if not 0.0 < target_ber < 0.5:
        raise ValueError(f"Target BER must lie in (0, 0.5), got {target_ber}")
    if sinr <= 0 or ber_from_sinr(sinr) > target_ber:
        return 0.0
    return efficiency * bandwidth


def branch_link_arrays(
    serving: np.ndarray,
    interfering: np.ndarray,
    background: np.ndarray,
    noise: NoiseParams,
    responsivity: np.ndarray,
):
    """
    Vectorized per-branch SNR and SINR.

    Args:
        serving: (..., B) average serving power per branch
        interfering: (G, ..., B) average power per interfering group and branch
        background: (..., B) ambient optical power per branch
        noise: receiver noise parameters
        responsivity: (B,) detector responsivity

    Returns:
        (snr, sinr, sigma_total) arrays shaped like ``serving``
    """
    p1 = 2.0 * serving
    bandwidth = noise.bandwidth
    variance = (
        noise.preamp_noise_density ** 2 * bandwidth
        + 2 * ELECTRON_CHARGE * (noise.background_current + responsivity * background) * bandwidth
        + 2 * ELECTRON_CHARGE * responsivity * p1 * bandwidth
    )
    signal = (responsivity * p1) ** 2
    interference = np.zeros_like(serving)
    for group in interfering:
        interference = interference + (responsivity * 2.0 * group) ** 2
    with np.errstate(divide='ignore', invalid='ignore'):
        snr = np.where(variance > 0, signal / variance, 0.0)
        total = variance + interference
        sinr = np.where(total > 0, signal / total, 0.0)
    return snr, sinr, np.sqrt(variance)


def evaluate_adr(
    receiver: AngleDiversityReceiver,
    serving_sources: Sequence[LambertianSource],
    interfering_groups: Sequence[Sequence[LambertianSource]],
    scene: ChannelModel,
    noise: NoiseParams,
    background_sources: Sequence[LambertianSource] = (),
) -> AdrEvaluation:
    """
    Per-branch link metrics at one receiver position, combined with SC and MRC.

    Each interfering group is one co-existing system; its sources are assumed to send a
    logic 1 together, so their powers add before entering the interference sum.
    """
    apertures = receiver.apertures()

    def branch_power(sources: Sequence[LambertianSource]) -> np.ndarray:
        if not sources:
            return np.zeros(len(apertures))
        return np.einsum('sb->b', scene.power_components(sources, apertures).total)

    serving = branch_power(serving_sources)
    interfering = np.array([branch_power(g) for g in interfering_groups]).reshape(-1, len(apertures))
    background = branch_power(background_sources)
    branches = []
    for b, branch in enumerate(receiver.branches):
        signal = OokSignal.from_average(float(serving[b]))
        interferers = tuple(OokSignal.from_average(float(g[b])) for g in interfering)
        sigma = noise_sigma(signal.p1, noise, branch.responsivity, background_power=float(background[b]))
        snr = sinr = 0.0
        if sigma > 0:
            snr = branch_sinr(signal, (), sigma, branch.responsivity)
            sinr = branch_sinr(signal, interferers, sigma, branch.responsivity)
        branches.append(BranchMetrics(snr=snr, sinr=sinr, signal=signal, interferers=interferers, sigma_total=sigma))
    if not np.any(serving > 0):
        logger.warning(f"No serving power reaches the receiver at {receiver.position.as_tuple()}")
    return AdrEvaluation(
        sc_sinr=combine_sc([m.sinr for m in branches]),
        mrc_sinr=combine_mrc([m.sinr for m in branches]),
        branches=tuple(branches),
    )

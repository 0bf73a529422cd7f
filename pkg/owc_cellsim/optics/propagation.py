"""
Optical channel: line-of-sight gain plus first- and second-order diffuse reflections.

Walls, floor and ceiling are divided into square Lambertian (order 1) reflecting elements.
First-order reflections use the fine element grid, second-order reflections the coarse one.
All array work goes through ``np.einsum`` without BLAS so repeated runs are bit-identical.
"""
from __future__ import annotations

import logging
import math
import threading
from collections import OrderedDict
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import List, Sequence, Tuple, Union

import numpy as np

from optics.emitters import LambertianSource
from optics.geometry import DiscretizationPolicy, Room, SurfaceElement, Vec3, discretize_room

logger = logging.getLogger(__name__)

Number = Union[float, np.ndarray]

# Rows of the element-to-element matrix built per block
_BLOCK_ROWS = 256
# Source sets whose reflection terms a ChannelModel keeps
SOURCE_CACHE_SIZE = 64


class CoincidentGeometryError(ValueError):
    """A source and a receiver occupy the same point."""


@dataclass(frozen=True)
class ReceiverAperture:
    position: Vec3
    orientation: Vec3
    fov: float
    area: float

    def __post_init__(self):
        if not 0.0 < self.fov <= 90.0:
            raise ValueError(f"Field of view must lie in (0, 90] degrees, got {self.fov}")
        if self.area <= 0:
            raise ValueError("Detector area must be positive")

    @property
    def cos_fov(self) -> float:
        return math.cos(math.radians(self.fov))


@dataclass(frozen=True)
class PathBudget:
    """Received power split by path; fields are floats or arrays of matching shape."""
    los: Number
    first_order: Number
    second_order: Number

    @property
    def total(self) -> Number:
        return self.los + self.first_order + self.second_order


@dataclass(frozen=True)
class SurfaceArrays:
    centres: np.ndarray
    normals: np.ndarray
    areas: np.ndarray
    reflectivity: np.ndarray

    @classmethod
    def from_elements(cls, elements: Sequence[SurfaceElement]) -> SurfaceArrays:
        return cls(
            centres=np.array([e.centre.as_tuple() for e in elements], dtype=float).reshape(-1, 3),
            normals=np.array([e.normal.as_tuple() for e in elements], dtype=float).reshape(-1, 3),
            areas=np.array([e.area for e in elements], dtype=float),
            reflectivity=np.array([e.reflectivity for e in elements], dtype=float),
        )

    def __len__(self) -> int:
        return len(self.areas)


def _source_arrays(sources: Sequence[LambertianSource]):
    positions = np.array([s.position.as_tuple() for s in sources], dtype=float).reshape(-1, 3)
    orientations = np.array([s.orientation.as_tuple() for s in sources], dtype=float).reshape(-1, 3)
    orders = np.array([s.order_n for s in sources], dtype=float)
    powers = np.array([s.optical_power for s in sources], dtype=float)
    return positions, orientations, orders, powers


def _aperture_arrays(apertures: Sequence[ReceiverAperture]):
    positions = np.array([a.position.as_tuple() for a in apertures], dtype=float).reshape(-1, 3)
    normals = np.array([a.orientation.as_tuple() for a in apertures], dtype=float).reshape(-1, 3)
    cos_fov = np.array([a.cos_fov for a in apertures], dtype=float)
    areas = np.array([a.area for a in apertures], dtype=float)
    return positions, normals, cos_fov, areas


def _lambertian(order: np.ndarray, cos_phi: np.ndarray) -> np.ndarray:
    safe = np.where(cos_phi > 0.0, cos_phi, 0.0)
    return (order + 1.0) / (2.0 * math.pi) * safe ** order


def _incident_power(sources: Sequence[LambertianSource], surface: SurfaceArrays) -> np.ndarray:
    """(S, E) power each source delivers onto each element."""
    positions, orientations, orders, powers = _source_arrays(sources)
    v = surface.centres[None, :, :] - positions[:, None, :]
    dist = np.sqrt(np.einsum('sek,sek->se', v, v))
    dist = np.where(dist > 0.0, dist, np.inf)
    cos_phi = np.einsum('sek,sk->se', v, orientations) / dist
    cos_e = -np.einsum('sek,ek->se', v, surface.normals) / dist
    visible = (cos_phi > 0.0) & (cos_e > 0.0)
    gain = _lambertian(orders[:, None], cos_phi) * cos_e * surface.areas[None, :] / dist ** 2
    return np.where(visible, gain * powers[:, None], 0.0)


def _receiver_gain(apertures: Sequence[ReceiverAperture], surface: SurfaceArrays) -> np.ndarray:
    """(B, E) fraction of an element's reflected power collected by each aperture."""
    positions, normals, cos_fov, areas = _aperture_arrays(apertures)
    u = positions[:, None, :] - surface.centres[None, :, :]
    dist = np.sqrt(np.einsum('bek,bek->be', u, u))
    dist = np.where(dist > 0.0, dist, np.inf)
    cos_e = np.einsum('bek,ek->be', u, surface.normals) / dist
    cos_r = -np.einsum('bek,bk->be', u, normals) / dist
    visible = (cos_e > 0.0) & (cos_r > 0.0) & (cos_r >= cos_fov[:, None])
    gain = cos_e * cos_r * areas[:, None] / (math.pi * dist ** 2)
    return np.where(visible, gain, 0.0)


def _los_power(sources: Sequence[LambertianSource], apertures: Sequence[ReceiverAperture]) -> np.ndarray:
    """(S, B) line-of-sight power."""
    src_pos, orientations, orders, powers = _source_arrays(sources)
    rx_pos, normals, cos_fov, areas = _aperture_arrays(apertures)
    d = rx_pos[None, :, :] - src_pos[:, None, :]
    dist = np.sqrt(np.einsum('sbk,sbk->sb', d, d))
    if np.any(dist == 0.0):
        raise CoincidentGeometryError("Source and receiver are at the same position")
    cos_phi = np.einsum('sbk,sk->sb', d, orientations) / dist
    cos_theta = -np.einsum('sbk,bk->sb', d, normals) / dist
    visible = (cos_phi > 0.0) & (cos_theta > 0.0) & (cos_theta >= cos_fov[None, :])
    gain = _lambertian(orders[:, None], cos_phi) * cos_theta * areas[None, :] / dist ** 2
    return np.where(visible, gain * powers[:, None], 0.0)


def _transfer_matrix(surface: SurfaceArrays) -> np.ndarray:
    """
    (E, E) matrix F with F[i, j] the fraction of power leaving element i that lands on j.

    Pairs closer than sqrt(2 * max area) are dropped; the far-field formula diverges there.
    """
    count = len(surface)
    matrix = np.zeros((count, count), dtype=float)
    for start in range(0, count, _BLOCK_ROWS):
        stop = min(start + _BLOCK_ROWS, count)
        v = surface.centres[None, :, :] - surface.centres[start:stop, None, :]
        dist = np.sqrt(np.einsum('ijk,ijk->ij', v, v))
        min_dist = np.sqrt(2.0 * np.maximum(surface.areas[start:stop, None], surface.areas[None, :]))
        usable = dist >= min_dist
        safe = np.where(usable, dist, np.inf)
        cos_1 = np.einsum('ijk,ik->ij', v, surface.normals[start:stop]) / safe
        cos_2 = -np.einsum('ijk,jk->ij', v, surface.normals) / safe
        keep = usable & (cos_1 > 0.0) & (cos_2 > 0.0)
        block = cos_1 * cos_2 * surface.areas[None, :] / (math.pi * safe ** 2)
        matrix[start:stop] = np.where(keep, block, 0.0)
    return matrix


class ChannelModel:
    """
    Received power from any set of sources into any set of apertures inside one room.

    Reflection terms of the last SOURCE_CACHE_SIZE source sets and the element-to-element
    matrix are cached, so evaluating many receiver positions only pays for the receiver side.
    """

    def __init__(self, room: Room, policy: DiscretizationPolicy, max_order: int = 2):
        if max_order not in (0, 1, 2):
            raise ValueError(f"Reflection order must be 0, 1 or 2, got {max_order}")
        self.room = room
        self.policy = policy
        self.max_order = max_order
        self._lock = threading.Lock()
        self._source_terms: OrderedDict[Tuple[LambertianSource, ...], Tuple[np.ndarray, np.ndarray]] = OrderedDict()

    @cached_property
    def fine(self) -> SurfaceArrays:
        return SurfaceArrays.from_elements(discretize_room(self.room, self.policy.first_order_element))

    @cached_property
    def coarse(self) -> SurfaceArrays:
        return SurfaceArrays.from_elements(discretize_room(self.room, self.policy.second_order_element))

    @cached_property
    def transfer(self) -> np.ndarray:
        logger.info(f"Building {len(self.coarse)} x {len(self.coarse)} second-order transfer matrix")
        return _transfer_matrix(self.coarse)

    def prepare(self, sources: Sequence[LambertianSource]) -> None:
        """Warm every cache ``sources`` needs; call before fanning out to threads."""
        self._terms(tuple(sources))

    def _terms(self, sources: Tuple[LambertianSource, ...]) -> Tuple[np.ndarray, np.ndarray]:
        """Power leaving each fine element after one bounce and each coarse element after two."""
        with self._lock:
            cached = self._source_terms.get(sources)
            if cached is not None:
                self._source_terms.move_to_end(sources)
                return cached
            first = np.zeros((len(sources), 0))
            second = np.zeros((len(sources), 0))
            if self.max_order >= 1:
                first = _incident_power(sources, self.fine) * self.fine.reflectivity[None, :]
            if self.max_order >= 2:
                rho = self.coarse.reflectivity[None, :]
                leaving = _incident_power(sources, self.coarse) * rho
                second = np.einsum('se,ef->sf', leaving, self.transfer) * rho
            self._source_terms[sources] = (first, second)
            if len(self._source_terms) > SOURCE_CACHE_SIZE:
                self._source_terms.popitem(last=False)
            logger.debug(f"Cached reflection terms for {len(sources)} sources")
            return first, second

    def power_components(
        self,
        sources: Sequence[LambertianSource],
        apertures: Sequence[ReceiverAperture],
    ) -> PathBudget:
        """(S, B) arrays of LOS, first- and second-order received power."""
        sources = tuple(sources)
        los = _los_power(sources, apertures)
        zeros = np.zeros_like(los)
        if self.max_order == 0 or self.room.with_reflectivity(0.0) == self.room:
            return PathBudget(los=los, first_order=zeros, second_order=zeros.copy())
        first_terms, second_terms = self._terms(sources)
        first = np.einsum('se,be->sb', first_terms, _receiver_gain(apertures, self.fine))
        second = zeros.copy()
        if self.max_order >= 2:
            second = np.einsum('sf,bf->sb', second_terms, _receiver_gain(apertures, self.coarse))
        return PathBudget(los=los, first_order=first, second_order=second)

    def path_budget(self, src: LambertianSource, rx: ReceiverAperture) -> PathBudget:
        components = self.power_components((src,), (rx,))
        return PathBudget(
            los=float(components.los[0, 0]),
            first_order=float(components.first_order[0, 0]),
            second_order=float(components.second_order[0, 0]),
        )


@lru_cache(maxsize=8)
def get_channel_model(room: Room, policy: DiscretizationPolicy, max_order: int = 2) -> ChannelModel:
    return ChannelModel(room, policy, max_order)


def los_gain(src: LambertianSource, rx: ReceiverAperture) -> float:
    """
    Line-of-sight DC gain between a Lambertian source and a detector.

    Raises:
        CoincidentGeometryError: if both sit at the same point
    """
    d = rx.position - src.position
    dist = d.norm()
    if dist == 0.0:
        raise CoincidentGeometryError("Source and receiver are at the same position")
    cos_phi = src.orientation.dot(d) / dist
    cos_theta = -rx.orientation.dot(d) / dist
    if cos_phi <= 0.0 or cos_theta <= 0.0 or cos_theta < rx.cos_fov:
        return 0.0
    return (src.order_n + 1) / (2 * math.pi) * cos_phi ** src.order_n * cos_theta * rx.area / dist ** 2


def first_order_power(src: LambertianSource, rx: ReceiverAperture, elements: Sequence[SurfaceElement]) -> float:
    """Power reaching ``rx`` after exactly one reflection off ``elements``."""
    if not elements:
        logger.warning("No reflecting elements given; first-order power is zero")
        return 0.0
    surface = SurfaceArrays.from_elements(elements)
    leaving = _incident_power((src,), surface) * surface.reflectivity[None, :]
    return float(np.einsum('se,be->', leaving, _receiver_gain((rx,), surface)))


def second_order_power(src: LambertianSource, rx: ReceiverAperture, elements: Sequence[SurfaceElement]) -> float:
    """Power reaching ``rx`` after exactly two reflections, both bounces on ``elements``."""
    if not elements:
        logger.warning("No reflecting elements given; second-order power is zero")
        return 0.0
    surface = SurfaceArrays.from_elements(elements)
    rho = surface.reflectivity[None, :]
    leaving = _incident_power((src,), surface) * rho
    second = np.einsum('se,ef->sf', leaving, _transfer_matrix(surface)) * rho
    return float(np.einsum('sf,bf->', second, _receiver_gain((rx,), surface)))


def received_power(
    src: LambertianSource,
    rx: ReceiverAperture,
    policy: DiscretizationPolicy,
    room: Room,
    max_order: int = 2,
) -> PathBudget:
    """Received power from one source, split into LOS and reflection orders."""
    model = get_channel_model(room, policy, max_order)
    budget = model.path_budget(src, rx)
    return PathBudget(
        los=src.optical_power * los_gain(src, rx),
        first_order=budget.first_order,
        second_order=budget.second_order,
    )


def brute_force_power_oracle(
    src: LambertianSource,
    rx: ReceiverAperture,
    room: Room,
    element_size: float,
    max_order: int = 2,
) -> PathBudget:
    """
    Reference computation with plain Python loops over every element (and element pair).

    Uses one element size for both reflection orders. Only practical for small rooms.
    """
    elements = discretize_room(room, element_size)

    def element_gain_from_source(e: SurfaceElement) -> float:
        v = e.centre - src.position
        dist = v.norm()
        if dist == 0.0:
            return 0.0
        cos_phi = src.orientation.dot(v) / dist
        cos_e = -e.normal.dot(v) / dist
        if cos_phi <= 0.0 or cos_e <= 0.0:
            return 0.0
        return (src.order_n + 1) / (2 * math.pi) * cos_phi ** src.order_n * cos_e * e.area / dist ** 2

    def element_to_rx(e: SurfaceElement) -> float:
        u = rx.position - e.centre
        dist = u.norm()
        if dist == 0.0:
            return 0.0
        cos_e = e.normal.dot(u) / dist
        cos_r = -rx.orientation.dot(u) / dist
        if cos_e <= 0.0 or cos_r <= 0.0 or cos_r < rx.cos_fov:
            return 0.0
        return cos_e * cos_r * rx.area / (math.pi * dist ** 2)

    def element_to_element(a: SurfaceElement, b: SurfaceElement) -> float:
        v = b.centre - a.centre
        dist = v.norm()
        if dist < math.sqrt(2.0 * max(a.area, b.area)):
            return 0.0
        cos_1 = a.normal.dot(v) / dist
        cos_2 = -b.normal.dot(v) / dist
        if cos_1 <= 0.0 or cos_2 <= 0.0:
            return 0.0
        return cos_1 * cos_2 * b.area / (math.pi * dist ** 2)

    los = src.optical_power * los_gain(src, rx)
    first = 0.0
    second = 0.0
    if max_order >= 1:
        leaving: List[float] = [src.optical_power * element_gain_from_source(e) * e.reflectivity for e in elements]
        for e, power in zip(elements, leaving):
            if power:
                first += power * element_to_rx(e)
        if max_order >= 2:
            for a, power in zip(elements, leaving):
                if not power:
                    continue
                for b in elements:
                    if b is a:
                        continue
                    transfer = element_to_element(a, b)
                    if transfer:
                        second += power * transfer * b.reflectivity * element_to_rx(b)
    return PathBudget(los=los, first_order=first, second_order=second)

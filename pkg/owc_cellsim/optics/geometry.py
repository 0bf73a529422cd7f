"""
Room geometry shared by the whole simulator.

Coordinates: x spans the room width, y the length and z the height, floor at z = 0.
Azimuth is measured counterclockwise from +x in the horizontal plane, elevation from
the horizontal plane (negative = downward).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, List, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

# Map quantities a ScalarGrid may hold
QUANTITY_CHOICES = [
    ('snr_db', 'SNR (dB)'),
    ('sinr_db', 'SINR (dB)'),
    ('gain_db', 'MRC - SC gain (dB)'),
    ('lux', 'Illuminance (lx)'),
]
QUANTITIES = frozenset(key for key, _ in QUANTITY_CHOICES)


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def __add__(self, other: Vec3) -> Vec3:
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: Vec3) -> Vec3:
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def __mul__(self, scale: float) -> Vec3:
        return Vec3(self.x * scale, self.y * scale, self.z * scale)

    __rmul__ = __mul__

    def dot(self, other: Vec3) -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.x, self.y, self.z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


@dataclass(frozen=True)
class Room:
    width_x: float
    length_y: float
    height_z: float
    reflectivity_ceiling: float
    reflectivity_walls: float
    reflectivity_floor: float
    comm_floor_z: float

    def __post_init__(self):
        if min(self.width_x, self.length_y, self.height_z) <= 0:
            raise ValueError("Room dimensions must be positive")
        for name in ('reflectivity_ceiling', 'reflectivity_walls', 'reflectivity_floor'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if not 0.0 <= self.comm_floor_z < self.height_z:
            raise ValueError("Communication floor must satisfy 0 <= z < room height")

    @property
    def centre(self) -> Vec3:
        return Vec3(self.width_x / 2, self.length_y / 2, self.height_z / 2)

    @property
    def smallest_dimension(self) -> float:
        return min(self.width_x, self.length_y, self.height_z)

    def with_reflectivity(self, value: float) -> Room:
        """Same room with every surface set to one reflectivity (0 gives a black room)."""
        return Room(
            self.width_x, self.length_y, self.height_z,
            value, value, value, self.comm_floor_z,
        )


@dataclass(frozen=True)
class SurfaceElement:
    centre: Vec3
    normal: Vec3
    area: float
    reflectivity: float
    emission_order: float = 1.0


@dataclass(frozen=True)
class DiscretizationPolicy:
    first_order_element: float
    second_order_element: float

    def __post_init__(self):
        if self.first_order_element <= 0 or self.second_order_element <= 0:
            raise ValueError("Element sizes must be positive")
        if self.second_order_element < self.first_order_element:
            raise ValueError("Second-order elements cannot be smaller than first-order elements")


@dataclass(frozen=True)
class FloorGrid:
    """Receiver positions on the communication floor, row-major (x varies fastest)."""
    nx: int
    ny: int
    step: float
    z: float
    points: Tuple[Vec3, ...]

    def __iter__(self) -> Iterator[Vec3]:
        return iter(self.points)

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, index: int) -> Vec3:
        return self.points[index]

    def index_of(self, ix: int, iy: int) -> int:
        return iy * self.nx + ix


@dataclass(frozen=True)
class ScalarGrid:
    """A map of one scalar quantity over the communication floor."""
    nx: int
    ny: int
    step: float
    quantity: str
    values: Tuple[float, ...]
    z: float = 0.0

    def __post_init__(self):
        if self.quantity not in QUANTITIES:
            raise ValueError(f"Unknown grid quantity: {self.quantity}")
        if len(self.values) != self.nx * self.ny:
            raise ValueError(
                f"Grid holds {len(self.values)} values, expected {self.nx} x {self.ny}"
            )
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("Grid values must be finite")

    @classmethod
    def from_values(cls, grid: FloorGrid, values: Iterable[float], quantity: str) -> ScalarGrid:
        return cls(
            nx=grid.nx,
            ny=grid.ny,
            step=grid.step,
            quantity=quantity,
            values=tuple(float(v) for v in values),
            z=grid.z,
        )

    def as_array(self) -> np.ndarray:
        """Values as an (ny, nx) array."""
        return np.asarray(self.values, dtype=float).reshape(self.ny, self.nx)

    def position(self, index: int) -> Vec3:
        iy, ix = divmod(index, self.nx)
        return Vec3(self.step / 2 + ix * self.step, self.step / 2 + iy * self.step, self.z)


def az_el_to_direction(az: float, el: float) -> Vec3:
    """Unit vector for an azimuth/elevation pair given in degrees."""
    az = az % 360.0
    if math.isclose(abs(el), 90.0):
        # Vertical: the azimuth is irrelevant
        return Vec3(0.0, 0.0, math.copysign(1.0, el))
    az_rad = math.radians(az)
    el_rad = math.radians(el)
    return Vec3(
        math.cos(el_rad) * math.cos(az_rad),
        math.cos(el_rad) * math.sin(az_rad),
        math.sin(el_rad),
    )


def _tile(extent: float, size: float) -> List[Tuple[float, float]]:
    """Split [0, extent] into (centre, width) tiles; the last tile may be partial."""
    count = max(1, math.ceil(extent / size - 1e-9))
    tiles = []
    for i in range(count):
        start = i * size
        end = min((i + 1) * size, extent)
        tiles.append(((start + end) / 2, end - start))
    return tiles


def discretize_room(room: Room, element_size: float) -> List[SurfaceElement]:
    """
    Divide every face of the room into square elements of side ``element_size``.

    Faces are emitted in a fixed order (floor, ceiling, x = 0, x = W, y = 0, y = L) and
    elements within a face row by row, so indices are stable between calls.

    Raises:
        ValueError: if the element size is not positive or exceeds the smallest face dimension
    """
    if element_size <= 0:
        raise ValueError(f"Element size must be positive, got {element_size}")
    if element_size > room.smallest_dimension + 1e-12:
        raise ValueError(
            f"Element size {element_size} m exceeds the smallest room dimension "
            f"({room.smallest_dimension} m)"
        )

    W, L, H = room.width_x, room.length_y, room.height_z
    xs, ys, zs = _tile(W, element_size), _tile(L, element_size), _tile(H, element_size)
    elements: List[SurfaceElement] = []

    def add(centre: Vec3, normal: Vec3, area: float, rho: float) -> None:
        elements.append(SurfaceElement(centre=centre, normal=normal, area=area, reflectivity=rho))

    for (cy, wy) in ys:
        for (cx, wx) in xs:
            add(Vec3(cx, cy, 0.0), Vec3(0.0, 0.0, 1.0), wx * wy, room.reflectivity_floor)
    for (cy, wy) in ys:
        for (cx, wx) in xs:
            add(Vec3(cx, cy, H), Vec3(0.0, 0.0, -1.0), wx * wy, room.reflectivity_ceiling)
    for x, nx in ((0.0, 1.0), (W, -1.0)):
        for (cz, wz) in zs:
            for (cy, wy) in ys:
                add(Vec3(x, cy, cz), Vec3(nx, 0.0, 0.0), wy * wz, room.reflectivity_walls)
    for y, ny in ((0.0, 1.0), (L, -1.0)):
        for (cz, wz) in zs:
            for (cx, wx) in xs:
                add(Vec3(cx, y, cz), Vec3(0.0, ny, 0.0), wx * wz, room.reflectivity_walls)

    logger.debug(f"Discretized room into {len(elements)} elements of {element_size} m")
    return elements


def cf_grid(room: Room, step: float) -> FloorGrid:
    """
    Receiver lattice on the communication floor, inset from the walls by step / 2.

    Raises:
        ValueError: if the step is not positive or larger than the smaller floor dimension
    """
    if step <= 0:
        raise ValueError(f"Grid step must be positive, got {step}")
    if step > min(room.width_x, room.length_y) + 1e-12:
        raise ValueError(
            f"Grid step {step} m is larger than the floor ({room.width_x} x {room.length_y} m)"
        )
    nx = int(math.floor(room.width_x / step + 1e-9))
    ny = int(math.floor(room.length_y / step + 1e-9))
    points = tuple(
        Vec3(step / 2 + ix * step, step / 2 + iy * step, room.comm_floor_z)
        for iy in range(ny)
        for ix in range(nx)
    )
    return FloorGrid(nx=nx, ny=ny, step=step, z=room.comm_floor_z, points=points)


def stack_vectors(vectors: Sequence[Vec3]) -> np.ndarray:
    """(N, 3) array from a sequence of vectors."""
    if not vectors:
        return np.zeros((0, 3), dtype=float)
    return np.array([v.as_tuple() for v in vectors], dtype=float)

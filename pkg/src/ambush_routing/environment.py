"""Terrain, vehicles, missions, local outcome maps and ambush-area tilings."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

log = logging.getLogger(__name__)

#: Car speed reaches its floor at this slope magnitude.
CAR_CRITICAL_SLOPE = 0.3
#: Fraction of ``v_max`` a car keeps on any slope.
CAR_SPEED_FLOOR = 0.05
#: Peak of Tobler's hiking function, in m/s (6 km/h).
TOBLER_PEAK = 1.666


class TerrainError(ValueError):
    pass


class DomainError(TerrainError):
    """A query point lies outside the environment bounds."""


class DataVoidError(TerrainError):
    """Elevation needed at a point is missing."""


class ModelError(TerrainError):
    pass


class EnvKind(str, enum.Enum):
    OFFROAD = "offroad"
    ROAD = "road"


class VehicleKind(str, enum.Enum):
    PEDESTRIAN = "pedestrian"
    CAR = "car"


class MissionType(str, enum.Enum):
    TRANSPORT = "transport"
    SCOUT = "scout"


def _frozen(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class HeightGrid:
    """Regular elevation raster; row 0 is the northern edge."""

    elevations: np.ndarray
    spacing: float
    void_mask: Optional[np.ndarray] = None
    filled_voids: int = 0

    def __post_init__(self):
        elev = _frozen(self.elevations, float)
        if elev.ndim != 2 or elev.shape[0] < 2 or elev.shape[1] < 2:
            raise ValueError(f"height grid must be at least 2x2, got shape {elev.shape}")
        if not self.spacing > 0:
            raise ValueError(f"grid spacing must be positive, got {self.spacing}")
        mask = np.zeros(elev.shape, bool) if self.void_mask is None else self.void_mask
        mask = _frozen(mask, bool)
        if mask.shape != elev.shape:
            raise ValueError("void mask shape does not match elevations")
        if not np.all(np.isfinite(elev[~mask])):
            raise ValueError("non-void elevations must be finite")
        object.__setattr__(self, "elevations", elev)
        object.__setattr__(self, "void_mask", mask)

    @property
    def rows(self) -> int:
        return self.elevations.shape[0]

    @property
    def cols(self) -> int:
        return self.elevations.shape[1]

    @property
    def n_void(self) -> int:
        return int(self.void_mask.sum())

    @property
    def width(self) -> float:
        return (self.cols - 1) * self.spacing

    @property
    def height(self) -> float:
        return (self.rows - 1) * self.spacing

    def crop(self, row0: int, col0: int, rows: int, cols: int) -> "HeightGrid":
        sl = (slice(row0, row0 + rows), slice(col0, col0 + cols))
        sub = self.elevations[sl]
        if sub.shape != (rows, cols):
            raise ValueError(f"crop window {row0, col0, rows, cols} exceeds grid {self.rows}x{self.cols}")
        return HeightGrid(sub, self.spacing, self.void_mask[sl])


def fill_voids(grid: HeightGrid) -> HeightGrid:
    """Replace void samples by their nearest valid neighbour.

    The returned grid has an empty void mask and records how many samples
    were filled in ``filled_voids``.
    """
    mask = grid.void_mask
    if not mask.any():
        return grid
    if mask.all():
        raise DataVoidError("every sample of the height grid is void")
    _, (ri, ci) = ndimage.distance_transform_edt(mask, return_indices=True)
    filled = grid.elevations[ri, ci]
    return HeightGrid(filled, grid.spacing, None, filled_voids=grid.n_void + grid.filled_voids)


@dataclass(frozen=True)
class Environment:
    """Axis-aligned rectangle ``[0, width] x [0, height]`` in meters.

    Off-road environments carry a height grid whose extent defines the
    bounds; road environments may have no terrain at all.
    """

    width: float
    height: float
    kind: EnvKind = EnvKind.OFFROAD
    terrain: Optional[HeightGrid] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", EnvKind(self.kind))
        if not (self.width > 0 and self.height > 0):
            raise ValueError("environment bounds must have positive extent")
        if self.kind is EnvKind.OFFROAD:
            if self.terrain is None:
                raise ValueError("off-road environment needs a height grid")
            if not (math.isclose(self.width, self.terrain.width) and math.isclose(self.height, self.terrain.height)):
                raise ValueError("off-road bounds must match the height grid extent")

    @classmethod
    def from_grid(cls, grid: HeightGrid) -> "Environment":
        return cls(grid.width, grid.height, EnvKind.OFFROAD, grid)

    @classmethod
    def flat(cls, width: float, height: float, spacing: float, elevation: float = 100.0) -> "Environment":
        rows = int(round(height / spacing)) + 1
        cols = int(round(width / spacing)) + 1
        grid = HeightGrid(np.full((rows, cols), elevation), spacing)
        return cls.from_grid(grid)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (0.0, 0.0, self.width, self.height)

    def contains(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.width and 0.0 <= y <= self.height


@dataclass(frozen=True)
class VehicleModel:
    kind: VehicleKind
    v_max: float
    critical_slope: float = CAR_CRITICAL_SLOPE
    speed_floor: float = CAR_SPEED_FLOOR

    def __post_init__(self):
        object.__setattr__(self, "kind", VehicleKind(self.kind))
        if not self.v_max > 0:
            raise ValueError("v_max must be positive")

    @classmethod
    def pedestrian(cls) -> "VehicleModel":
        return cls(VehicleKind.PEDESTRIAN, TOBLER_PEAK)

    @classmethod
    def car(cls, v_max: float = 15.0) -> "VehicleModel":
        return cls(VehicleKind.CAR, v_max)

    def speed(self, slope):
        """Maximum speed (m/s) at the given slope magnitude(s)."""
        s = np.abs(np.asarray(slope, dtype=float))
        if self.kind is VehicleKind.PEDESTRIAN:
            v = TOBLER_PEAK * np.exp(-3.5 * np.abs(s + 0.05))
        else:
            v = self.v_max * np.maximum(self.speed_floor, 1.0 - s / self.critical_slope)
        return v if v.ndim else float(v)


@dataclass(frozen=True)
class OutcomeMap:
    """Local outcome per network node, indexed by node id."""

    alpha: np.ndarray

    def __post_init__(self):
        a = _frozen(self.alpha, float)
        if np.any(a < 0) or np.any(a > 1):
            raise ValueError("local outcomes must lie in [0, 1]")
        object.__setattr__(self, "alpha", a)

    def __len__(self):
        return len(self.alpha)


@dataclass(frozen=True)
class AmbushAreaSet:
    """Partition of the network nodes into ambush areas.

    ``cells`` holds ``(x0, y0, x1, y1)`` rectangles for a square tiling; it is
    ``None`` when every node is its own point-like area (road networks).
    """

    reach: float
    node_area: np.ndarray
    n_areas: int
    cells: Optional[np.ndarray] = None
    surface: Optional[np.ndarray] = None
    nx: int = 0
    ny: int = 0

    def __post_init__(self):
        na = _frozen(self.node_area, np.int64)
        if na.size and (na.min() < 0 or na.max() >= self.n_areas):
            raise ValueError("node area index out of range")
        object.__setattr__(self, "node_area", na)
        if self.cells is not None:
            object.__setattr__(self, "cells", _frozen(self.cells, float))
            object.__setattr__(self, "surface", _frozen(self.surface, float))

    def area_of_point(self, x: float, y: float) -> int:
        if self.cells is None:
            raise ValueError("point-like areas have no spatial extent")
        i = min(int(math.floor(x / self.reach)), self.nx - 1)
        j = min(int(math.floor(y / self.reach)), self.ny - 1)
        return j * self.nx + i

    def centers(self, positions: Optional[np.ndarray] = None) -> np.ndarray:
        if self.cells is not None:
            c = self.cells
            return np.column_stack([(c[:, 0] + c[:, 2]) / 2, (c[:, 1] + c[:, 3]) / 2])
        if positions is None:
            raise ValueError("point-like areas need node positions")
        return np.asarray(positions, float)[np.argsort(self.node_area)]


# -- terrain queries ---------------------------------------------------------


def _bilinear(grid: HeightGrid, x: np.ndarray, y: np.ndarray, check_void: bool = True) -> np.ndarray:
    fc = x / grid.spacing
    fr = (grid.rows - 1) - y / grid.spacing
    c0 = np.clip(np.floor(fc).astype(int), 0, grid.cols - 2)
    r0 = np.clip(np.floor(fr).astype(int), 0, grid.rows - 2)
    tc = fc - c0
    tr = fr - r0
    z = grid.elevations
    if check_void:
        m = grid.void_mask
        void = m[r0, c0] | m[r0, c0 + 1] | m[r0 + 1, c0] | m[r0 + 1, c0 + 1]
        if void.any():
            k = int(np.argmax(void))
            raise DataVoidError(f"void elevation under point ({x.flat[k]:.3f}, {y.flat[k]:.3f})")
    top = z[r0, c0] * (1 - tc) + z[r0, c0 + 1] * tc
    bot = z[r0 + 1, c0] * (1 - tc) + z[r0 + 1, c0 + 1] * tc
    return top * (1 - tr) + bot * tr


def slopes_at(env: Environment, points) -> np.ndarray:
    """Slope magnitudes ``|grad z|`` at an ``(n, 2)`` array of points.

    Elevation is bilinearly interpolated; each partial derivative is a
    central difference over one grid spacing, made one-sided where the
    stencil would leave the bounds.
    """
    if env.kind is not EnvKind.OFFROAD or env.terrain is None:
        raise DomainError("slope is only defined on off-road terrain")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x, y = pts[:, 0], pts[:, 1]
    outside = (x < 0) | (x > env.width) | (y < 0) | (y > env.height)
    if outside.any():
        k = int(np.argmax(outside))
        raise DomainError(f"point ({x[k]}, {y[k]}) outside bounds {env.width} x {env.height}")
    g = env.terrain
    h = g.spacing
    xl, xr = np.maximum(x - h, 0.0), np.minimum(x + h, env.width)
    yl, yr = np.maximum(y - h, 0.0), np.minimum(y + h, env.height)
    _bilinear(g, x, y)
    dzdx = (_bilinear(g, xr, y) - _bilinear(g, xl, y)) / (xr - xl)
    dzdy = (_bilinear(g, x, yr) - _bilinear(g, x, yl)) / (yr - yl)
    return np.hypot(dzdx, dzdy)


def slope_at(env: Environment, x) -> float:
    return float(slopes_at(env, [x])[0])


def speed_at(env: Environment, x, vehicle: VehicleModel) -> float:
    return vehicle.speed(slope_at(env, x))


# -- outcome maps and areas --------------------------------------------------


def compute_outcome_map(env: Environment, vehicle: VehicleModel, mission, network,
                        safe_radius: float = 0.0) -> OutcomeMap:
    """Local outcome per node, inversely proportional to the local speed.

    Transport missions weight each node by the time needed to cross it,
    normalised so the slowest interior node has outcome 1. Scout missions
    are binary. Terminal nodes get outcome 0, and so does every node within
    ``safe_radius`` meters of a terminal (the secured departure and arrival
    zones).
    """
    mission = MissionType(mission)
    pos = network.positions
    n = len(pos)
    terminals = [network.origin, network.destination]
    interior = np.ones(n, bool)
    interior[terminals] = False
    if safe_radius < 0:
        raise ModelError(f"safe radius must be nonnegative, got {safe_radius}")
    if safe_radius > 0:
        for t in terminals:
            interior &= np.hypot(*(pos - pos[t]).T) > safe_radius

    if mission is MissionType.SCOUT:
        alpha = interior.astype(float)
        return OutcomeMap(alpha)

    if env.kind is EnvKind.ROAD or network.edge_speed is not None:
        t = _road_node_times(network)
    else:
        speed = vehicle.speed(slopes_at(env, pos))
        if np.any(speed <= 0):
            raise ModelError("zero speed in outcome model")
        t = env.terrain.spacing / speed
    t = np.where(interior, t, 0.0)
    top = t.max() if n else 0.0
    alpha = t / top if top > 0 else t
    return OutcomeMap(np.clip(alpha, 0.0, 1.0))


def _road_node_times(network) -> np.ndarray:
    if network.edge_speed is None:
        raise ModelError("road outcome needs per-edge speeds")
    if np.any(network.edge_speed <= 0):
        raise ModelError("zero speed in outcome model")
    n = len(network.positions)
    tt = network.lengths / network.edge_speed
    total = np.bincount(network.heads, weights=tt, minlength=n)
    count = np.bincount(network.heads, minlength=n)
    return np.divide(total, count, out=np.zeros(n), where=count > 0)


def tile_ambush_areas(env: Environment, reach: float, positions=None) -> AmbushAreaSet:
    """Square tiling of the bounds with cells of side ``reach``.

    Cells in the last column/row are truncated at the bounds. Cell ids run
    west to east, then south to north. Points go to the cell holding them
    under half-open intervals, with the far edges folded into the last cell.
    """
    if not reach > 0:
        raise ValueError("reach must be positive")
    if reach > min(env.width, env.height):
        log.warning("reach %.1f exceeds the environment size; ambush areas degenerate", reach)
    nx = max(1, math.ceil(env.width / reach - 1e-12))
    ny = max(1, math.ceil(env.height / reach - 1e-12))
    xs = np.minimum(np.arange(nx + 1) * reach, env.width)
    ys = np.minimum(np.arange(ny + 1) * reach, env.height)
    xs[-1], ys[-1] = env.width, env.height
    cells = np.array([(xs[i], ys[j], xs[i + 1], ys[j + 1]) for j in range(ny) for i in range(nx)])
    surface = (cells[:, 2] - cells[:, 0]) * (cells[:, 3] - cells[:, 1])
    if positions is None:
        node_area = np.zeros(0, np.int64)
    else:
        p = np.atleast_2d(np.asarray(positions, float))
        ix = np.clip(np.floor(p[:, 0] / reach).astype(np.int64), 0, nx - 1)
        iy = np.clip(np.floor(p[:, 1] / reach).astype(np.int64), 0, ny - 1)
        node_area = iy * nx + ix
    return AmbushAreaSet(reach, node_area, nx * ny, cells, surface, nx, ny)


def node_areas(n_nodes: int) -> AmbushAreaSet:
    """One point-like ambush area per node."""
    return AmbushAreaSet(0.0, np.arange(n_nodes), n_nodes)


def custom_areas(node_area: Sequence[int], n_areas: Optional[int] = None) -> AmbushAreaSet:
    na = np.asarray(node_area, np.int64)
    return AmbushAreaSet(0.0, na, int(na.max()) + 1 if n_areas is None else n_areas)

"""Obstacle fields, ground-truth collision queries and occupancy costmaps."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dynamics import RobotState

FREE, INFLATED, OCCUPIED = 0, 1, 2

ROBOT_RADIUS = 0.267
OBSTACLE_RADIUS = 0.15


@dataclass(frozen=True)
class ObstacleMap:
    """Disc obstacles inside a ``width x height`` box anchored at the origin."""

    centers: np.ndarray  # (K, 2)
    radii: np.ndarray  # (K,)
    width: float
    height: float
    d_min: float
    seed: int

    def __len__(self) -> int:
        return len(self.radii)

    def to_text(self) -> str:
        lines = [f"{self.width!r} {self.height!r} {self.d_min!r} {self.seed}"]
        lines += [f"{x!r} {y!r} {r!r}" for (x, y), r in zip(self.centers.tolist(), self.radii.tolist())]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ObstacleMap":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if not rows or len(rows[0]) != 4:
            raise ValueError("obstacle map header must be 'width height d_min seed'")
        w, h, d, seed = rows[0]
        body = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, 3)
        return cls(body[:, :2].copy(), body[:, 2].copy(), float(w), float(h), float(d), int(seed))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "ObstacleMap":
        return cls.from_text(Path(path).read_text())


def generate_forest(
    width: float,
    height: float,
    d_min: float,
    obstacle_radius: float = OBSTACLE_RADIUS,
    seed: int = 0,
    keep_clear=((0.0, 0.0),),
    keep_clear_radius: float = 2.0,
    k: int = 30,
) -> ObstacleMap:
    """Poisson-disk forest (Bridson's rejection sampler), deterministic per seed.

    Obstacles whose disc would intrude into a ``keep_clear_radius`` disc
    around any of ``keep_clear`` (start and goal positions) are dropped
    afterwards, which keeps the spacing guarantee intact.
    """
    if d_min <= 0 or width <= 0 or height <= 0:
        raise ValueError("width, height and d_min must be positive")
    rng = np.random.default_rng(seed)
    cell = d_min / math.sqrt(2.0)
    gw, gh = int(math.ceil(width / cell)), int(math.ceil(height / cell))
    grid = -np.ones((gw, gh), dtype=np.int64)
    pts: list[tuple[float, float]] = []

    def fits(px, py):
        gx, gy = int(px / cell), int(py / cell)
        for ix in range(max(gx - 2, 0), min(gx + 3, gw)):
            for iy in range(max(gy - 2, 0), min(gy + 3, gh)):
                j = grid[ix, iy]
                if j >= 0:
                    qx, qy = pts[j]
                    if (px - qx) ** 2 + (py - qy) ** 2 < d_min * d_min:
                        return False
        return True

    def add(px, py):
        grid[min(int(px / cell), gw - 1), min(int(py / cell), gh - 1)] = len(pts)
        pts.append((px, py))

    add(rng.uniform(0, width), rng.uniform(0, height))
    active = [0]
    while active:
        i = active[int(rng.integers(len(active)))]
        px, py = pts[i]
        for _ in range(k):
            ang = rng.uniform(0.0, 2.0 * math.pi)
            rad = rng.uniform(d_min, 2.0 * d_min)
            qx, qy = px + rad * math.cos(ang), py + rad * math.sin(ang)
            if 0.0 <= qx < width and 0.0 <= qy < height and fits(qx, qy):
                add(qx, qy)
                active.append(len(pts) - 1)
                break
        else:
            active.remove(i)

    centers = np.array(pts, dtype=float)
    keep = np.ones(len(centers), dtype=bool)
    for c in keep_clear:
        keep &= np.hypot(*(centers - np.asarray(c, dtype=float)).T) >= keep_clear_radius + obstacle_radius
    centers = centers[keep]
    if len(centers) == 0:
        raise ValueError("no obstacle could be placed with these settings")
    return ObstacleMap(centers, np.full(len(centers), float(obstacle_radius)), float(width), float(height), float(d_min), int(seed))


@dataclass(frozen=True)
class CostmapParams:
    resolution: float = 0.05
    size: int = 240
    robot_radius: float = ROBOT_RADIUS
    margin: float = 0.05
    sensor_range: float = 7.0

    @property
    def inflation_radius(self) -> float:
        return self.robot_radius + self.margin


@dataclass(frozen=True)
class Costmap:
    """Axis-aligned occupancy grid; ``cells[row, col]`` with rows along +y.

    ``origin`` is the world position of the lower-left corner of cell
    ``(0, 0)``. Queries outside the grid report free space.
    """

    origin: np.ndarray
    resolution: float
    cells: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    def world_to_cell(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        col = np.floor((np.asarray(x) - self.origin[0]) / self.resolution).astype(np.int64)
        row = np.floor((np.asarray(y) - self.origin[1]) / self.resolution).astype(np.int64)
        return row, col

    def state_at(self, x, y) -> np.ndarray:
        row, col = self.world_to_cell(x, y)
        ny, nx = self.cells.shape
        inside = (row >= 0) & (row < ny) & (col >= 0) & (col < nx)
        out = np.zeros(np.shape(row), dtype=self.cells.dtype)
        out[inside] = self.cells[row[inside], col[inside]]
        return out

    def lethal(self, x, y) -> np.ndarray:
        return self.state_at(x, y) != FREE

    def to_pgm(self, path) -> None:
        """Dump as binary graymap (free white, inflated grey, occupied black)."""
        shade = np.array([255, 128, 0], dtype=np.uint8)[self.cells][::-1]
        ny, nx = shade.shape
        Path(path).write_bytes(f"P5\n{nx} {ny}\n255\n".encode() + shade.tobytes())


def rasterize(centers, radii, origin, resolution: float, shape, inflation_radius: float) -> Costmap:
    """Occupancy grid of disc obstacles, classified by cell centre.

    A cell is occupied when its centre lies inside a disc (the cell holding
    each obstacle centre always is) and inflated when its centre lies within
    ``r + inflation_radius`` of an obstacle centre.
    """
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    radii = np.asarray(radii, dtype=float).reshape(-1)
    ny, nx = shape
    ox, oy = float(origin[0]), float(origin[1])
    cells = np.zeros((ny, nx), dtype=np.int8)
    for (cx, cy), r in zip(centers, radii):
        reach = r + inflation_radius
        c0 = max(int(math.floor((cx - reach - ox) / resolution)), 0)
        c1 = min(int(math.floor((cx + reach - ox) / resolution)) + 1, nx)
        r0 = max(int(math.floor((cy - reach - oy) / resolution)), 0)
        r1 = min(int(math.floor((cy + reach - oy) / resolution)) + 1, ny)
        if c0 < c1 and r0 < r1:
            xs = ox + (np.arange(c0, c1) + 0.5) * resolution
            ys = oy + (np.arange(r0, r1) + 0.5) * resolution
            d2 = (xs[None, :] - cx) ** 2 + (ys[:, None] - cy) ** 2
            block = cells[r0:r1, c0:c1]
            block[(d2 <= reach * reach) & (block == FREE)] = INFLATED
            block[d2 <= r * r] = OCCUPIED
        ci, ri = int(math.floor((cx - ox) / resolution)), int(math.floor((cy - oy) / resolution))
        if 0 <= ri < ny and 0 <= ci < nx:
            cells[ri, ci] = OCCUPIED
    return Costmap(np.array([ox, oy], dtype=float), float(resolution), cells)


def build_local_costmap(obstacles: ObstacleMap, pose: RobotState, params: CostmapParams = CostmapParams()) -> Costmap:
    """Robot-centred ``size x size`` grid holding only obstacles within sensor range."""
    if params.sensor_range <= 0:
        raise ValueError("sensor_range must be positive")
    p = np.array([pose.x, pose.y])
    seen = np.hypot(*(obstacles.centers - p).T) <= params.sensor_range if len(obstacles) else np.zeros(0, bool)
    half = 0.5 * params.size * params.resolution
    return rasterize(
        obstacles.centers[seen],
        obstacles.radii[seen],
        p - half,
        params.resolution,
        (params.size, params.size),
        params.inflation_radius,
    )


def build_global_costmap(obstacles: ObstacleMap, params: CostmapParams = CostmapParams(), border: float = 3.0) -> Costmap:
    """Costmap covering the whole obstacle box plus ``border`` metres (known-map mode)."""
    res = params.resolution
    nx = int(math.ceil((obstacles.width + 2 * border) / res))
    ny = int(math.ceil((obstacles.height + 2 * border) / res))
    return rasterize(obstacles.centers, obstacles.radii, np.array([-border, -border]), res, (ny, nx), params.inflation_radius)


def is_collision(world, x, robot_radius: float = ROBOT_RADIUS) -> bool:
    """Collision of a disc robot at ``x``.

    Against an :class:`ObstacleMap` this is the exact test
    ``|p - c| < robot_radius + r`` (touching is not a collision). Against a
    :class:`Costmap` the footprint cell must be free; the inflation already
    accounts for the robot size.
    """
    xy = x.as_array()[:2] if isinstance(x, RobotState) else np.asarray(x, dtype=float)[:2]
    if isinstance(world, Costmap):
        return bool(world.lethal(xy[0], xy[1]))
    if world is None or len(world) == 0:
        return False
    d = np.hypot(*(world.centers - xy).T)
    return bool(np.any(d < robot_radius + world.radii))

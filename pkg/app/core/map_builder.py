"""World-frame fusion of labeled frames and 2D grid rendering."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, Literal, Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import binary_dilation
from scipy.spatial import ConvexHull, Delaunay, QhullError

from app.core.errors import EmptyCloud, TimestampOutOfRange
from app.core.geometry import Label, Trajectory
from app.core.labeling import LabeledCloud

logger = logging.getLogger(__name__)

OCCUPIED = 0
FREE = 254
UNKNOWN = 205

SliceMode = Literal["below_ceiling", "mid_height"]


@dataclass
class OccupancyGrid:
    """Byte raster of cell states; ``cells[row, col]`` covers x = origin_x + col * resolution."""

    width: int
    height: int
    resolution: float
    origin: Tuple[float, float]
    cells: np.ndarray

    def __post_init__(self) -> None:
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        self.cells = np.asarray(self.cells, dtype=np.uint8)
        if self.cells.shape != (self.height, self.width):
            raise ValueError(f"cells shape {self.cells.shape} does not match {self.height}x{self.width}")

    @classmethod
    def blank(cls, width: int, height: int, resolution: float, origin: Tuple[float, float]) -> "OccupancyGrid":
        return cls(width, height, resolution, origin, np.full((height, width), UNKNOWN, dtype=np.uint8))

    def cell_of(self, xy: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Column and row index of world ``(N, 2)`` coordinates."""
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        col = np.floor((xy[:, 0] - self.origin[0]) / self.resolution).astype(np.int64)
        row = np.floor((xy[:, 1] - self.origin[1]) / self.resolution).astype(np.int64)
        return col, row

    def state_at(self, x: float, y: float) -> int:
        col, row = self.cell_of(np.array([[x, y]]))
        if not (0 <= col[0] < self.width and 0 <= row[0] < self.height):
            return UNKNOWN
        return int(self.cells[row[0], col[0]])

    def cell_centers(self) -> np.ndarray:
        cols, rows = np.meshgrid(np.arange(self.width), np.arange(self.height))
        xs = self.origin[0] + (cols.ravel() + 0.5) * self.resolution
        ys = self.origin[1] + (rows.ravel() + 0.5) * self.resolution
        return np.column_stack([xs, ys])

    def count(self, state: int) -> int:
        return int(np.count_nonzero(self.cells == state))

    @property
    def occupied(self) -> np.ndarray:
        return self.cells == OCCUPIED


@dataclass
class GridComparison:
    agreement: float
    cells: int
    confusion: Dict[Tuple[int, int], int]


def fuse_frames(frames: Sequence[LabeledCloud], trajectory: Trajectory) -> LabeledCloud:
    """Move robot-frame clouds into the world frame with the pose interpolated at each timestamp.

    Frames outside the trajectory span are skipped with a warning.
    """
    moved = []
    for frame in frames:
        try:
            pose = trajectory.pose_at(frame.timestamp)
        except TimestampOutOfRange as e:
            logger.warning(f"Skipping frame at {frame.timestamp:.6f}: {e}")
            continue
        moved.append(frame.transformed(pose, frame_id="world"))
    logger.info(f"Fused {len(moved)} of {len(frames)} frames")
    return LabeledCloud.concatenate(moved, frame_id="world")


def _grid_extent(xy: np.ndarray, resolution: float) -> Tuple[int, int, Tuple[float, float]]:
    low = np.floor(xy.min(axis=0) / resolution) * resolution - resolution
    span = np.floor((xy.max(axis=0) - low) / resolution).astype(np.int64)
    width, height = int(span[0]) + 2, int(span[1]) + 2
    return width, height, (float(low[0]), float(low[1]))


def _hits(grid: OccupancyGrid, xy: np.ndarray) -> np.ndarray:
    counts = np.zeros(grid.width * grid.height, dtype=np.int64)
    if len(xy):
        col, row = grid.cell_of(xy)
        inside = (col >= 0) & (col < grid.width) & (row >= 0) & (row < grid.height)
        counts = np.bincount(row[inside] * grid.width + col[inside], minlength=grid.width * grid.height)
    return counts.reshape(grid.height, grid.width)


def _footprint(grid: OccupancyGrid, xy: np.ndarray) -> np.ndarray:
    """Cells whose centre lies in the convex hull of the observed cells."""
    inside = np.zeros((grid.height, grid.width), dtype=bool)
    if len(xy) == 0:
        return inside
    col, row = grid.cell_of(xy)
    cells = np.unique(np.column_stack([col, row]), axis=0)
    centers = (cells + 0.5) * grid.resolution + np.asarray(grid.origin)
    try:
        hull = ConvexHull(centers)
        triangulation = Delaunay(centers[hull.vertices])
    except (QhullError, ValueError):
        logger.debug("Footprint is degenerate; leaving free space unknown")
        return inside
    return (triangulation.find_simplex(grid.cell_centers()) >= 0).reshape(grid.height, grid.width)


def build_furniture_free_grid(
    cloud: LabeledCloud,
    resolution: float = 0.05,
    min_hits: int = 3,
    door_clearance: int = 1,
) -> OccupancyGrid:
    """Occupancy from wall points only, with doorways forced free.

    Floor, ceiling and clutter points never occupy a cell.
    """
    if len(cloud) == 0:
        raise EmptyCloud("Cannot build a grid from an empty cloud")
    xy = cloud.points[:, :2]
    width, height, origin = _grid_extent(xy, resolution)
    grid = OccupancyGrid.blank(width, height, resolution, origin)

    structure = (cloud.labels == Label.FLOOR) | (cloud.labels == Label.WALL)
    free = _footprint(grid, xy[structure])
    occupied = _hits(grid, xy[cloud.labels == Label.WALL]) >= min_hits

    doors = _hits(grid, xy[cloud.labels == Label.DOOR]) >= min_hits
    if len(cloud.anchors):
        doors |= _hits(grid, cloud.anchors[:, :2]) > 0
    if door_clearance > 0 and doors.any():
        doors = binary_dilation(doors, structure=np.ones((3, 3), dtype=bool), iterations=door_clearance)

    grid.cells[free] = FREE
    grid.cells[occupied] = OCCUPIED
    grid.cells[doors] = FREE
    logger.info(
        f"Furniture-free grid {grid.width}x{grid.height}: "
        f"{grid.count(OCCUPIED)} occupied, {int(doors.sum())} door cells"
    )
    return grid


def _ceiling_height(cloud: LabeledCloud | np.ndarray) -> float:
    if isinstance(cloud, LabeledCloud):
        ceiling = cloud.points_of(Label.CEILING)
        if len(ceiling):
            return float(np.median(ceiling[:, 2]))
    raise ValueError("below_ceiling slicing needs a ceiling height or ceiling-labeled points")


def build_slice_grid(
    cloud: LabeledCloud | np.ndarray,
    mode: SliceMode = "mid_height",
    band: Tuple[float, float] = (0.9, 1.1),
    resolution: float = 0.05,
    ceiling_height: Optional[float] = None,
) -> OccupancyGrid:
    """Baseline map: a cell is occupied when any point in the height band falls in it.

    ``below_ceiling`` reads ``band`` as distances under the ceiling, ``mid_height``
    as absolute heights.
    """
    points = cloud.points if isinstance(cloud, LabeledCloud) else np.asarray(cloud, dtype=float).reshape(-1, 3)
    if len(points) == 0:
        raise EmptyCloud("Cannot build a grid from an empty cloud")
    if mode == "below_ceiling":
        top = _ceiling_height(cloud) if ceiling_height is None else ceiling_height
        z_low, z_high = top - band[1], top - band[0]
    elif mode == "mid_height":
        z_low, z_high = band
    else:
        raise ValueError(f"unknown slice mode {mode!r}")

    xy = points[:, :2]
    width, height, origin = _grid_extent(xy, resolution)
    grid = OccupancyGrid.blank(width, height, resolution, origin)
    in_band = (points[:, 2] >= z_low) & (points[:, 2] <= z_high)
    grid.cells[_footprint(grid, xy)] = FREE
    grid.cells[_hits(grid, xy[in_band]) > 0] = OCCUPIED
    logger.info(f"Slice grid ({mode}, z {z_low:.2f}..{z_high:.2f}): {grid.count(OCCUPIED)} occupied")
    return grid


def compare_grids(a: OccupancyGrid, b: OccupancyGrid) -> GridComparison:
    """Share of cells in equal state, with per-state confusion counts."""
    if a.cells.shape != b.cells.shape:
        raise ValueError(f"grid shapes differ: {a.cells.shape} vs {b.cells.shape}")
    if not math.isclose(a.resolution, b.resolution):
        logger.warning(f"Comparing grids of different resolution ({a.resolution} vs {b.resolution})")
    total = a.cells.size
    pairs, counts = np.unique(np.stack([a.cells.ravel(), b.cells.ravel()], axis=1), axis=0, return_counts=True)
    confusion = {(int(p[0]), int(p[1])): int(c) for p, c in zip(pairs, counts)}
    agreement = 100.0 * float(np.count_nonzero(a.cells == b.cells)) / total if total else 100.0
    return GridComparison(agreement=agreement, cells=total, confusion=confusion)

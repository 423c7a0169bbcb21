"""Vertical-scanner simulator over a SceneSpec.

The scene is reduced to the infinite floor (z = 0) and ceiling planes plus a
list of finite rectangles: wall pieces around door holes, closed door panels
and the five visible faces of every furniture box. Every ray returns the
nearest hit within range.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.core.errors import PoseInsideGeometry
from app.core.geometry import Label, Pose
from app.core.labeling import LabeledCloud
from app.core.rearrangement import OrganizedScan
from app.simulation.scene import SceneSpec, SensorSpec

logger = logging.getLogger(__name__)

FLOOR_SURFACE = 0
CEILING_SURFACE = 1
PANEL_MARGIN = 0.02
MIN_RANGE = 1e-6


@dataclass(frozen=True)
class Rect:
    """Planar rectangle ``origin + a * axis_u + b * axis_v`` for a in [0, size_u], b in [0, size_v]."""

    surface_id: int
    label: Label
    origin: np.ndarray
    axis_u: np.ndarray
    axis_v: np.ndarray
    size_u: float
    size_v: float

    @property
    def normal(self) -> np.ndarray:
        return np.cross(self.axis_u, self.axis_v)


@dataclass
class SimulatedFrame:
    scan: OrganizedScan
    labels: np.ndarray
    surface_ids: np.ndarray
    normals: np.ndarray
    pose: Pose

    def __len__(self) -> int:
        return len(self.scan)

    def truth_cloud(self) -> LabeledCloud:
        """Ground truth in the robot frame, aligned point by point with the scan."""
        return LabeledCloud(
            points=self.scan.robot_points(),
            labels=self.labels,
            frame_id="robot",
            timestamp=self.scan.timestamp,
            surface_ids=self.surface_ids,
            normals=self.normals,
        )


def _vertical(surface_id: int, label: Label, start: np.ndarray, direction: np.ndarray,
              u0: float, u1: float, z0: float, z1: float) -> Rect:
    origin = np.array([start[0] + direction[0] * u0, start[1] + direction[1] * u0, z0])
    return Rect(surface_id, label, origin, np.array([direction[0], direction[1], 0.0]),
                np.array([0.0, 0.0, 1.0]), u1 - u0, z1 - z0)


def scene_surfaces(scene: SceneSpec) -> List[Rect]:
    """Finite surfaces of the scene; ids 0 and 1 are reserved for floor and ceiling."""
    rects: List[Rect] = []

    def add(*args) -> None:
        rects.append(_vertical(len(rects) + 2, *args))

    for index, wall in enumerate(scene.walls):
        start = np.asarray(wall.start, dtype=float)
        direction = (np.asarray(wall.end, dtype=float) - start) / wall.length
        left = np.array([-direction[1], direction[0]])
        start = start + left * (wall.thickness / 2.0)
        top = wall.height or scene.ceiling_height
        cursor = 0.0
        for door in sorted((d for d in scene.doors if d.wall == index), key=lambda d: d.offset):
            if door.offset > cursor:
                add(Label.WALL, start, direction, cursor, door.offset, 0.0, top)
            add(Label.WALL, start, direction, door.offset, door.offset + door.width, door.lintel, top)
            if door.kind == "closed":
                behind = start - left * door.recess
                add(
                    Label.DOOR,
                    behind,
                    direction,
                    door.offset - PANEL_MARGIN,
                    door.offset + door.width + PANEL_MARGIN,
                    0.0,
                    door.lintel,
                )
            cursor = door.offset + door.width
        if cursor < wall.length:
            add(Label.WALL, start, direction, cursor, wall.length, 0.0, top)

    for box in scene.furniture:
        lo, hi = np.asarray(box.min, dtype=float), np.asarray(box.max, dtype=float)
        corners = [(lo[0], lo[1]), (hi[0], lo[1]), (hi[0], hi[1]), (lo[0], hi[1])]
        for (x0, y0), (x1, y1) in zip(corners, corners[1:] + corners[:1]):
            start = np.array([x0, y0])
            length = float(np.hypot(x1 - x0, y1 - y0))
            direction = np.array([x1 - x0, y1 - y0]) / length
            add(Label.CLUTTER, start, direction, 0.0, length, lo[2], hi[2])
        rects.append(
            Rect(len(rects) + 2, Label.CLUTTER, np.array([lo[0], lo[1], hi[2]]), np.array([1.0, 0.0, 0.0]),
                 np.array([0.0, 1.0, 0.0]), hi[0] - lo[0], hi[1] - lo[1])
        )
    return rects


def cast_rays(
    surfaces: Sequence[Rect], ceiling_height: float, origin: np.ndarray, directions: np.ndarray, max_range: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Nearest hit per unit ray: range (inf on a miss), surface id, label and world normal."""
    n = len(directions)
    best = np.full(n, np.inf)
    surface = np.full(n, -1, dtype=np.int32)
    label = np.full(n, Label.CLUTTER, dtype=np.uint8)
    normal = np.zeros((n, 3))

    dz = directions[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_floor = np.where(dz < 0, -origin[2] / dz, np.inf)
        t_ceiling = np.where(dz > 0, (ceiling_height - origin[2]) / dz, np.inf)
    for t, sid, lab, nrm in (
        (t_floor, FLOOR_SURFACE, Label.FLOOR, (0.0, 0.0, 1.0)),
        (t_ceiling, CEILING_SURFACE, Label.CEILING, (0.0, 0.0, -1.0)),
    ):
        closer = t < best
        best[closer], surface[closer], label[closer] = t[closer], sid, lab
        normal[closer] = nrm

    for rect in surfaces:
        rect_normal = rect.normal
        denom = directions @ rect_normal
        facing = np.abs(denom) > 1e-12
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(facing, float((rect.origin - origin) @ rect_normal) / denom, np.inf)
        candidate = facing & (t > MIN_RANGE) & (t < best)
        if not np.any(candidate):
            continue
        idx = np.flatnonzero(candidate)
        local = origin + directions[idx] * t[idx, None] - rect.origin
        u = local @ rect.axis_u
        v = local @ rect.axis_v
        inside = (u >= 0.0) & (u <= rect.size_u) & (v >= 0.0) & (v <= rect.size_v)
        hit = idx[inside]
        best[hit], surface[hit], label[hit] = t[hit], rect.surface_id, rect.label
        normal[hit] = rect_normal

    best[best > max_range] = np.inf
    return best, surface, label, normal


def check_pose(scene: SceneSpec, sensor_origin: np.ndarray) -> None:
    x, y, z = sensor_origin
    if not 0.0 < z < scene.ceiling_height:
        raise PoseInsideGeometry(f"Sensor height {z:.3f} m is outside the floor-ceiling gap")
    if scene.walls and not scene.encloses(x, y):
        raise PoseInsideGeometry(f"Sensor at ({x:.3f}, {y:.3f}) lies outside the scene")
    for box in scene.furniture:
        if all(lo <= c <= hi for lo, hi, c in zip(box.min, box.max, sensor_origin)):
            raise PoseInsideGeometry(f"Sensor at ({x:.3f}, {y:.3f}, {z:.3f}) is inside {box.name!r}")


def ray_directions(sensor: SensorSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Unit rays in the raw sensor frame, ring-major, and the ring of each."""
    elevation = sensor.elevations()[:, None]
    azimuth = (2.0 * np.pi * np.arange(sensor.azimuth_steps) / sensor.azimuth_steps)[None, :]
    directions = np.stack(
        [
            np.cos(elevation) * np.cos(azimuth),
            np.broadcast_to(np.sin(elevation), (sensor.n_beams, sensor.azimuth_steps)),
            np.cos(elevation) * np.sin(azimuth),
        ],
        axis=-1,
    ).reshape(-1, 3)
    rings = np.repeat(np.arange(sensor.n_beams), sensor.azimuth_steps)
    return directions, rings


def simulate_frame(
    scene: SceneSpec,
    sensor: SensorSpec,
    pose: Pose,
    seed: int = 0,
    surfaces: Optional[Sequence[Rect]] = None,
) -> SimulatedFrame:
    """One revolution of the vertical scanner from a robot pose in the world frame."""
    sensor_to_robot = sensor.sensor_to_robot()
    sensor_pose = pose.compose(sensor_to_robot)
    origin = sensor_pose.translation_array()
    check_pose(scene, origin)

    surfaces = scene_surfaces(scene) if surfaces is None else surfaces
    directions, rings = ray_directions(sensor)
    world_dirs = directions @ sensor_pose.matrix().T
    ranges, surface_ids, labels, normals = cast_rays(
        surfaces, scene.ceiling_height, origin, world_dirs, sensor.max_range
    )
    hit = np.isfinite(ranges)
    ranges = ranges[hit]
    if sensor.noise_sigma > 0:
        ranges = ranges + np.random.default_rng(seed).normal(0.0, sensor.noise_sigma, size=len(ranges))

    positions = directions[hit] * ranges[:, None]
    scan = OrganizedScan(
        positions=positions,
        rings=rings[hit],
        n_beams=sensor.n_beams,
        sensor_to_robot=sensor_to_robot,
        timestamp=pose.timestamp,
    )
    robot_normals = normals[hit] @ pose.matrix()
    logger.debug(f"Simulated frame at t={pose.timestamp:.3f}: {len(scan)} of {len(directions)} rays returned")
    return SimulatedFrame(
        scan=scan,
        labels=labels[hit],
        surface_ids=surface_ids[hit],
        normals=robot_normals,
        pose=pose,
    )


def trajectory_poses(waypoints: Sequence[Tuple[float, float, float]], n_frames: int, frame_rate: float) -> List[Pose]:
    """Evenly spaced robot poses along the ``(x, y, yaw)`` polyline, one per tick."""
    points = np.asarray(waypoints, dtype=float).reshape(-1, 3)
    if len(points) == 0:
        raise ValueError("trajectory needs at least one waypoint")
    steps = np.hypot(np.diff(points[:, 0]), np.diff(points[:, 1]))
    travelled = np.concatenate([[0.0], np.cumsum(steps)])
    total = float(travelled[-1])
    targets = np.linspace(0.0, total, n_frames) if n_frames > 1 else np.zeros(1)

    poses = []
    for k, s in enumerate(targets):
        if total > 0.0:
            x, y, yaw = (float(np.interp(s, travelled, points[:, j])) for j in range(3))
        else:
            x, y, yaw = (float(v) for v in points[0])
        poses.append(Pose.from_xyz_yaw(x, y, 0.0, yaw, timestamp=k / frame_rate))
    return poses


def trajectory_through(
    scene: SceneSpec,
    sensor: SensorSpec,
    waypoints: Optional[Sequence[Tuple[float, float, float]]] = None,
    n_frames: Optional[int] = None,
    frame_rate: Optional[float] = None,
    seed: int = 0,
) -> List[Tuple[Pose, SimulatedFrame]]:
    """Simulate one frame per tick along the waypoints (scene defaults when omitted)."""
    waypoints = scene.waypoints if waypoints is None else waypoints
    poses = trajectory_poses(
        waypoints,
        scene.frames if n_frames is None else n_frames,
        scene.frame_rate if frame_rate is None else frame_rate,
    )
    surfaces = scene_surfaces(scene)
    frames = [(pose, simulate_frame(scene, sensor, pose, seed=seed + k, surfaces=surfaces)) for k, pose in enumerate(poses)]
    logger.info(f"Simulated {len(frames)} frames, {sum(len(f) for _, f in frames)} points")
    return frames

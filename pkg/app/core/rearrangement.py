"""Per-frame rearrangement of a vertical-scanner frame.

Strips the floor (height filter) and the ceiling (constrained RANSAC), splits
the remainder into two half-ring point lines per emitter and resamples every
line to a fixed length.

Beam angles and half-ring sides are computed in the raw sensor frame (spin
axis = sensor y). Everything else runs in the gravity-aligned robot frame.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.cluster.vq import kmeans2

from app.core.errors import DegenerateInput, EmptyLine, NoCeilingFound, ZeroRange
from app.core.geometry import PlaneModel, Point3, Pose, fit_plane_tls, sample_triples

logger = logging.getLogger(__name__)

CEILING_SCORE_SAMPLES = 2048


@dataclass(frozen=True)
class RawPoint:
    position: Point3
    ring: int


@dataclass
class OrganizedScan:
    """One frame of the vertical scanner.

    ``positions`` is ``(N, 3)`` in the raw sensor frame; ``rings`` holds the
    emitter index per point or ``None`` when the source carried no ring channel.
    """

    positions: np.ndarray
    rings: Optional[np.ndarray] = None
    n_beams: int = 32
    sensor_to_robot: Pose = field(default_factory=Pose)
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        if self.n_beams < 1:
            raise ValueError("n_beams must be >= 1")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("Scan positions must be finite")
        if self.rings is not None:
            self.rings = np.asarray(self.rings, dtype=np.int64).reshape(-1)
            if len(self.rings) != len(self.positions):
                raise ValueError("rings and positions differ in length")
            if len(self.rings) and (self.rings.min() < 0 or self.rings.max() >= self.n_beams):
                raise ValueError(f"ring index outside [0, {self.n_beams})")

    def __len__(self) -> int:
        return len(self.positions)

    @classmethod
    def from_raw_points(cls, points: Sequence[RawPoint], **kwargs) -> "OrganizedScan":
        positions = np.array([p.position.as_array() for p in points], dtype=float).reshape(-1, 3)
        rings = np.array([p.ring for p in points], dtype=np.int64)
        return cls(positions=positions, rings=rings, **kwargs)

    def robot_points(self) -> np.ndarray:
        return self.sensor_to_robot.apply(self.positions)


@dataclass
class PointLine:
    """Points of one half-ring, robot frame, sorted by descending z.

    ``azimuth`` is the in-ring angular position of each point and ``indices``
    refers back into the frame the line was cut from.
    """

    points: np.ndarray
    ring: int
    side: int
    beam_angle: float
    azimuth: np.ndarray
    indices: np.ndarray

    def __len__(self) -> int:
        return len(self.points)

    @property
    def key(self) -> Tuple[int, int]:
        return self.ring, self.side

    @classmethod
    def from_points(cls, points: np.ndarray, ring: int = 0, side: int = 0, beam_angle: float = 0.0) -> "PointLine":
        """Build a line from points already in angular order (sorted by descending z)."""
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        n = len(points)
        return cls(
            points=points,
            ring=ring,
            side=side,
            beam_angle=beam_angle,
            azimuth=np.arange(n, dtype=float),
            indices=np.arange(n, dtype=np.int64),
        )


@dataclass
class CeilingResult:
    plane: PlaneModel
    ceiling_idx: np.ndarray
    remainder_idx: np.ndarray

    @property
    def height(self) -> float:
        return -self.plane.d / self.plane.normal[2]


def remove_floor(points: np.ndarray, z_floor: float) -> Tuple[np.ndarray, np.ndarray]:
    """Split robot-frame points into (floor, rest) index arrays; floor is z <= z_floor."""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    is_floor = points[:, 2] <= z_floor
    return np.flatnonzero(is_floor), np.flatnonzero(~is_floor)


def extract_ceiling(
    points: np.ndarray,
    angle_tol: float,
    dist_tol: float,
    min_height: float,
    iterations: int = 200,
    min_fraction: float = 0.05,
    seed: int = 0,
) -> CeilingResult:
    """Largest RANSAC plane with a near-vertical normal above ``min_height``.

    Indices in the result refer to ``points``. ``angle_tol`` is in degrees.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    candidates = np.flatnonzero(points[:, 2] > min_height)
    if len(candidates) < 3:
        raise NoCeilingFound(f"only {len(candidates)} points above {min_height} m")

    rng = np.random.default_rng(seed)
    cos_tol = math.cos(math.radians(angle_tol))
    cand_pts = points[candidates]

    if len(cand_pts) > CEILING_SCORE_SAMPLES:
        score_pts = cand_pts[np.sort(rng.choice(len(cand_pts), CEILING_SCORE_SAMPLES, replace=False))]
    else:
        score_pts = cand_pts

    triples = sample_triples(rng, len(cand_pts), iterations)
    p0, p1, p2 = cand_pts[triples[:, 0]], cand_pts[triples[:, 1]], cand_pts[triples[:, 2]]
    normals = np.cross(p1 - p0, p2 - p0)
    lengths = np.linalg.norm(normals, axis=1)
    valid = lengths > 1e-12
    normals[valid] /= lengths[valid, None]
    normals[normals[:, 2] < 0] *= -1.0
    valid &= normals[:, 2] >= cos_tol
    if not np.any(valid):
        raise NoCeilingFound("no horizontal plane hypothesis among RANSAC samples")

    normals = normals[valid]
    offsets = -np.einsum("ij,ij->i", normals, p0[valid])
    heights = -offsets / normals[:, 2]
    counts = (np.abs(score_pts @ normals.T + offsets) <= dist_tol).sum(axis=0)
    counts[heights <= min_height] = -1
    best = int(np.argmax(counts))
    if counts[best] < 0:
        raise NoCeilingFound(f"no horizontal plane above {min_height} m")

    plane = PlaneModel.from_normal(normals[best], offsets[best])
    inliers = np.abs(plane.distances(cand_pts)) <= dist_tol
    try:
        refined = fit_plane_tls(cand_pts[inliers])
        if refined.normal[2] < 0:
            refined = refined.flipped()
        tilt = math.degrees(refined.angle_to((0.0, 0.0, 1.0)))
        if tilt <= angle_tol and -refined.d / refined.normal[2] > min_height:
            plane = refined
    except DegenerateInput:
        logger.debug("Ceiling refit skipped: inliers degenerate")

    distances = np.abs(plane.distances(points))
    is_ceiling = distances <= dist_tol
    count = int(is_ceiling.sum())
    if count < min_fraction * len(points):
        raise NoCeilingFound(
            f"best horizontal plane has {count} inliers, below {min_fraction:.0%} of {len(points)} points"
        )
    return CeilingResult(
        plane=plane.with_inliers(count),
        ceiling_idx=np.flatnonzero(is_ceiling),
        remainder_idx=np.flatnonzero(~is_ceiling),
    )


def beam_angle(p: Point3 | Sequence[float]) -> float:
    """Angle between the spin axis (sensor y) and the ray: atan2(sqrt(x²+z²), y)."""
    x, y, z = (p.x, p.y, p.z) if isinstance(p, Point3) else (float(p[0]), float(p[1]), float(p[2]))
    if x == 0.0 and y == 0.0 and z == 0.0:
        raise ZeroRange("beam angle of the zero vector is undefined")
    return math.atan2(math.hypot(x, z), y)


def beam_angles(positions: np.ndarray) -> np.ndarray:
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    return np.arctan2(np.hypot(positions[:, 0], positions[:, 2]), positions[:, 1])


def recover_rings(positions: np.ndarray, n_beams: int) -> np.ndarray:
    """Ring index per point from 1D k-means over beam angle, seeded uniformly.

    Rings are numbered by ascending cluster centre.
    """
    angles = beam_angles(positions)
    if len(angles) == 0:
        return np.zeros(0, dtype=np.int64)
    k = min(n_beams, len(np.unique(angles)))
    seeds = np.linspace(angles.min(), angles.max(), k).reshape(-1, 1)
    centroids, labels = kmeans2(angles.reshape(-1, 1), seeds, iter=20, minit="matrix", missing="warn")
    rank = np.empty(k, dtype=np.int64)
    rank[np.argsort(centroids[:, 0], kind="stable")] = np.arange(k)
    return rank[labels]


def half_ring_sides(positions: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Side (0/1) and in-ring angular position of raw sensor-frame points.

    Side 0 holds azimuth phi = atan2(z, x) in [0, pi), side 1 the rest.
    """
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    phi = np.arctan2(positions[:, 2], positions[:, 0])
    side = np.where((phi >= 0.0) & (phi < math.pi), 0, 1)
    azimuth = np.where(side == 1, np.mod(phi, 2.0 * math.pi), phi)
    return side.astype(np.int64), azimuth


def partition_into_lines(scan: OrganizedScan, keep: Optional[np.ndarray] = None) -> List[PointLine]:
    """Cut the kept points of a scan into at most ``2 * n_beams`` point lines.

    Lines are returned ordered by (side, beam_angle, ring) so consecutive lines
    are spatial neighbours.
    """
    keep = np.arange(len(scan), dtype=np.int64) if keep is None else np.asarray(keep, dtype=np.int64)
    if len(keep) == 0:
        return []
    rings = scan.rings if scan.rings is not None else recover_rings(scan.positions, scan.n_beams)
    raw = scan.positions[keep]
    robot = scan.sensor_to_robot.apply(raw)
    sides, azimuth = half_ring_sides(raw)
    angles = beam_angles(raw)
    ring_of = rings[keep]

    group_key = ring_of * 2 + sides
    order = np.lexsort((keep, group_key))
    boundaries = np.flatnonzero(np.diff(group_key[order])) + 1

    lines: List[PointLine] = []
    for members in np.split(order, boundaries):
        z = robot[members, 2]
        members = members[np.lexsort((keep[members], -z))]
        lines.append(
            PointLine(
                points=robot[members],
                ring=int(ring_of[members[0]]),
                side=int(sides[members[0]]),
                beam_angle=float(np.median(angles[members])),
                azimuth=azimuth[members],
                indices=keep[members],
            )
        )
    lines.sort(key=lambda line: (line.side, line.beam_angle, line.ring))
    return lines


def resample_line(line: PointLine, target: int = 200) -> PointLine:
    """Pick exactly ``target`` points evenly spaced by rank in azimuth order.

    Spacing is by index, not by angle. Short lines repeat points; the
    descending-z order of the input is kept.
    """
    n = len(line)
    if n == 0:
        raise EmptyLine(f"line ring={line.ring} side={line.side} has no points")
    angular_order = np.lexsort((np.arange(n), line.azimuth))
    picks = np.sort(angular_order[(np.arange(target) * n) // target])
    return PointLine(
        points=line.points[picks],
        ring=line.ring,
        side=line.side,
        beam_angle=line.beam_angle,
        azimuth=line.azimuth[picks],
        indices=line.indices[picks],
    )

"""Shared geometric vocabulary: points, labels, poses, planes and rigid transforms.

Frames are right-handed. The world and robot frames are gravity aligned with
+z up; the raw sensor frame of the vertical scanner spins about its y axis.
Batch operations take ``(N, 3)`` float arrays; the scalar operations work on
the immutable value types below.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from app.core.errors import DegenerateInput, InvalidPose, TimestampOutOfRange

logger = logging.getLogger(__name__)

QUATERNION_TOLERANCE = 1e-6
NORMAL_TOLERANCE = 1e-9


class Label(IntEnum):
    """Semantic label; the integer value is the on-disk byte."""

    FLOOR = 0
    CEILING = 1
    WALL = 2
    DOOR = 3
    CLUTTER = 4


@dataclass(frozen=True)
class Point3:
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ValueError(f"Point coordinates must be finite, got ({self.x}, {self.y}, {self.z})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "Point3":
        return cls(float(values[0]), float(values[1]), float(values[2]))


@dataclass(frozen=True)
class Pose:
    """Rigid transform with a timestamp.

    The rotation is stored as a unit quaternion in (w, x, y, z) order.
    """

    translation: Point3 = field(default_factory=lambda: Point3(0.0, 0.0, 0.0))
    rotation: Tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        if len(self.rotation) != 4 or not all(math.isfinite(v) for v in self.rotation):
            raise InvalidPose(f"Quaternion must hold four finite values, got {self.rotation}")
        norm = math.sqrt(sum(v * v for v in self.rotation))
        if abs(norm - 1.0) > QUATERNION_TOLERANCE:
            raise InvalidPose(f"Quaternion norm {norm:.9f} is not within {QUATERNION_TOLERANCE} of 1")
        if not math.isfinite(self.timestamp):
            raise InvalidPose("Pose timestamp must be finite")

    @classmethod
    def from_rotation(cls, translation: Sequence[float], rotation: Rotation, timestamp: float = 0.0) -> "Pose":
        x, y, z, w = rotation.as_quat()
        norm = math.sqrt(w * w + x * x + y * y + z * z)
        return cls(
            translation=Point3.from_array(translation),
            rotation=(w / norm, x / norm, y / norm, z / norm),
            timestamp=float(timestamp),
        )

    @classmethod
    def from_xyz_yaw(cls, x: float, y: float, z: float, yaw: float, timestamp: float = 0.0) -> "Pose":
        return cls.from_rotation((x, y, z), Rotation.from_euler("z", yaw), timestamp)

    def as_rotation(self) -> Rotation:
        w, x, y, z = self.rotation
        return Rotation.from_quat([x, y, z, w])

    def matrix(self) -> np.ndarray:
        return self.as_rotation().as_matrix()

    def translation_array(self) -> np.ndarray:
        return self.translation.as_array()

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform an ``(N, 3)`` array: ``R p + t``."""
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        return points @ self.matrix().T + self.translation_array()

    def inverse(self) -> "Pose":
        inv = self.as_rotation().inv()
        return Pose.from_rotation(-inv.apply(self.translation_array()), inv, self.timestamp)

    def compose(self, other: "Pose") -> "Pose":
        """Return ``self ∘ other`` (apply ``other`` first); keeps this pose's timestamp."""
        rotation = self.as_rotation() * other.as_rotation()
        translation = self.as_rotation().apply(other.translation_array()) + self.translation_array()
        return Pose.from_rotation(translation, rotation, self.timestamp)

    def with_timestamp(self, timestamp: float) -> "Pose":
        return Pose(self.translation, self.rotation, float(timestamp))


@dataclass(frozen=True)
class PlaneModel:
    """Plane ``{p : normal·p + d = 0}`` with inlier bookkeeping."""

    normal: Tuple[float, float, float]
    d: float
    inlier_count: int = 0

    def __post_init__(self) -> None:
        norm = math.sqrt(sum(v * v for v in self.normal))
        if abs(norm - 1.0) > NORMAL_TOLERANCE:
            raise ValueError(f"Plane normal must be unit length, got norm {norm}")
        if self.inlier_count < 0:
            raise ValueError("inlier_count must be non-negative")

    @classmethod
    def from_normal(cls, normal: Sequence[float], d: float, inlier_count: int = 0) -> "PlaneModel":
        n = np.asarray(normal, dtype=float)
        length = float(np.linalg.norm(n))
        if length == 0.0:
            raise DegenerateInput("Plane normal has zero length")
        n = n / length
        return cls((float(n[0]), float(n[1]), float(n[2])), float(d) / length, int(inlier_count))

    @classmethod
    def through_point(cls, normal: Sequence[float], point: Sequence[float], inlier_count: int = 0) -> "PlaneModel":
        n = np.asarray(normal, dtype=float)
        n = n / np.linalg.norm(n)
        return cls.from_normal(n, -float(n @ np.asarray(point, dtype=float)), inlier_count)

    def normal_array(self) -> np.ndarray:
        return np.array(self.normal, dtype=float)

    def distances(self, points: np.ndarray) -> np.ndarray:
        """Signed distances of an ``(N, 3)`` array."""
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        return points @ self.normal_array() + self.d

    def flipped(self) -> "PlaneModel":
        return PlaneModel((-self.normal[0], -self.normal[1], -self.normal[2]), -self.d, self.inlier_count)

    def oriented_toward(self, point: Sequence[float]) -> "PlaneModel":
        """Return the plane with its normal pointing to the side holding ``point``."""
        if float(self.distances(np.asarray(point, dtype=float))[0]) < 0.0:
            return self.flipped()
        return self

    def with_inliers(self, inlier_count: int) -> "PlaneModel":
        return PlaneModel(self.normal, self.d, int(inlier_count))

    def angle_to(self, axis: Sequence[float]) -> float:
        """Unsigned angle in radians between the normal line and ``axis``."""
        a = np.asarray(axis, dtype=float)
        cos = abs(float(self.normal_array() @ a)) / float(np.linalg.norm(a))
        return math.acos(min(1.0, cos))


def transform_point(pose: Pose, p: Point3) -> Point3:
    """Return ``R·p + t``."""
    return Point3.from_array(pose.apply(p.as_array())[0])


def point_plane_distance(plane: PlaneModel, p: Point3) -> float:
    """Signed distance, positive on the side the normal points toward."""
    return float(plane.normal[0] * p.x + plane.normal[1] * p.y + plane.normal[2] * p.z + plane.d)


def fit_plane_tls(points: np.ndarray, inlier_count: int | None = None) -> PlaneModel:
    """Total-least-squares plane: normal is the smallest covariance eigenvector."""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(points) < 3:
        raise DegenerateInput(f"Need at least 3 points for a plane, got {len(points)}")
    centroid = points.mean(axis=0)
    centered = points - centroid
    eigvals, eigvecs = np.linalg.eigh(centered.T @ centered)
    if eigvals[2] <= 0.0 or eigvals[1] / eigvals[2] < 1e-9:
        raise DegenerateInput("Points are collinear")
    normal = eigvecs[:, 0]
    count = len(points) if inlier_count is None else inlier_count
    return PlaneModel.through_point(normal, centroid, count)


def sample_triples(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    """Draw ``k`` index triples of three distinct values in ``[0, n)``."""
    if n < 3:
        raise DegenerateInput(f"Need at least 3 points to sample triples, got {n}")
    i = rng.integers(0, n, size=k)
    j = rng.integers(0, n - 1, size=k)
    j = j + (j >= i)
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    m = rng.integers(0, n - 2, size=k)
    m = m + (m >= lo)
    m = m + (m >= hi)
    return np.stack([i, j, m], axis=1)


def horizontal_chart(normal: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Orthonormal in-plane axes (u, v) for a plane normal.

    Vertical planes get u horizontal and v = +z; near-horizontal planes get x/y.
    """
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    if abs(n[2]) > math.cos(math.radians(45.0)):
        return np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
    u = np.array([-n[1], n[0], 0.0])
    u = u / np.linalg.norm(u)
    v = np.cross(n, u)
    if v[2] < 0:
        v = -v
    return u, v


class Trajectory:
    """Time-ordered poses with linear/spherical-linear interpolation."""

    def __init__(self, poses: Iterable[Pose]) -> None:
        self.poses: List[Pose] = sorted(poses, key=lambda pose: pose.timestamp)
        if not self.poses:
            raise ValueError("Trajectory needs at least one pose")
        self.timestamps = np.array([pose.timestamp for pose in self.poses], dtype=float)
        if np.any(np.diff(self.timestamps) <= 0.0):
            raise ValueError("Trajectory timestamps must be strictly increasing")
        self._translations = np.array([pose.translation_array() for pose in self.poses])
        self._rotations = Rotation.concatenate([pose.as_rotation() for pose in self.poses])

    def __len__(self) -> int:
        return len(self.poses)

    @property
    def start(self) -> float:
        return float(self.timestamps[0])

    @property
    def end(self) -> float:
        return float(self.timestamps[-1])

    def covers(self, timestamp: float) -> bool:
        return self.start <= timestamp <= self.end

    def pose_at(self, timestamp: float) -> Pose:
        if not self.covers(timestamp):
            raise TimestampOutOfRange(
                f"Timestamp {timestamp:.6f} outside trajectory span [{self.start:.6f}, {self.end:.6f}]"
            )
        if len(self.poses) == 1:
            return self.poses[0].with_timestamp(timestamp)
        idx = int(np.searchsorted(self.timestamps, timestamp, side="right")) - 1
        idx = min(max(idx, 0), len(self.poses) - 2)
        t0, t1 = self.timestamps[idx], self.timestamps[idx + 1]
        ratio = float((timestamp - t0) / (t1 - t0))
        if ratio <= 0.0:
            return self.poses[idx].with_timestamp(timestamp)
        if ratio >= 1.0:
            return self.poses[idx + 1].with_timestamp(timestamp)
        translation = (1.0 - ratio) * self._translations[idx] + ratio * self._translations[idx + 1]
        slerp = Slerp([t0, t1], self._rotations[idx : idx + 2])
        return Pose.from_rotation(translation, slerp([timestamp])[0], timestamp)

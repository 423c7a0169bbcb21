"""Per-frame semantic labels: floor, ceiling, wall, door and clutter."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Literal, Mapping, Optional, Sequence, Tuple

import numpy as np

from app.core.geometry import Label, Pose
from app.core.rearrangement import PointLine
from app.core.wall_detection import WallPlane

logger = logging.getLogger(__name__)

DoorKind = Literal["open", "closed"]


def _empty_anchors() -> np.ndarray:
    return np.zeros((0, 3), dtype=float)


@dataclass
class LabeledCloud:
    """Points with one Label byte each, in the robot or world frame.

    Simulated clouds also carry the id and unit normal of the surface each
    point was sampled from; ``anchors`` are door lintel points.
    """

    points: np.ndarray
    labels: np.ndarray
    frame_id: str = "robot"
    timestamp: float = 0.0
    surface_ids: Optional[np.ndarray] = None
    normals: Optional[np.ndarray] = None
    anchors: np.ndarray = field(default_factory=_empty_anchors)

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        self.labels = np.asarray(self.labels, dtype=np.uint8).reshape(-1)
        self.anchors = np.asarray(self.anchors, dtype=float).reshape(-1, 3)
        if len(self.labels) != len(self.points):
            raise ValueError(f"{len(self.labels)} labels for {len(self.points)} points")
        if len(self.labels) and int(self.labels.max()) > max(Label):
            raise ValueError(f"label byte {int(self.labels.max())} is not a Label")
        if self.frame_id not in ("robot", "world"):
            raise ValueError(f"frame_id must be 'robot' or 'world', got {self.frame_id!r}")
        if self.surface_ids is not None:
            self.surface_ids = np.asarray(self.surface_ids, dtype=np.int32).reshape(-1)
            if len(self.surface_ids) != len(self.points):
                raise ValueError("surface_ids and points differ in length")
        if self.normals is not None:
            self.normals = np.asarray(self.normals, dtype=float).reshape(-1, 3)
            if len(self.normals) != len(self.points):
                raise ValueError("normals and points differ in length")

    def __len__(self) -> int:
        return len(self.points)

    def label_counts(self) -> Dict[Label, int]:
        counts = np.bincount(self.labels, minlength=len(Label))
        return {label: int(counts[label]) for label in Label}

    def points_of(self, label: Label) -> np.ndarray:
        return self.points[self.labels == label]

    def transformed(self, pose: Pose, frame_id: str = "world") -> "LabeledCloud":
        normals = None
        if self.normals is not None:
            normals = self.normals @ pose.matrix().T
        return LabeledCloud(
            points=pose.apply(self.points),
            labels=self.labels.copy(),
            frame_id=frame_id,
            timestamp=self.timestamp,
            surface_ids=None if self.surface_ids is None else self.surface_ids.copy(),
            normals=normals,
            anchors=pose.apply(self.anchors) if len(self.anchors) else _empty_anchors(),
        )

    @classmethod
    def concatenate(cls, clouds: Sequence["LabeledCloud"], frame_id: str = "world") -> "LabeledCloud":
        if not clouds:
            return cls(points=np.zeros((0, 3)), labels=np.zeros(0, dtype=np.uint8), frame_id=frame_id)
        with_surfaces = all(cloud.surface_ids is not None for cloud in clouds)
        with_normals = all(cloud.normals is not None for cloud in clouds)
        return cls(
            points=np.concatenate([cloud.points for cloud in clouds]),
            labels=np.concatenate([cloud.labels for cloud in clouds]),
            frame_id=frame_id,
            timestamp=clouds[0].timestamp,
            surface_ids=np.concatenate([cloud.surface_ids for cloud in clouds]) if with_surfaces else None,
            normals=np.concatenate([cloud.normals for cloud in clouds]) if with_normals else None,
            anchors=np.concatenate([cloud.anchors for cloud in clouds]),
        )


@dataclass
class DoorDetection:
    line_id: int
    lintel_z: float
    wall: WallPlane
    kind: DoorKind
    wall_z: float
    anchor: np.ndarray
    line_key: Tuple[int, int] = (0, 0)


def classify_door_line(
    line: PointLine,
    wall: WallPlane,
    delta_door: float = 0.02,
    h_min: float = 1.6,
    wall_band: float = 0.08,
    min_points: int = 10,
    door_recess_max: float = 0.20,
    line_id: int = 0,
) -> Optional[DoorDetection]:
    """Check a line for a doorway below the wall it belongs to.

    Scanning top to bottom, the line must run along the wall plane for at
    least ``min_points`` points and then either stop or stay behind the plane
    by more than ``delta_door`` to its end. The opening must start at or above
    ``h_min``.
    """
    n = len(line)
    if n == 0:
        return None
    normal = wall.model.normal_array()
    signed = wall.model.distances(line.points)
    behind = signed < -delta_door
    on_wall = ~behind & (signed <= wall_band)

    not_behind = np.flatnonzero(~behind)
    if len(not_behind) == 0:
        return None
    k = int(not_behind[-1]) + 1

    off_wall = np.flatnonzero(~on_wall[:k])
    run_start = int(off_wall[-1]) + 1 if len(off_wall) else 0
    if k - run_start < min_points:
        return None

    wall_z = float(line.points[k - 1, 2])
    if k == n:
        lintel_z = wall_z
        kind: DoorKind = "open"
    else:
        lintel_z = float(line.points[k, 2])
        depth = -signed[k:]
        if np.all(depth <= door_recess_max):
            kind = "closed"
        elif np.all(depth > door_recess_max):
            kind = "open"
        else:
            # recess and hollow mixed: a wall corner, not a doorway
            return None
    if lintel_z < h_min:
        return None

    edge = line.points[k - 1]
    anchor = edge - signed[k - 1] * normal
    logger.debug(f"Door ({kind}) on line {line_id} with lintel at {lintel_z:.3f} m")
    return DoorDetection(
        line_id=line_id,
        lintel_z=lintel_z,
        wall=wall,
        kind=kind,
        wall_z=wall_z,
        anchor=anchor,
        line_key=line.key,
    )


def detect_doors(
    lines: Sequence[PointLine],
    walls: Iterable[WallPlane],
    delta_door: float = 0.02,
    h_min: float = 1.6,
    wall_band: float = 0.08,
    min_points: int = 10,
    door_recess_max: float = 0.20,
) -> List[DoorDetection]:
    """Run the door rules on every line whose candidate joined a wall."""
    detections: List[DoorDetection] = []
    for wall in walls:
        for line_id in wall.member_lines:
            detection = classify_door_line(
                lines[line_id],
                wall,
                delta_door=delta_door,
                h_min=h_min,
                wall_band=wall_band,
                min_points=min_points,
                door_recess_max=door_recess_max,
                line_id=line_id,
            )
            if detection is not None:
                detections.append(detection)
    return detections


def label_frame(
    points: np.ndarray,
    floor_idx: np.ndarray,
    ceiling_idx: np.ndarray,
    walls: Sequence[WallPlane],
    raw_lines: Mapping[Tuple[int, int], PointLine],
    detections: Sequence[DoorDetection],
    z_floor: float = 0.10,
    wall_band: float = 0.08,
    delta_door: float = 0.02,
    door_recess_max: float = 0.20,
    timestamp: float = 0.0,
) -> LabeledCloud:
    """Label every robot-frame point of a frame exactly once.

    Precedence is door > wall > ceiling > floor > clutter.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    labels = np.full(len(points), Label.CLUTTER, dtype=np.uint8)
    labels[np.asarray(floor_idx, dtype=np.int64)] = Label.FLOOR
    labels[np.asarray(ceiling_idx, dtype=np.int64)] = Label.CEILING

    is_ceiling = np.zeros(len(points), dtype=bool)
    is_ceiling[np.asarray(ceiling_idx, dtype=np.int64)] = True
    eligible = (points[:, 2] > z_floor) & ~is_ceiling
    for wall in walls:
        near = np.abs(wall.model.distances(points)) <= wall_band
        labels[eligible & near] = Label.WALL

    for detection in detections:
        line = raw_lines.get(detection.line_key)
        if line is None or len(line) == 0:
            continue
        depth = -detection.wall.model.distances(line.points)
        recessed = (line.points[:, 2] <= detection.wall_z) & (depth > delta_door) & (depth <= door_recess_max)
        labels[line.indices[recessed]] = Label.DOOR

    anchors = np.array([d.anchor for d in detections], dtype=float).reshape(-1, 3)
    return LabeledCloud(points=points, labels=labels, frame_id="robot", timestamp=timestamp, anchors=anchors)

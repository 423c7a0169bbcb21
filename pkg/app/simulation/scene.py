"""Ground-truth scene and sensor descriptions for the scan simulator.

Scenes are stored as ``key = value`` text, for example::

    ceiling_height = 3.0
    wall.0.start = 0 -1.025
    wall.0.end = 14 -1.025
    door.0.wall = 0
    door.0.offset = 11.0
    door.0.kind = closed
    furniture.0.min = 1 1.6 0
    furniture.0.max = 2 2.3 1.2
    waypoint.0 = 1 0 0
    sensor.n_beams = 32

Walls are listed so that their left side faces the interior. A wall's start
and end trace its centre line and its visible face sits half the thickness
toward the interior; closed door panels are set back behind that face.
"""

from __future__ import annotations

import io
import logging
import math
from collections import defaultdict
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from scipy.spatial.transform import Rotation
from shapely.geometry import LineString, Point, box
from shapely.geometry.base import BaseGeometry
from shapely.ops import polygonize, unary_union

from app.core.errors import ParseError
from app.core.geometry import Pose

logger = logging.getLogger(__name__)

SCALAR_KEYS = ("ceiling_height", "frames", "frame_rate")

# sensor x -> robot z, sensor y -> robot x, sensor z -> robot y
SENSOR_AXES = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])


class WallSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    start: Tuple[float, float]
    end: Tuple[float, float]
    height: Optional[float] = Field(None, gt=0)
    thickness: float = Field(0.0, ge=0)

    @property
    def length(self) -> float:
        return math.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1])


class DoorSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    wall: int = Field(ge=0)
    offset: float = Field(ge=0)
    width: float = Field(0.9, gt=0)
    lintel: float = Field(2.1, gt=0)
    kind: Literal["open", "closed"] = "closed"
    recess: float = Field(0.04, gt=0)


class BoxSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = "box"
    min: Tuple[float, float, float]
    max: Tuple[float, float, float]

    @model_validator(mode="after")
    def _check_extent(self) -> "BoxSpec":
        if any(hi <= lo for lo, hi in zip(self.min, self.max)):
            raise ValueError(f"furniture {self.name!r}: max must exceed min on every axis")
        return self


class SensorSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_beams: int = Field(32, ge=1)
    fov_low: float = -15.0
    fov_high: float = 15.0
    azimuth_steps: int = Field(1800, ge=2)
    max_range: float = Field(30.0, gt=0)
    noise_sigma: float = Field(0.0, ge=0)
    mount_height: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _check_fov(self) -> "SensorSpec":
        if not -90.0 < self.fov_low <= self.fov_high < 90.0:
            raise ValueError("beam field of view must satisfy -90 < fov_low <= fov_high < 90")
        return self

    def elevations(self) -> np.ndarray:
        """Beam elevation per ring in radians; ring 0 points highest."""
        if self.n_beams == 1:
            return np.array([math.radians(0.5 * (self.fov_low + self.fov_high))])
        return np.radians(np.linspace(self.fov_high, self.fov_low, self.n_beams))

    def sensor_to_robot(self) -> Pose:
        return Pose.from_rotation((0.0, 0.0, self.mount_height), Rotation.from_matrix(SENSOR_AXES))


class SceneSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    ceiling_height: float = Field(3.0, gt=0)
    walls: List[WallSpec] = Field(default_factory=list)
    doors: List[DoorSpec] = Field(default_factory=list)
    furniture: List[BoxSpec] = Field(default_factory=list)
    waypoints: List[Tuple[float, float, float]] = Field(default_factory=list)
    frames: int = Field(40, ge=1)
    frame_rate: float = Field(10.0, gt=0)

    @model_validator(mode="after")
    def _check_layout(self) -> "SceneSpec":
        for i, door in enumerate(self.doors):
            if door.wall >= len(self.walls):
                raise ValueError(f"door {i} refers to missing wall {door.wall}")
            wall = self.walls[door.wall]
            if door.offset + door.width > wall.length + 1e-9:
                raise ValueError(f"door {i} extends past the end of wall {door.wall}")
            if door.lintel >= min(self.ceiling_height, wall.height or self.ceiling_height):
                raise ValueError(f"door {i} lintel must be below the ceiling")
        if self.walls:
            for item in self.furniture:
                inside = self.encloses(item.min[0], item.min[1], item.max[0], item.max[1])
                if not inside or item.max[2] >= self.ceiling_height:
                    raise ValueError(f"furniture {item.name!r} lies outside the room")
        return self

    def footprint(self) -> Tuple[np.ndarray, np.ndarray]:
        """Axis-aligned x-y bounds of the wall layout."""
        ends = np.array([w.start for w in self.walls] + [w.end for w in self.walls], dtype=float)
        return ends.min(axis=0), ends.max(axis=0)

    def floor_plan(self) -> Optional[BaseGeometry]:
        """Union of the closed areas the walls enclose, or None when they enclose nothing."""
        if not self.walls:
            return None
        network = unary_union([LineString([w.start, w.end]) for w in self.walls])
        cells = list(polygonize(network))
        if not cells:
            return None
        return unary_union(cells)

    def encloses(self, x0: float, y0: float, x1: Optional[float] = None, y1: Optional[float] = None) -> bool:
        """Whether a point, or the rectangle up to ``(x1, y1)``, lies inside the walls.

        Wall layouts that close no area fall back to their bounding box.
        """
        x1 = x0 if x1 is None else x1
        y1 = y0 if y1 is None else y1
        plan = self.floor_plan()
        if plan is None:
            low, high = self.footprint()
            return bool(low[0] <= x0 and x1 <= high[0] and low[1] <= y0 and y1 <= high[1])
        if x0 == x1 and y0 == y1:
            return plan.contains(Point(x0, y0))
        return plan.covers(box(x0, y0, x1, y1))


def standard_scene() -> SceneSpec:
    """Room (x 0..6) opening onto a corridor (x 6..14) with one open and one closed door."""
    return SceneSpec(
        ceiling_height=3.0,
        walls=[
            WallSpec(start=(0.0, -1.025), end=(14.0, -1.025)),
            WallSpec(start=(14.0, -1.025), end=(14.0, 1.025)),
            WallSpec(start=(14.0, 1.025), end=(6.0, 1.025)),
            WallSpec(start=(6.0, 1.025), end=(6.0, 2.525)),
            WallSpec(start=(6.0, 2.525), end=(0.0, 2.525)),
            WallSpec(start=(0.0, 2.525), end=(0.0, -1.025)),
        ],
        doors=[
            DoorSpec(wall=0, offset=11.0, width=0.9, lintel=2.1, kind="closed", recess=0.04),
            DoorSpec(wall=2, offset=4.1, width=0.9, lintel=2.1, kind="open"),
        ],
        furniture=[
            BoxSpec(name="cabinet", min=(1.0, 1.6, 0.0), max=(2.0, 2.3, 1.2)),
            BoxSpec(name="desk", min=(3.0, -0.9, 0.0), max=(4.2, -0.3, 0.75)),
            BoxSpec(name="shelf", min=(4.5, 1.5, 0.0), max=(5.5, 2.2, 1.8)),
        ],
        waypoints=[(1.0, 0.0, 0.0), (13.0, 0.0, 0.0)],
        frames=40,
        frame_rate=10.0,
    )


def _numbers(value: str, count: int, key: str) -> Tuple[float, ...]:
    parts = value.replace(",", " ").split()
    if len(parts) != count:
        raise ValueError(f"{key}: expected {count} numbers, got {value!r}")
    return tuple(float(p) for p in parts)


def parse_scene_text(text: str, source: Optional[Path] = None) -> Tuple[SceneSpec, SensorSpec]:
    raw = dotenv_values(stream=io.StringIO(text))
    scene: Dict[str, Any] = {}
    sensor: Dict[str, Any] = {}
    groups: Dict[str, Dict[int, Dict[str, Any]]] = {"wall": defaultdict(dict), "door": defaultdict(dict), "furniture": defaultdict(dict)}
    waypoints: Dict[int, Tuple[float, ...]] = {}
    try:
        for key, value in raw.items():
            if value is None:
                continue
            parts = key.strip().split(".")
            if parts[0] == "sensor" and len(parts) == 2:
                sensor[parts[1]] = value
            elif parts[0] == "waypoint" and len(parts) == 2:
                waypoints[int(parts[1])] = _numbers(value, 3, key)
            elif parts[0] in groups and len(parts) == 3:
                field_name = parts[2]
                if field_name in ("start", "end"):
                    groups[parts[0]][int(parts[1])][field_name] = _numbers(value, 2, key)
                elif field_name in ("min", "max"):
                    groups[parts[0]][int(parts[1])][field_name] = _numbers(value, 3, key)
                else:
                    groups[parts[0]][int(parts[1])][field_name] = value
            elif len(parts) == 1 and parts[0] in SCALAR_KEYS:
                scene[parts[0]] = value
            else:
                raise ValueError(f"unknown scene key {key!r}")
        for name, plural in (("wall", "walls"), ("door", "doors"), ("furniture", "furniture")):
            scene[plural] = [groups[name][i] for i in sorted(groups[name])]
        scene["waypoints"] = [waypoints[i] for i in sorted(waypoints)]
        return SceneSpec(**scene), SensorSpec(**sensor)
    except (ValueError, ValidationError) as e:
        raise ParseError(str(e), path=source) from e


def load_scene(path: Path) -> Tuple[SceneSpec, SensorSpec]:
    path = Path(path)
    if not path.exists():
        raise ParseError("scene file not found", path=path)
    scene, sensor = parse_scene_text(path.read_text(encoding="utf-8"), source=path)
    logger.info(f"Loaded scene {path}: {len(scene.walls)} walls, {len(scene.doors)} doors, {len(scene.furniture)} boxes")
    return scene, sensor


def _join(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def serialize_scene(scene: SceneSpec, sensor: Optional[SensorSpec] = None) -> str:
    lines = [
        "# furniture-free mapping scene",
        f"ceiling_height = {scene.ceiling_height!r}",
        f"frames = {scene.frames}",
        f"frame_rate = {scene.frame_rate!r}",
    ]
    for i, wall in enumerate(scene.walls):
        lines += [f"wall.{i}.start = {_join(wall.start)}", f"wall.{i}.end = {_join(wall.end)}"]
        if wall.height is not None:
            lines.append(f"wall.{i}.height = {wall.height!r}")
        if wall.thickness > 0:
            lines.append(f"wall.{i}.thickness = {wall.thickness!r}")
    for i, door in enumerate(scene.doors):
        for name in DoorSpec.model_fields:
            value = getattr(door, name)
            lines.append(f"door.{i}.{name} = {value!r}" if isinstance(value, float) else f"door.{i}.{name} = {value}")
    for i, item in enumerate(scene.furniture):
        lines += [
            f"furniture.{i}.name = {item.name}",
            f"furniture.{i}.min = {_join(item.min)}",
            f"furniture.{i}.max = {_join(item.max)}",
        ]
    for i, waypoint in enumerate(scene.waypoints):
        lines.append(f"waypoint.{i} = {_join(waypoint)}")
    for name, value in (sensor or SensorSpec()).model_dump().items():
        lines.append(f"sensor.{name} = {value!r}")
    return "\n".join(lines) + "\n"

"""Trajectory text files: ``timestamp tx ty tz qx qy qz qw`` per line, ``#`` comments."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Iterable

from app.core.errors import InvalidPose, ParseError
from app.core.geometry import Point3, Pose, Trajectory

logger = logging.getLogger(__name__)


def parse_trajectory_text(text: str, source: Path | None = None) -> Trajectory:
    poses = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 8:
            raise ParseError(f"expected 8 fields, got {len(fields)}", path=source, line=number)
        try:
            t, tx, ty, tz, qx, qy, qz, qw = (float(v) for v in fields)
            poses.append(Pose(Point3(tx, ty, tz), (qw, qx, qy, qz), t))
        except (ValueError, InvalidPose) as e:
            raise ParseError(str(e), path=source, line=number) from e
    if not poses:
        raise ParseError("trajectory holds no poses", path=source)
    try:
        return Trajectory(poses)
    except ValueError as e:
        raise ParseError(str(e), path=source) from e


def read_trajectory(path: Path) -> Trajectory:
    path = Path(path)
    if not path.exists():
        raise ParseError("trajectory file not found", path=path)
    trajectory = parse_trajectory_text(path.read_text(encoding="utf-8"), source=path)
    logger.info(f"Loaded {len(trajectory)} poses from {path} ({trajectory.start:.3f}..{trajectory.end:.3f} s)")
    return trajectory


def write_trajectory(path: Path, poses: Iterable[Pose]) -> Path:
    lines = ["# timestamp tx ty tz qx qy qz qw"]
    for pose in poses:
        w, x, y, z = pose.rotation
        t = pose.translation
        lines.append(" ".join(repr(float(v)) for v in (pose.timestamp, t.x, t.y, t.z, x, y, z, w)))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return Path(path)

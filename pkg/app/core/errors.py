"""Exception hierarchy shared by the mapping pipeline."""

from __future__ import annotations

from pathlib import Path
from typing import Optional


class FfmapError(Exception):
    """Base class for every error raised by the mapping pipeline."""


class InvalidPose(FfmapError):
    """Pose quaternion is not unit length or a coordinate is not finite."""


class ZeroRange(FfmapError):
    """Beam angle requested for the zero vector."""


class EmptyLine(FfmapError):
    """A point line without points was passed to an operation needing one."""


class LineTooShort(FfmapError):
    """Forward differences need at least two points."""


class NoCeilingFound(FfmapError):
    """No horizontal plane above the minimum height reached the inlier fraction."""


class DegenerateInput(FfmapError):
    """Fewer than three points, or all points collinear."""


class TimestampOutOfRange(FfmapError):
    """A frame timestamp lies outside the trajectory span."""


class EmptyCloud(FfmapError):
    """A grid was requested from a cloud without points."""


class PoseInsideGeometry(FfmapError):
    """Sensor origin is not in the free space of the scene."""


class ConfigError(FfmapError):
    """Invalid pipeline configuration value or key."""


class ParseError(FfmapError):
    """Input file could not be parsed; carries file and line context."""

    def __init__(self, message: str, path: Optional[Path] = None, line: Optional[int] = None) -> None:
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}"
            if line is not None:
                location = f"{location}:{line}"
            location = f"{location}: "
        super().__init__(f"{location}{message}")

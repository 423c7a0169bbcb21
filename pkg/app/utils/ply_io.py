"""PLY codec for scanner frames and labeled clouds."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from plyfile import PlyData, PlyElement

from app.core.errors import ParseError
from app.core.geometry import Pose
from app.core.labeling import LabeledCloud
from app.core.rearrangement import OrganizedScan

logger = logging.getLogger(__name__)


def _read_vertices(path: Path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise ParseError("PLY file not found", path=path)
    try:
        ply = PlyData.read(str(path))
        vertices = ply["vertex"].data
    except Exception as e:
        raise ParseError(f"unreadable PLY: {e}", path=path) from e
    missing = [name for name in ("x", "y", "z") if name not in vertices.dtype.names]
    if missing:
        raise ParseError(f"vertex element lacks {', '.join(missing)}", path=path)
    return vertices


def _xyz(vertices: np.ndarray) -> np.ndarray:
    return np.column_stack([vertices["x"], vertices["y"], vertices["z"]]).astype(float)


def frame_timestamp(path: Path) -> float:
    try:
        return float(Path(path).stem)
    except ValueError as e:
        raise ParseError("frame file name is not a timestamp in seconds", path=path) from e


def list_frames(directory: Path) -> List[Tuple[float, Path]]:
    """Frame files ``<seconds>.ply`` ordered by timestamp."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ParseError("frame directory not found", path=directory)
    frames = []
    for path in directory.glob("*.ply"):
        try:
            frames.append((frame_timestamp(path), path))
        except ParseError:
            logger.warning(f"Ignoring {path}: name is not a timestamp")
    return sorted(frames)


def read_frame(path: Path, n_beams: int = 32, sensor_to_robot: Optional[Pose] = None) -> OrganizedScan:
    """Raw sensor-frame scan with an optional ``ring`` property; the timestamp comes from the file name."""
    vertices = _read_vertices(path)
    rings = None
    if "ring" in vertices.dtype.names:
        rings = np.asarray(vertices["ring"], dtype=np.int64)
    try:
        return OrganizedScan(
            positions=_xyz(vertices),
            rings=rings,
            n_beams=n_beams,
            sensor_to_robot=sensor_to_robot or Pose(),
            timestamp=frame_timestamp(path),
        )
    except ValueError as e:
        raise ParseError(str(e), path=path) from e


def write_frame(path: Path, scan: OrganizedScan, text: bool = False) -> Path:
    fields = [("x", "f8"), ("y", "f8"), ("z", "f8")]
    if scan.rings is not None:
        fields.append(("ring", "u2"))
    vertices = np.empty(len(scan), dtype=fields)
    vertices["x"], vertices["y"], vertices["z"] = scan.positions.T
    if scan.rings is not None:
        vertices["ring"] = scan.rings
    PlyData([PlyElement.describe(vertices, "vertex")], text=text, byte_order="<").write(str(path))
    return Path(path)


def write_labeled_cloud(path: Path, cloud: LabeledCloud, text: bool = False) -> Path:
    """Points plus a ``label`` byte; surface ids and normals when the cloud has them."""
    fields = [("x", "f8"), ("y", "f8"), ("z", "f8"), ("label", "u1")]
    with_truth = cloud.surface_ids is not None and cloud.normals is not None
    if with_truth:
        fields += [("surface", "i4"), ("nx", "f4"), ("ny", "f4"), ("nz", "f4")]
    vertices = np.empty(len(cloud), dtype=fields)
    vertices["x"], vertices["y"], vertices["z"] = cloud.points.T
    vertices["label"] = cloud.labels
    if with_truth:
        vertices["surface"] = cloud.surface_ids
        vertices["nx"], vertices["ny"], vertices["nz"] = cloud.normals.T
    ply = PlyData(
        [PlyElement.describe(vertices, "vertex")],
        text=text,
        byte_order="<",
        comments=[f"frame {cloud.frame_id}"],
    )
    ply.write(str(path))
    logger.info(f"Wrote {len(cloud)} labeled points to {path}")
    return Path(path)


def read_labeled_cloud(path: Path, frame_id: str = "world") -> LabeledCloud:
    vertices = _read_vertices(path)
    names = vertices.dtype.names
    if "label" not in names:
        raise ParseError("vertex element lacks label", path=path)
    surface_ids = normals = None
    if all(name in names for name in ("surface", "nx", "ny", "nz")):
        surface_ids = np.asarray(vertices["surface"], dtype=np.int32)
        normals = np.column_stack([vertices["nx"], vertices["ny"], vertices["nz"]]).astype(float)
    try:
        return LabeledCloud(
            points=_xyz(vertices),
            labels=np.asarray(vertices["label"], dtype=np.uint8),
            frame_id=frame_id,
            surface_ids=surface_ids,
            normals=normals,
        )
    except ValueError as e:
        raise ParseError(str(e), path=path) from e

"""End-to-end run: frames -> labels -> world cloud -> grids -> metrics."""

from __future__ import annotations

import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import repeat
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.cluster import DBSCAN

from app.config import PipelineConfig, serialize_config, settings
from app.core.errors import EmptyCloud, ParseError
from app.core.evaluation import LabelMetrics, metrics, metrics_table
from app.core.geometry import Pose, Trajectory
from app.core.labeling import LabeledCloud
from app.core.map_builder import OccupancyGrid, build_furniture_free_grid, build_slice_grid, fuse_frames
from app.core.rearrangement import OrganizedScan
from app.services.artifact_repository import ArtifactRepository
from app.services.frame_classifier import FrameResult, classify_frame
from app.simulation.raycast import trajectory_through
from app.simulation.scene import SceneSpec, SensorSpec
from app.utils.ply_io import list_frames, read_frame, read_labeled_cloud
from app.utils.trajectory_io import read_trajectory

logger = logging.getLogger(__name__)


@dataclass
class RecordedSource:
    frames_dir: Path
    trajectory_path: Path
    truth_path: Optional[Path] = None
    sensor_to_robot: Pose = field(default_factory=lambda: SensorSpec().sensor_to_robot())


@dataclass
class SyntheticSource:
    scene: SceneSpec
    sensor: SensorSpec = field(default_factory=SensorSpec)
    seed: int = 0


Source = Union[RecordedSource, SyntheticSource]


@dataclass
class Statistic:
    average: float
    std: float
    min: float
    max: float

    @classmethod
    def of(cls, values: Sequence[float]) -> "Statistic":
        if len(values) == 0:
            return cls(0.0, 0.0, 0.0, 0.0)
        data = np.asarray(values, dtype=float)
        return cls(float(data.mean()), float(data.std()), float(data.min()), float(data.max()))


@dataclass
class TimingReport:
    """Per-frame run time and point counts, summarised as average / std / min / max."""

    rows: Dict[str, Statistic]

    @classmethod
    def from_frames(cls, results: Sequence[FrameResult]) -> "TimingReport":
        return cls(
            rows={
                "wall_door_ms": Statistic.of([r.wall_door_ms for r in results]),
                "frame_ms": Statistic.of([r.total_ms for r in results]),
                "points_in_cloud": Statistic.of([r.points_in_cloud for r in results]),
                "points_in_lines": Statistic.of([r.points_in_lines for r in results]),
            }
        )

    def to_text(self) -> str:
        lines = ["statistic\taverage\tstd\tmin\tmax"]
        for name, stat in self.rows.items():
            lines.append(f"{name}\t{stat.average:.2f}\t{stat.std:.2f}\t{stat.min:.2f}\t{stat.max:.2f}")
        return "\n".join(lines) + "\n"


@dataclass
class DoorRecord:
    """One door line from one frame, anchored in the world frame."""

    timestamp: float
    kind: str
    lintel_z: float
    anchor: Tuple[float, float, float]


@dataclass
class Door:
    """A doorway: the door lines of every frame whose anchors chain together.

    ``lintel_z`` is the median over the lines. A line crossing a jamb at an
    angle ends below the lintel, so single lines are not trusted for height.
    """

    kind: str
    lintel_z: float
    center: Tuple[float, float, float]
    width: float
    lines: int


def merge_doors(records: Sequence[DoorRecord], gap: float = 0.3) -> List[Door]:
    """Group door lines whose anchors lie within ``gap`` of each other in x-y."""
    if not records:
        return []
    xy = np.array([r.anchor[:2] for r in records], dtype=float)
    groups = DBSCAN(eps=gap, min_samples=1).fit_predict(xy)

    doors = []
    _, first = np.unique(groups, return_index=True)
    for group in groups[np.sort(first)]:
        members = [r for r, g in zip(records, groups) if g == group]
        kinds = Counter(r.kind for r in members)
        anchors = np.array([r.anchor for r in members], dtype=float)
        flat = anchors[:, :2] - anchors[:, :2].mean(axis=0)
        _, _, vt = np.linalg.svd(flat, full_matrices=False)
        along = flat @ vt[0]
        doors.append(
            Door(
                kind=max(("closed", "open"), key=lambda k: kinds.get(k, 0)),
                lintel_z=float(np.median([r.lintel_z for r in members])),
                center=tuple(float(v) for v in anchors.mean(axis=0)),
                width=float(along.max() - along.min()),
                lines=len(members),
            )
        )
    logger.info(f"Merged {len(records)} door lines into {len(doors)} doors")
    return doors


@dataclass
class PipelineResult:
    frames_total: int
    frames_processed: int
    cloud: LabeledCloud
    grids: Dict[str, OccupancyGrid]
    timing: TimingReport
    doors: List[Door]
    door_lines: List[DoorRecord]
    truth: Optional[LabeledCloud] = None
    metrics: Optional[List[LabelMetrics]] = None
    artifacts: Dict[str, Path] = field(default_factory=dict)

    @property
    def frames_skipped(self) -> int:
        return self.frames_total - self.frames_processed


def _load_recorded(source: RecordedSource, config: PipelineConfig) -> Tuple[List[OrganizedScan], Trajectory]:
    trajectory = read_trajectory(source.trajectory_path)
    scans = []
    for timestamp, path in list_frames(source.frames_dir):
        try:
            scans.append(read_frame(path, n_beams=config.n_beams, sensor_to_robot=source.sensor_to_robot))
        except ParseError as e:
            logger.warning(f"Skipping frame {path}: {e}")
    logger.info(f"Loaded {len(scans)} frames from {source.frames_dir}")
    return scans, trajectory


def _load_synthetic(source: SyntheticSource) -> Tuple[List[OrganizedScan], Trajectory, List[LabeledCloud]]:
    simulated = trajectory_through(source.scene, source.sensor, seed=source.seed)
    scans = [frame.scan for _, frame in simulated]
    truths = [frame.truth_cloud() for _, frame in simulated]
    return scans, Trajectory([pose for pose, _ in simulated]), truths


def classify_frames(scans: Sequence[OrganizedScan], config: PipelineConfig) -> List[Optional[FrameResult]]:
    """Classify frames in input order; ``config.jobs`` > 1 uses a process pool."""
    jobs = min(config.jobs, settings.MAX_JOBS, max(len(scans), 1))
    if jobs <= 1:
        return [classify_frame(scan, config) for scan in scans]
    logger.info(f"Classifying {len(scans)} frames with {jobs} workers")
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(classify_frame, scans, repeat(config)))


def _door_records(results: Sequence[FrameResult], trajectory: Trajectory) -> List[DoorRecord]:
    records = []
    for result in results:
        if not result.doors or not trajectory.covers(result.cloud.timestamp):
            continue
        pose = trajectory.pose_at(result.cloud.timestamp)
        for door in result.doors:
            x, y, z = pose.apply(door.anchor)[0]
            records.append(DoorRecord(result.cloud.timestamp, door.kind, float(door.lintel_z), (x, y, z)))
    return records


def _door_lines_text(records: Sequence[DoorRecord]) -> str:
    lines = ["timestamp\tkind\tlintel_z\tx\ty\tz"]
    for r in records:
        lines.append(f"{r.timestamp:.6f}\t{r.kind}\t{r.lintel_z:.3f}\t{r.anchor[0]:.3f}\t{r.anchor[1]:.3f}\t{r.anchor[2]:.3f}")
    return "\n".join(lines) + "\n"


def _doors_text(doors: Sequence[Door]) -> str:
    lines = ["kind\tlintel_z\tx\ty\tz\twidth\tlines"]
    for d in doors:
        x, y, z = d.center
        lines.append(f"{d.kind}\t{d.lintel_z:.3f}\t{x:.3f}\t{y:.3f}\t{z:.3f}\t{d.width:.3f}\t{d.lines}")
    return "\n".join(lines) + "\n"


def median_ceiling_height(results: Sequence[FrameResult]) -> Optional[float]:
    """Median of the per-frame ceiling planes, None when no frame found one."""
    heights = [r.ceiling_height for r in results if r.ceiling_height is not None]
    if not heights:
        return None
    return float(np.median(heights))


def build_grids(
    cloud: LabeledCloud, config: PipelineConfig, ceiling_height: Optional[float] = None
) -> Dict[str, OccupancyGrid]:
    grids = {
        "furniture_free": build_furniture_free_grid(
            cloud, resolution=config.resolution, min_hits=config.min_hits, door_clearance=config.door_clearance
        ),
        "slice_mid_height": build_slice_grid(
            cloud, mode="mid_height", band=config.slice_mid_height, resolution=config.resolution
        ),
    }
    try:
        grids["slice_below_ceiling"] = build_slice_grid(
            cloud,
            mode="below_ceiling",
            band=config.slice_below_ceiling,
            resolution=config.resolution,
            ceiling_height=ceiling_height,
        )
    except ValueError as e:
        logger.warning(f"Below-ceiling slice skipped: {e}")
    return grids


def run_pipeline(config: PipelineConfig, source: Source, output_dir: Optional[Path] = None) -> PipelineResult:
    """Run every stage and write the artifacts; single-frame failures only skip that frame."""
    truths: Optional[List[LabeledCloud]] = None
    if isinstance(source, SyntheticSource):
        scans, trajectory, truths = _load_synthetic(source)
    else:
        scans, trajectory = _load_recorded(source, config)

    results = classify_frames(scans, config)
    kept = [i for i, result in enumerate(results) if result is not None]
    frame_results = [results[i] for i in kept]
    if not frame_results:
        raise EmptyCloud(f"none of {len(scans)} frames could be classified")

    cloud = fuse_frames([r.cloud for r in frame_results], trajectory)
    if len(cloud) == 0:
        raise EmptyCloud("no frame falls inside the trajectory span")
    ceiling_height = median_ceiling_height(frame_results)
    if ceiling_height is not None:
        logger.info(f"Ceiling at {ceiling_height:.3f} m over {len(frame_results)} frames")
    grids = build_grids(cloud, config, ceiling_height)

    truth = None
    if truths is not None:
        truth = fuse_frames([truths[i] for i in kept], trajectory)
    elif isinstance(source, RecordedSource) and source.truth_path is not None:
        truth = read_labeled_cloud(source.truth_path)
    label_metrics = metrics(cloud, truth, match_tol=config.match_tol, cell=config.area_cell) if truth is not None else None

    timing = TimingReport.from_frames(frame_results)
    door_lines = _door_records(frame_results, trajectory)
    doors = merge_doors(door_lines, gap=config.door_merge_gap)
    result = PipelineResult(
        frames_total=len(scans),
        frames_processed=len(frame_results),
        cloud=cloud,
        grids=grids,
        timing=timing,
        doors=doors,
        door_lines=door_lines,
        truth=truth,
        metrics=label_metrics,
    )

    repository = ArtifactRepository(output_dir)
    try:
        repository.store_cloud("labeled_cloud", cloud)
        for name, grid in grids.items():
            repository.store_grid(name, grid)
        repository.store_text("timing", timing.to_text())
        repository.store_text("doors", _doors_text(doors))
        repository.store_text("door_lines", _door_lines_text(door_lines))
        repository.store_text("config", serialize_config(config), suffix=".conf")
        if label_metrics is not None:
            repository.store_text("metrics", metrics_table(label_metrics))
    except OSError as e:
        logger.error(f"Error writing artifacts to {repository.root}: {e}")
        raise
    result.artifacts = repository.paths()
    logger.info(
        f"Run complete: {result.frames_processed}/{result.frames_total} frames, "
        f"{len(cloud)} points, {len(doors)} doors from {len(door_lines)} door lines"
    )
    return result

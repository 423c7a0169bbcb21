"""Per-frame classification of an organized scan into labeled robot-frame points."""

import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from app.config import PipelineConfig
from app.core.errors import NoCeilingFound
from app.core.labeling import DoorDetection, LabeledCloud, detect_doors, label_frame
from app.core.rearrangement import OrganizedScan, extract_ceiling, partition_into_lines, remove_floor, resample_line
from app.core.wall_detection import WallPlane, grow_wall_planes

logger = logging.getLogger(__name__)


@dataclass
class FrameResult:
    """Labels and structure found in one frame, robot frame."""

    cloud: LabeledCloud
    walls: List[WallPlane] = field(default_factory=list)
    doors: List[DoorDetection] = field(default_factory=list)
    ceiling_height: Optional[float] = None
    wall_door_ms: float = 0.0
    total_ms: float = 0.0
    points_in_cloud: int = 0
    points_in_lines: int = 0


class FrameClassifier:
    """Runs rearrangement, wall growing, door rules and labeling on single frames."""

    def __init__(self, config: PipelineConfig):
        self.config = config

    def classify(self, scan: OrganizedScan) -> FrameResult:
        cfg = self.config
        started = time.perf_counter()
        robot = scan.robot_points()

        floor_idx, rest_idx = remove_floor(robot, cfg.z_floor)
        ceiling_idx = np.zeros(0, dtype=np.int64)
        remainder_idx = rest_idx
        ceiling_height = None
        try:
            ceiling = extract_ceiling(
                robot[rest_idx],
                angle_tol=cfg.angle_tol,
                dist_tol=cfg.dist_tol,
                min_height=cfg.min_height,
                iterations=cfg.ceiling_iterations,
                min_fraction=cfg.ceiling_min_fraction,
                seed=cfg.seed,
            )
            ceiling_idx = rest_idx[ceiling.ceiling_idx]
            remainder_idx = rest_idx[ceiling.remainder_idx]
            ceiling_height = ceiling.height
        except NoCeilingFound as e:
            logger.warning(f"Frame {scan.timestamp:.3f}: {e}; continuing without a ceiling")

        raw_lines = partition_into_lines(scan, remainder_idx)
        lines = [resample_line(line, cfg.resample_count) for line in raw_lines]

        wall_started = time.perf_counter()
        walls = grow_wall_planes(
            lines,
            sigma_th=cfg.sigma_th,
            seed=cfg.seed,
            d_threshold=cfg.d_threshold,
            min_points=cfg.min_points,
            min_lines_per_wall=cfg.min_lines_per_wall,
            vertical_tol=cfg.vertical_tol,
            iterations=cfg.grow_iterations,
            smoothing=cfg.diff_smoothing,
            strategy=cfg.candidate_strategy,
        )
        doors = detect_doors(
            lines,
            walls,
            delta_door=cfg.delta_door,
            h_min=cfg.h_min,
            wall_band=cfg.wall_band,
            min_points=cfg.min_points,
            door_recess_max=cfg.door_recess_max,
        )
        wall_door_ms = (time.perf_counter() - wall_started) * 1000.0

        cloud = label_frame(
            robot,
            floor_idx,
            ceiling_idx,
            walls,
            {line.key: line for line in raw_lines},
            doors,
            z_floor=cfg.z_floor,
            wall_band=cfg.wall_band,
            delta_door=cfg.delta_door,
            door_recess_max=cfg.door_recess_max,
            timestamp=scan.timestamp,
        )
        total_ms = (time.perf_counter() - started) * 1000.0
        logger.debug(
            f"Frame {scan.timestamp:.3f}: {len(walls)} walls, {len(doors)} door lines, {total_ms:.1f} ms"
        )
        return FrameResult(
            cloud=cloud,
            walls=walls,
            doors=doors,
            ceiling_height=ceiling_height,
            wall_door_ms=wall_door_ms,
            total_ms=total_ms,
            points_in_cloud=len(scan),
            points_in_lines=int(sum(len(line) for line in raw_lines)),
        )


def classify_frame(scan: OrganizedScan, config: PipelineConfig) -> Optional[FrameResult]:
    """Classify one frame; failures are logged and give None."""
    try:
        return FrameClassifier(config).classify(scan)
    except Exception as e:
        logger.warning(f"Skipping frame {scan.timestamp:.3f}: {e}")
        return None

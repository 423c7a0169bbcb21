"""Wall plane detection on resampled point lines.

Each line yields at most one wall candidate: the forward difference of
horizontal range over height marks vertical structures, and the highest one
is kept. Candidates of consecutive lines are then grown into planes while
they stay coplanar with the current fit.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import uniform_filter1d

from app.core.errors import DegenerateInput, LineTooShort
from app.core.geometry import PlaneModel, fit_plane_tls, sample_triples
from app.core.rearrangement import PointLine

logger = logging.getLogger(__name__)

HORIZONTAL_STEP = 1e-6
RANSAC_SCORE_SAMPLES = 256


@dataclass(frozen=True)
class VerticalSegment:
    line_id: int
    start_idx: int
    end_idx: int
    z_top: float
    z_bottom: float

    def __post_init__(self) -> None:
        if self.end_idx < self.start_idx:
            raise ValueError("segment end precedes start")
        if self.z_top < self.z_bottom:
            raise ValueError("segment z_top below z_bottom")

    def __len__(self) -> int:
        return self.end_idx - self.start_idx + 1


@dataclass
class WallCandidate:
    line_id: int
    segment: VerticalSegment
    points: np.ndarray


@dataclass
class WallPlane:
    model: PlaneModel
    member_lines: Tuple[int, ...]
    member_points: np.ndarray

    def mean_distance(self) -> float:
        return float(np.mean(np.abs(self.model.distances(self.member_points))))


def forward_difference(line: PointLine | np.ndarray, smoothing: int = 1) -> np.ndarray:
    """|Δ horizontal range / Δz| between consecutive points of a line.

    A height step under 1e-6 m gives +inf; an identical repeated point gives 0.
    ``smoothing`` > 1 applies a moving average to range and height first.
    """
    points = line.points if isinstance(line, PointLine) else np.asarray(line, dtype=float).reshape(-1, 3)
    if len(points) < 2:
        raise LineTooShort(f"forward difference needs 2 points, got {len(points)}")
    ranges = np.hypot(points[:, 0], points[:, 1])
    heights = points[:, 2]
    if smoothing > 1:
        ranges = uniform_filter1d(ranges, smoothing, mode="nearest")
        heights = uniform_filter1d(heights, smoothing, mode="nearest")
    dr = np.diff(ranges)
    dz = np.diff(heights)
    out = np.full(len(dz), np.inf)
    steep = np.abs(dz) >= HORIZONTAL_STEP
    out[steep] = np.abs(dr[steep] / dz[steep])
    repeated = np.all(points[1:] == points[:-1], axis=1)
    out[repeated] = 0.0
    return out


def detect_vertical_structures(
    diffs: np.ndarray,
    d_threshold: float,
    min_points: int = 10,
    heights: Optional[np.ndarray] = None,
    line_id: int = 0,
) -> List[VerticalSegment]:
    """Maximal runs with d < threshold spanning at least ``min_points`` points, top to bottom.

    Without ``heights`` the negated point index stands in for z.
    """
    diffs = np.asarray(diffs, dtype=float)
    if heights is None:
        heights = -np.arange(len(diffs) + 1, dtype=float)
    compliant = np.concatenate(([False], diffs < d_threshold, [False]))
    edges = np.flatnonzero(np.diff(compliant.astype(np.int8)))
    segments: List[VerticalSegment] = []
    for start, stop in zip(edges[0::2], edges[1::2]):
        # diffs[start:stop] cover points start..stop
        if stop - start + 1 < min_points:
            continue
        span = heights[start : stop + 1]
        segments.append(
            VerticalSegment(
                line_id=line_id,
                start_idx=int(start),
                end_idx=int(stop),
                z_top=float(span.max()),
                z_bottom=float(span.min()),
            )
        )
    return segments


def select_wall_candidate(segments: Sequence[VerticalSegment], strategy: str = "highest") -> Optional[VerticalSegment]:
    if not segments:
        return None
    if strategy == "lowest":
        return min(segments, key=lambda seg: seg.z_bottom)
    return max(segments, key=lambda seg: seg.z_top)


def _check_spread(points: np.ndarray) -> None:
    if len(points) < 3:
        raise DegenerateInput(f"Need at least 3 points for a plane, got {len(points)}")
    centered = points - points.mean(axis=0)
    eigvals = np.linalg.eigvalsh(centered.T @ centered)
    if eigvals[2] <= 0.0 or eigvals[1] / eigvals[2] < 1e-9:
        raise DegenerateInput("Points are collinear")


def fit_plane_ransac(points: np.ndarray, dist_tol: float, iterations: int = 100, seed: int = 0) -> PlaneModel:
    """RANSAC over random triples, refined by total least squares over the inliers."""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    _check_spread(points)
    if len(points) == 3:
        return fit_plane_tls(points)

    rng = np.random.default_rng(seed)
    triples = sample_triples(rng, len(points), iterations)
    p0, p1, p2 = points[triples[:, 0]], points[triples[:, 1]], points[triples[:, 2]]
    normals = np.cross(p1 - p0, p2 - p0)
    lengths = np.linalg.norm(normals, axis=1)
    valid = lengths > 1e-12
    if not np.any(valid):
        return fit_plane_tls(points)
    normals = normals[valid] / lengths[valid, None]
    offsets = -np.einsum("ij,ij->i", normals, p0[valid])

    if len(points) > RANSAC_SCORE_SAMPLES:
        score = points[np.sort(rng.choice(len(points), RANSAC_SCORE_SAMPLES, replace=False))]
    else:
        score = points
    counts = (np.abs(score @ normals.T + offsets) <= dist_tol).sum(axis=0)
    best = int(np.argmax(counts))
    plane = PlaneModel.from_normal(normals[best], offsets[best])

    inliers = points[np.abs(plane.distances(points)) <= dist_tol]
    try:
        plane = fit_plane_tls(inliers)
    except DegenerateInput:
        logger.debug("RANSAC refit skipped: inliers degenerate")
    count = int((np.abs(plane.distances(points)) <= dist_tol).sum())
    return plane.with_inliers(count)


def line_plane_similarity(plane: PlaneModel, points: np.ndarray) -> float:
    """Mean absolute point-to-plane distance."""
    return float(np.mean(np.abs(plane.distances(points))))


def extract_wall_candidates(
    lines: Sequence[PointLine],
    d_threshold: float = 0.3,
    min_points: int = 10,
    smoothing: int = 1,
    strategy: str = "highest",
) -> List[WallCandidate]:
    candidates: List[WallCandidate] = []
    for line_id, line in enumerate(lines):
        if len(line) < max(2, min_points):
            continue
        diffs = forward_difference(line, smoothing)
        segments = detect_vertical_structures(diffs, d_threshold, min_points, line.points[:, 2], line_id)
        chosen = select_wall_candidate(segments, strategy)
        if chosen is None:
            continue
        points = line.points[chosen.start_idx : chosen.end_idx + 1]
        candidates.append(WallCandidate(line_id=line_id, segment=chosen, points=points))
    return candidates


class _PlaneGrower:
    """State of one growing pass; see grow_wall_planes."""

    def __init__(
        self,
        sigma_th: float,
        seed: int,
        min_lines_per_wall: int,
        vertical_tol: float,
        iterations: int,
    ) -> None:
        self.sigma_th = sigma_th
        self.min_lines = min_lines_per_wall
        self.max_nz = math.sin(math.radians(vertical_tol))
        self.iterations = iterations
        self._rng = np.random.default_rng(seed)
        self.walls: List[WallPlane] = []

    def _next_seed(self) -> int:
        return int(self._rng.integers(0, 2**31 - 1))

    def fit(self, members: Sequence[WallCandidate]) -> Optional[PlaneModel]:
        points = np.concatenate([m.points for m in members])
        try:
            return fit_plane_ransac(points, self.sigma_th, self.iterations, self._next_seed())
        except DegenerateInput:
            return None

    def commit(self, members: Sequence[WallCandidate]) -> None:
        if len(members) < self.min_lines:
            return
        model = self.fit(members)
        if model is None:
            return
        kept = [m for m in members if line_plane_similarity(model, m.points) < self.sigma_th]
        if len(kept) < self.min_lines:
            logger.debug(f"Dropped plane: {len(kept)} of {len(members)} lines coplanar")
            return
        points = np.concatenate([m.points for m in kept])
        try:
            model = fit_plane_tls(points)
        except DegenerateInput:
            return
        model = model.oriented_toward((0.0, 0.0, 0.0))
        if abs(model.normal[2]) > self.max_nz:
            logger.debug(f"Dropped plane: normal {model.normal} not horizontal")
            return
        if line_plane_similarity(model, points) > self.sigma_th:
            return
        self.walls.append(
            WallPlane(
                model=model.with_inliers(len(points)),
                member_lines=tuple(m.line_id for m in kept),
                member_points=points,
            )
        )


def grow_wall_planes(
    lines: Sequence[PointLine],
    sigma_th: float = 0.05,
    seed: int = 0,
    d_threshold: float = 0.3,
    min_points: int = 10,
    min_lines_per_wall: int = 3,
    vertical_tol: float = 10.0,
    iterations: int = 100,
    smoothing: int = 1,
    strategy: str = "highest",
) -> List[WallPlane]:
    """Grow wall planes from the candidates of spatially consecutive lines.

    A rejected line closes the current plane and seeds the next one.
    """
    candidates = extract_wall_candidates(lines, d_threshold, min_points, smoothing, strategy)
    grower = _PlaneGrower(sigma_th, seed, min_lines_per_wall, vertical_tol, iterations)

    current: List[WallCandidate] = []
    plane: Optional[PlaneModel] = None
    for candidate in candidates:
        if not current:
            current, plane = [candidate], None
            continue
        if plane is None:
            plane = grower.fit(current)
        if plane is None:
            # a single straight line does not fix a plane; judge it together with the newcomer
            trial = grower.fit(current + [candidate])
            if trial is not None and line_plane_similarity(trial, candidate.points) < sigma_th:
                current.append(candidate)
                plane = trial
            else:
                grower.commit(current)
                current, plane = [candidate], None
            continue
        if line_plane_similarity(plane, candidate.points) < sigma_th:
            current.append(candidate)
            plane = grower.fit(current) or plane
        else:
            grower.commit(current)
            current, plane = [candidate], None
    if current:
        grower.commit(current)

    logger.debug(f"Grew {len(grower.walls)} wall planes from {len(candidates)} candidates")
    return grower.walls

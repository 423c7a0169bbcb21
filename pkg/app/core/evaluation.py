"""Area-based precision, recall and F1 per label."""

from __future__ import annotations

import logging
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from scipy.spatial import cKDTree

from app.core.errors import DegenerateInput
from app.core.geometry import Label, horizontal_chart
from app.core.labeling import LabeledCloud
from app.core.wall_detection import fit_plane_ransac

logger = logging.getLogger(__name__)

NO_LABEL = 255
HORIZONTAL_LABELS = (Label.FLOOR, Label.CEILING)
PLANAR_LABELS = (Label.WALL, Label.DOOR)
MIN_PLANE_POINTS = 10
MAX_PLANES = 32
TABLE_COLUMNS = ("label", "FP", "TP", "FN", "precision", "recall", "f1")


class LabelMetrics(BaseModel):
    label: Label
    tp_area: float
    fp_area: float
    fn_area: float
    precision: Optional[float] = None
    recall: Optional[float] = None
    f1: Optional[float] = None

    @property
    def undefined(self) -> bool:
        """True when TP+FP or TP+FN is zero."""
        return self.precision is None or self.recall is None


def _count_bins(coords: np.ndarray, cell: float) -> int:
    if len(coords) == 0:
        return 0
    bins = np.floor(coords / cell).astype(np.int64)
    return len(np.unique(bins, axis=0))


def _plane_chart_bins(points: np.ndarray, cell: float) -> int:
    """Peel planes off with RANSAC and bin each on its own 2D chart.

    Points left once no plane holds ``MIN_PLANE_POINTS`` are binned in 3D.
    """
    rest = points
    bins = 0
    for _ in range(MAX_PLANES):
        if len(rest) < MIN_PLANE_POINTS:
            break
        try:
            plane = fit_plane_ransac(rest, dist_tol=cell / 2, seed=0)
        except DegenerateInput:
            break
        inliers = np.abs(plane.distances(rest)) <= cell / 2
        if int(inliers.sum()) < MIN_PLANE_POINTS:
            break
        u, v = horizontal_chart(plane.normal_array())
        on_plane = rest[inliers]
        bins += _count_bins(np.column_stack([on_plane @ u, on_plane @ v]), cell)
        rest = rest[~inliers]
    return bins + _count_bins(rest, cell)


def _fallback_bins(points: np.ndarray, cell: float, label: Optional[Label]) -> int:
    if label in HORIZONTAL_LABELS:
        return _count_bins(points[:, :2], cell)
    if label in PLANAR_LABELS:
        return _plane_chart_bins(points, cell)
    return _count_bins(points, cell)


def surface_area(
    points: np.ndarray,
    cell: float = 0.05,
    label: Optional[Label] = None,
    surface_ids: Optional[np.ndarray] = None,
    normals: Optional[np.ndarray] = None,
) -> float:
    """Occupied ``cell`` x ``cell`` bins times the bin area, in m².

    Points grouped by surface id are binned on that surface's own 2D chart.
    Without ids, floor and ceiling use x-y bins. Walls and doors are charted
    plane by plane; anything else falls back to 3D voxels.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(points) == 0:
        return 0.0
    if surface_ids is None or normals is None:
        return _fallback_bins(points, cell, label) * cell * cell

    surface_ids = np.asarray(surface_ids).reshape(-1)
    normals = np.asarray(normals, dtype=float).reshape(-1, 3)
    bins = _fallback_bins(points[surface_ids < 0], cell, label)
    for surface in np.unique(surface_ids[surface_ids >= 0]):
        members = surface_ids == surface
        u, v = horizontal_chart(normals[members].mean(axis=0))
        chart = np.column_stack([points[members] @ u, points[members] @ v])
        bins += _count_bins(chart, cell)
    return bins * cell * cell


def metrics_from_areas(label: Label, tp: float, fp: float, fn: float) -> LabelMetrics:
    precision = tp / (tp + fp) if tp + fp > 0 else None
    recall = tp / (tp + fn) if tp + fn > 0 else None
    f1 = None
    if precision is not None and recall is not None:
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return LabelMetrics(
        label=label, tp_area=tp, fp_area=fp, fn_area=fn, precision=precision, recall=recall, f1=f1
    )


def _pair(
    pred: LabeledCloud, truth: LabeledCloud, match_tol: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, Optional[np.ndarray], Optional[np.ndarray]]:
    """Align predicted and true labels point by point.

    Returns positions, predicted and true labels (NO_LABEL where unmatched),
    and surface ids/normals when the truth carries them.
    """
    surfaces = truth.surface_ids is not None and truth.normals is not None
    if len(pred) == len(truth) and (
        len(pred) == 0 or float(np.max(np.abs(pred.points - truth.points))) <= match_tol
    ):
        return (
            truth.points,
            pred.labels,
            truth.labels,
            truth.surface_ids if surfaces else None,
            truth.normals if surfaces else None,
        )

    logger.info(f"Matching {len(pred)} predicted to {len(truth)} true points within {match_tol} m")
    tree = cKDTree(truth.points)
    dist, idx = tree.query(pred.points, distance_upper_bound=match_tol)
    matched = np.isfinite(dist)
    truth_hit = np.zeros(len(truth), dtype=bool)
    truth_hit[idx[matched]] = True
    missed = ~truth_hit

    positions = np.concatenate([pred.points, truth.points[missed]])
    pred_labels = np.concatenate([pred.labels, np.full(int(missed.sum()), NO_LABEL, dtype=np.uint8)])
    truth_labels = np.full(len(pred), NO_LABEL, dtype=np.uint8)
    truth_labels[matched] = truth.labels[idx[matched]]
    truth_labels = np.concatenate([truth_labels, truth.labels[missed]])
    if not surfaces:
        return positions, pred_labels, truth_labels, None, None
    ids = np.full(len(pred), -1, dtype=np.int32)
    ids[matched] = truth.surface_ids[idx[matched]]
    normals = np.zeros((len(pred), 3))
    normals[matched] = truth.normals[idx[matched]]
    return (
        positions,
        pred_labels,
        truth_labels,
        np.concatenate([ids, truth.surface_ids[missed]]),
        np.concatenate([normals, truth.normals[missed]]),
    )


def metrics(
    pred: LabeledCloud,
    truth: LabeledCloud,
    match_tol: float = 0.01,
    cell: float = 0.05,
    labels: Iterable[Label] = tuple(Label),
) -> List[LabelMetrics]:
    """Per-label TP/FP/FN areas and the derived ratios."""
    positions, pred_labels, truth_labels, ids, normals = _pair(pred, truth, match_tol)

    def area(mask: np.ndarray, label: Label) -> float:
        return surface_area(
            positions[mask],
            cell,
            label=label,
            surface_ids=None if ids is None else ids[mask],
            normals=None if normals is None else normals[mask],
        )

    rows = []
    for label in labels:
        is_pred = pred_labels == label
        is_true = truth_labels == label
        rows.append(
            metrics_from_areas(
                label,
                tp=area(is_pred & is_true, label),
                fp=area(is_pred & ~is_true, label),
                fn=area(is_true & ~is_pred, label),
            )
        )
    return rows


def _percent(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{100.0 * value:.2f}"


def metrics_table(rows: Sequence[LabelMetrics]) -> str:
    """Tab-separated table: areas in m², ratios in percent."""
    lines = ["\t".join(TABLE_COLUMNS)]
    for row in rows:
        lines.append(
            "\t".join(
                [
                    row.label.name.capitalize(),
                    f"{row.fp_area:.2f}",
                    f"{row.tp_area:.2f}",
                    f"{row.fn_area:.2f}",
                    _percent(row.precision),
                    _percent(row.recall),
                    _percent(row.f1),
                ]
            )
        )
    return "\n".join(lines) + "\n"

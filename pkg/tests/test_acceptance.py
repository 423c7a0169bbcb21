"""End-to-end checks on the built-in corridor scene."""

import time

import numpy as np
import pytest

from app.config import PipelineConfig
from app.core.evaluation import surface_area
from app.core.geometry import Label, Pose
from app.core.map_builder import FREE, OCCUPIED
from app.services.frame_classifier import FrameClassifier
from app.services.pipeline import SyntheticSource, run_pipeline
from app.simulation.raycast import simulate_frame
from app.simulation.scene import SensorSpec, standard_scene
from tests.conftest import make_box_room

CLOSED_DOOR_X = (10.9, 12.0)
OPEN_DOOR_X = (8.9, 10.0)


def _wall_row(result, label=Label.WALL):
    return next(row for row in result.metrics if row.label == label)


def _occupied_near(grid, x, y, cells=2):
    col, row = grid.cell_of(np.array([[x, y]]))
    window = grid.cells[
        max(row[0] - cells, 0) : row[0] + cells + 1,
        max(col[0] - cells, 0) : col[0] + cells + 1,
    ]
    return bool(np.any(window == OCCUPIED))


def _wall_samples():
    """Points on the observable parts of the walls, away from the doorways."""
    samples = []
    for x in np.arange(1.5, 12.5, 0.1):
        if not CLOSED_DOOR_X[0] <= x <= CLOSED_DOOR_X[1]:
            samples.append((x, -1.025))
    for x in np.arange(6.5, 12.5, 0.1):
        if not OPEN_DOOR_X[0] <= x <= OPEN_DOOR_X[1]:
            samples.append((x, 1.025))
    for x in np.arange(1.5, 5.5, 0.1):
        samples.append((x, 2.525))
    return samples


def test_standard_run_processes_every_frame(standard_run):
    assert standard_run.frames_total == 40
    assert standard_run.frames_processed == 40


def test_wall_labels_on_the_clean_scene(standard_run):
    wall = _wall_row(standard_run)
    assert wall.precision >= 0.99
    assert wall.recall >= 0.90


def test_furniture_free_grid_traces_the_walls(standard_run):
    grid = standard_run.grids["furniture_free"]
    samples = _wall_samples()
    hits = sum(_occupied_near(grid, x, y) for x, y in samples)
    assert hits >= 0.95 * len(samples)


def test_furniture_free_grid_has_no_furniture(standard_run):
    grid = standard_run.grids["furniture_free"]
    centers = grid.cell_centers()
    occupied = grid.occupied.ravel()
    for box in standard_scene().furniture:
        inside = (
            (centers[:, 0] > box.min[0])
            & (centers[:, 0] < box.max[0])
            & (centers[:, 1] > box.min[1])
            & (centers[:, 1] < box.max[1])
        )
        assert not np.any(occupied & inside), box.name


def test_doorways_are_open_in_the_furniture_free_grid(standard_run):
    grid = standard_run.grids["furniture_free"]
    for x in np.arange(11.2, 11.7, 0.05):
        assert grid.state_at(x, -1.025) != OCCUPIED
    for x in np.arange(9.2, 9.7, 0.05):
        assert grid.state_at(x, 1.025) != OCCUPIED
    assert grid.state_at(11.45, -1.025) == FREE
    assert grid.state_at(9.45, 1.025) == FREE


def test_below_ceiling_slice_closes_the_doorway(standard_run):
    grid = standard_run.grids["slice_below_ceiling"]
    xs = np.arange(11.1, 11.8, 0.05)
    blocked = sum(grid.state_at(x, -1.025) == OCCUPIED for x in xs)
    assert blocked > len(xs) / 2


def test_mid_height_slice_shows_furniture(standard_run):
    grid = standard_run.grids["slice_mid_height"]
    cell = grid.resolution
    centers = grid.cell_centers()
    occupied = grid.occupied.ravel()
    for name in ("cabinet", "shelf"):
        box = next(b for b in standard_scene().furniture if b.name == name)
        near = (
            (centers[:, 0] >= box.min[0] - cell)
            & (centers[:, 0] <= box.max[0] + cell)
            & (centers[:, 1] >= box.min[1] - cell)
            & (centers[:, 1] <= box.max[1] + cell)
        )
        assert np.any(occupied & near), name


def _in_span(anchor, span, wall_y):
    return span[0] <= anchor[0] <= span[1] and abs(anchor[1] - wall_y) <= 0.05


def test_doors_are_found_at_both_doorways(standard_run):
    assert len(standard_run.doors) == 2
    closed = next(d for d in standard_run.doors if d.kind == "closed")
    opened = next(d for d in standard_run.doors if d.kind == "open")
    assert _in_span(closed.center, CLOSED_DOOR_X, -1.025)
    assert _in_span(opened.center, OPEN_DOOR_X, 1.025)
    for door in (closed, opened):
        assert door.lintel_z == pytest.approx(2.1, abs=0.05)
        assert door.width <= 1.0
    assert "closed" in standard_run.artifacts["doors"].read_text()


def test_every_door_line_lies_in_a_doorway(standard_run):
    assert standard_run.door_lines
    for line in standard_run.door_lines:
        assert _in_span(line.anchor, CLOSED_DOOR_X, -1.025) or _in_span(line.anchor, OPEN_DOOR_X, 1.025)


def test_wall_labels_under_range_noise(noisy_run):
    wall = _wall_row(noisy_run)
    assert wall.precision >= 0.97
    assert wall.recall >= 0.85


def test_furniture_is_not_labeled_wall_under_range_noise(noisy_run):
    cloud, truth = noisy_run.cloud, noisy_run.truth
    assert len(cloud) == len(truth)
    false_wall = (cloud.labels == Label.WALL) & (truth.labels == Label.CLUTTER)
    for box in standard_scene().furniture:
        low = np.asarray(box.min) - 0.05
        high = np.asarray(box.max) + 0.05
        inside = np.all((truth.points >= low) & (truth.points <= high), axis=1)
        mask = false_wall & inside
        area = surface_area(
            truth.points[mask], 0.05, Label.WALL, surface_ids=truth.surface_ids[mask], normals=truth.normals[mask]
        )
        assert area <= 0.1, box.name


def test_frame_classification_time():
    frame = simulate_frame(make_box_room(), SensorSpec(azimuth_steps=3000), Pose.from_xyz_yaw(4.0, 0.0, 0.0, 0.0))
    classifier = FrameClassifier(PipelineConfig())
    classifier.classify(frame.scan)
    timings = []
    for _ in range(5):
        started = time.perf_counter()
        classifier.classify(frame.scan)
        timings.append(time.perf_counter() - started)
    assert float(np.median(timings)) <= 0.2


def test_runs_are_byte_identical_across_job_counts(tmp_path):
    source = SyntheticSource(make_box_room(4), SensorSpec(azimuth_steps=900))
    outputs = []
    for index, jobs in enumerate((1, 1, 8)):
        result = run_pipeline(PipelineConfig(jobs=jobs), source, tmp_path / f"run{index}")
        outputs.append(result.artifacts)
    for name in ("labeled_cloud", "furniture_free", "slice_mid_height", "slice_below_ceiling"):
        reference = outputs[0][name].read_bytes()
        assert all(artifacts[name].read_bytes() == reference for artifacts in outputs[1:]), name

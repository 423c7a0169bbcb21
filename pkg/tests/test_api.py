import numpy as np
import pytest
from fastapi.testclient import TestClient

from app.core.geometry import Label
from app.core.labeling import LabeledCloud
from app.core.map_builder import FREE, OccupancyGrid
from app.utils.grid_io import write_grid
from app.utils.ply_io import write_labeled_cloud
from main import app

client = TestClient(app)


@pytest.fixture
def clouds(tmp_path):
    points = np.column_stack([np.arange(4, dtype=float), np.zeros(4), np.full(4, 1.0)])
    truth = LabeledCloud(points=points, labels=np.array([Label.WALL, Label.WALL, Label.CLUTTER, Label.FLOOR]))
    predicted = LabeledCloud(points=points, labels=np.array([Label.WALL, Label.CLUTTER, Label.CLUTTER, Label.FLOOR]))
    return write_labeled_cloud(tmp_path / "pred.ply", predicted), write_labeled_cloud(tmp_path / "truth.ply", truth)


def test_root():
    response = client.get("/")
    assert response.status_code == 200
    assert response.json()["ok"] is True


def test_health():
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json()["version"] == "1.0.0"


def test_evaluate(clouds):
    predicted, truth = clouds
    response = client.post("/evaluate", json={"predicted": str(predicted), "truth": str(truth)})
    assert response.status_code == 200
    body = response.json()
    wall = next(row for row in body["rows"] if row["label"] == "Wall")
    assert wall["precision"] == pytest.approx(1.0)
    assert wall["recall"] == pytest.approx(0.5)
    assert body["table"].startswith("label\t")


def test_evaluate_missing_file(tmp_path):
    response = client.post("/evaluate", json={"predicted": str(tmp_path / "a.ply"), "truth": str(tmp_path / "b.ply")})
    assert response.status_code == 400
    assert "not found" in response.json()["detail"]


def test_compare_grids(tmp_path):
    grid = OccupancyGrid.blank(4, 3, 0.05, (0.0, 0.0))
    grid.cells[0, :] = FREE
    write_grid(tmp_path / "a.pgm", grid)
    write_grid(tmp_path / "b.pgm", OccupancyGrid.blank(4, 3, 0.05, (0.0, 0.0)))
    response = client.post("/grids/compare", json={"first": str(tmp_path / "a.pgm"), "second": str(tmp_path / "b.pgm")})
    assert response.status_code == 200
    body = response.json()
    assert body["cells"] == 12
    assert body["agreement"] == pytest.approx(100.0 * 8 / 12)
    assert body["confusion"] == {"205/205": 8, "254/205": 4}


def test_compare_grids_of_different_shape(tmp_path):
    write_grid(tmp_path / "a.pgm", OccupancyGrid.blank(4, 3, 0.05, (0.0, 0.0)))
    write_grid(tmp_path / "b.pgm", OccupancyGrid.blank(3, 4, 0.05, (0.0, 0.0)))
    response = client.post("/grids/compare", json={"first": str(tmp_path / "a.pgm"), "second": str(tmp_path / "b.pgm")})
    assert response.status_code == 400


def test_pipeline_run_on_a_scene_file(tmp_path, box_scene_file):
    response = client.post(
        "/pipeline/run",
        json={"scene_file": str(box_scene_file), "output_dir": str(tmp_path / "run"), "config": {"jobs": 1}},
    )
    assert response.status_code == 200
    body = response.json()
    assert body["frames_processed"] == 3
    assert body["frames_skipped"] == 0
    assert body["points"] > 0
    assert "furniture_free" in body["artifacts"]
    assert {row["name"] for row in body["timing"]} >= {"frame_ms", "wall_door_ms"}
    assert any(row["label"] == "Wall" for row in body["metrics"])


def test_pipeline_run_with_bad_config(tmp_path, box_scene_file):
    response = client.post(
        "/pipeline/run",
        json={"scene_file": str(box_scene_file), "output_dir": str(tmp_path / "run"), "config": {"bogus": 1}},
    )
    assert response.status_code == 400
    assert "bogus" in response.json()["detail"]


@pytest.mark.parametrize(
    "payload",
    [
        {},
        {"frames_dir": "frames"},
        {"frames_dir": "frames", "trajectory": "t.txt", "scene_file": "scene.conf"},
    ],
)
def test_pipeline_run_needs_exactly_one_source(payload):
    assert client.post("/pipeline/run", json=payload).status_code == 422

import numpy as np
import pytest

from app.config import PipelineConfig
from app.core.geometry import Label, PlaneModel, Pose
from app.core.labeling import DoorDetection, LabeledCloud, classify_door_line, detect_doors, label_frame
from app.core.rearrangement import PointLine
from app.core.wall_detection import WallPlane
from app.services.frame_classifier import FrameClassifier


def _wall(y=2.0):
    """Wall plane y = const with its normal toward the robot at the origin."""
    model = PlaneModel.from_normal((0.0, -1.0, 0.0), y)
    return WallPlane(model=model, member_lines=(0,), member_points=np.array([[0.0, y, 1.0]]))


def _door_line(recess_from, depth, n=200, top=2.9, bottom=0.2, y=2.0):
    z = np.linspace(top, bottom, n)
    ys = np.where(z >= recess_from, y, y + depth)
    return PointLine.from_points(np.column_stack([np.zeros(n), ys, z]))


def test_closed_door_is_detected_with_its_lintel():
    detection = classify_door_line(_door_line(2.1, 0.04), _wall())
    assert detection is not None
    assert detection.kind == "closed"
    assert detection.lintel_z == pytest.approx(2.1, abs=0.05)
    assert detection.lintel_z < 2.1 <= detection.wall_z
    assert detection.anchor == pytest.approx([0.0, 2.0, detection.wall_z])


def test_line_fully_on_the_wall_is_not_a_door():
    assert classify_door_line(_door_line(-1.0, 0.0), _wall()) is None


def test_low_recess_is_not_a_door():
    assert classify_door_line(_door_line(0.9, 0.04), _wall(), h_min=1.6) is None


def test_line_ending_at_the_lintel_is_an_open_door():
    line = _door_line(-1.0, 0.0, top=2.9, bottom=2.12)
    detection = classify_door_line(line, _wall())
    assert detection is not None
    assert detection.kind == "open"
    assert detection.lintel_z == pytest.approx(2.12)


def test_deep_suffix_is_an_open_door():
    detection = classify_door_line(_door_line(2.1, 1.5), _wall())
    assert detection is not None and detection.kind == "open"


def test_corner_with_mixed_depths_is_not_a_door():
    z = np.linspace(2.9, 0.2, 200)
    depth = np.where(z >= 2.0, 0.0, np.linspace(0.03, 0.4, 200))
    line = PointLine.from_points(np.column_stack([np.zeros(200), 2.0 + depth, z]))
    assert classify_door_line(line, _wall()) is None


def test_short_wall_run_is_not_a_door():
    line = _door_line(2.8, 0.04, top=2.9)
    assert classify_door_line(line, _wall(), min_points=10) is None


def test_raising_delta_door_never_adds_closed_doors():
    lines = [_door_line(2.1, depth) for depth in (0.025, 0.04, 0.06, 0.1, 0.15)]
    counts = []
    for delta in (0.01, 0.02, 0.03, 0.05, 0.08, 0.12, 0.2):
        detections = [classify_door_line(line, _wall(), delta_door=delta) for line in lines]
        counts.append(sum(d is not None and d.kind == "closed" for d in detections))
    assert counts == sorted(counts, reverse=True)
    assert counts[0] == len(lines)


def test_detect_doors_checks_member_lines_only():
    wall = WallPlane(model=_wall().model, member_lines=(1,), member_points=np.zeros((1, 3)))
    lines = [_door_line(2.1, 0.04), _door_line(2.1, 0.04)]
    detections = detect_doors(lines, [wall])
    assert [d.line_id for d in detections] == [1]
    assert detections[0].wall is wall


def _tiny_frame():
    points = np.array(
        [
            [0.0, 2.0, 0.05],  # floor, within the wall band
            [1.0, 0.0, 0.02],  # floor
            [0.0, 1.95, 3.0],  # ceiling, within the wall band
            [1.0, 0.0, 3.0],  # ceiling
            [0.0, 2.0, 1.5],  # wall
            [0.3, 2.0, 2.5],  # wall
            [0.0, 0.5, 0.5],  # clutter
            [0.0, 2.04, 1.0],  # recessed door panel
        ]
    )
    wall = _wall()
    line = PointLine(
        points=points[[5, 4, 7]],
        ring=0,
        side=0,
        beam_angle=0.0,
        azimuth=np.arange(3.0),
        indices=np.array([5, 4, 7]),
    )
    door = DoorDetection(
        line_id=0, lintel_z=1.0, wall=wall, kind="closed", wall_z=1.5, anchor=np.array([0.0, 2.0, 1.5]), line_key=(0, 0)
    )
    return points, wall, line, door


def test_label_frame_precedence():
    points, wall, line, door = _tiny_frame()
    cloud = label_frame(points, np.array([0, 1]), np.array([2, 3]), [wall], {(0, 0): line}, [door])
    assert cloud.labels.tolist() == [
        Label.FLOOR,
        Label.FLOOR,
        Label.CEILING,
        Label.CEILING,
        Label.WALL,
        Label.WALL,
        Label.CLUTTER,
        Label.DOOR,
    ]
    assert cloud.frame_id == "robot"
    assert cloud.anchors.tolist() == [[0.0, 2.0, 1.5]]


def test_label_frame_without_walls():
    points, _, _, _ = _tiny_frame()
    cloud = label_frame(points, np.array([0, 1]), np.array([2, 3]), [], {}, [])
    assert set(cloud.labels.tolist()) <= {Label.FLOOR, Label.CEILING, Label.CLUTTER}
    assert sum(cloud.label_counts().values()) == len(points)


def test_simulated_frame_labels_agree_with_truth(box_frame):
    result = FrameClassifier(PipelineConfig()).classify(box_frame.scan)
    labels, truth = result.cloud.labels, box_frame.labels
    assert len(labels) == len(truth)

    floor = truth == Label.FLOOR
    assert np.all(labels[floor] == Label.FLOOR)

    wall = truth == Label.WALL
    assert np.mean(labels[wall] == Label.WALL) >= 0.95
    z = result.cloud.points[:, 2]
    reachable = wall & (z > 0.1) & (z < 2.95)
    assert np.mean(labels[reachable] == Label.WALL) >= 0.99
    assert not np.any(labels == Label.DOOR)


def test_labeled_cloud_validates_labels():
    with pytest.raises(ValueError):
        LabeledCloud(points=np.zeros((1, 3)), labels=np.array([9]))
    with pytest.raises(ValueError):
        LabeledCloud(points=np.zeros((2, 3)), labels=np.array([0]))


def test_labeled_cloud_transform_moves_points_normals_and_anchors():
    cloud = LabeledCloud(
        points=np.array([[1.0, 0.0, 0.0]]),
        labels=np.array([Label.WALL]),
        normals=np.array([[1.0, 0.0, 0.0]]),
        surface_ids=np.array([4]),
        anchors=np.array([[0.0, 0.0, 2.0]]),
    )
    moved = cloud.transformed(Pose.from_xyz_yaw(1.0, 0.0, 0.0, np.pi / 2))
    assert moved.frame_id == "world"
    assert moved.points[0] == pytest.approx([1.0, 1.0, 0.0])
    assert moved.normals[0] == pytest.approx([0.0, 1.0, 0.0])
    assert moved.anchors[0] == pytest.approx([1.0, 0.0, 2.0])
    assert moved.surface_ids.tolist() == [4]


def test_labeled_cloud_concatenate_keeps_optional_channels_only_when_shared():
    a = LabeledCloud(points=np.zeros((2, 3)), labels=np.zeros(2), surface_ids=np.array([0, 0]), normals=np.zeros((2, 3)))
    b = LabeledCloud(points=np.ones((1, 3)), labels=np.array([Label.WALL]))
    merged = LabeledCloud.concatenate([a, b])
    assert len(merged) == 3
    assert merged.surface_ids is None
    assert merged.label_counts()[Label.WALL] == 1
    assert len(LabeledCloud.concatenate([])) == 0

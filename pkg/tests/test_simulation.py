import numpy as np
import pytest
from pydantic import ValidationError

from app.config import settings
from app.core.errors import ParseError, PoseInsideGeometry
from app.core.geometry import Label, Pose
from app.simulation.raycast import (
    Rect,
    cast_rays,
    scene_surfaces,
    simulate_frame,
    trajectory_poses,
    trajectory_through,
)
from app.simulation.scene import (
    BoxSpec,
    DoorSpec,
    SceneSpec,
    SensorSpec,
    WallSpec,
    load_scene,
    parse_scene_text,
    serialize_scene,
    standard_scene,
)


def _cast_one(surfaces, origin, direction, ceiling=3.0):
    ranges, ids, labels, _ = cast_rays(surfaces, ceiling, np.asarray(origin, dtype=float), np.array([direction], dtype=float), 30.0)
    return ranges[0], ids[0], labels[0]


def test_ray_hits_a_wall_rectangle():
    wall = Rect(2, Label.WALL, np.array([2.0, -1.0, 0.0]), np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0]), 2.0, 3.0)
    distance, surface, label = _cast_one([wall], (0.0, 0.0, 1.0), (1.0, 0.0, 0.0))
    assert distance == pytest.approx(2.0)
    assert surface == 2
    assert label == Label.WALL


def test_ray_through_an_open_doorway_misses():
    distance, surface, _ = _cast_one(scene_surfaces(standard_scene()), (9.45, 0.0, 1.0), (0.0, 1.0, 0.0))
    assert np.isinf(distance)
    assert surface == -1


def test_ray_into_a_closed_doorway_hits_the_recessed_panel():
    distance, _, label = _cast_one(scene_surfaces(standard_scene()), (11.45, 0.0, 1.0), (0.0, -1.0, 0.0))
    assert distance == pytest.approx(1.065)
    assert label == Label.DOOR


def test_wall_thickness_moves_the_face_toward_the_interior(box_room):
    thick = SceneSpec(walls=[wall.model_copy(update={"thickness": 0.2}) for wall in box_room.walls])
    distance, _, label = _cast_one(scene_surfaces(thick), (4.0, 0.0, 1.0), (0.0, -1.0, 0.0))
    assert distance == pytest.approx(1.4)
    assert label == Label.WALL
    distance, _, _ = _cast_one(scene_surfaces(thick), (4.0, 0.0, 1.0), (1.0, 0.0, 0.0))
    assert distance == pytest.approx(3.9)
    parsed, _ = parse_scene_text(serialize_scene(thick))
    assert [wall.thickness for wall in parsed.walls] == [0.2] * 4


def test_floor_and_ceiling_bound_vertical_rays():
    down, floor_id, floor_label = _cast_one([], (1.0, 1.0, 1.0), (0.0, 0.0, -1.0))
    up, ceiling_id, ceiling_label = _cast_one([], (1.0, 1.0, 1.0), (0.0, 0.0, 1.0))
    assert float(down) == pytest.approx(1.0)
    assert (int(floor_id), int(floor_label)) == (0, Label.FLOOR)
    assert float(up) == pytest.approx(2.0)
    assert (int(ceiling_id), int(ceiling_label)) == (1, Label.CEILING)


def test_standard_scene_surfaces():
    surfaces = scene_surfaces(standard_scene())
    labels = [rect.label for rect in surfaces]
    assert len(surfaces) == 26
    assert labels.count(Label.DOOR) == 1
    assert labels.count(Label.CLUTTER) == 15
    assert [rect.surface_id for rect in surfaces] == list(range(2, 28))


def test_simulated_frame_geometry(box_frame):
    robot = box_frame.scan.robot_points()
    assert len(box_frame.labels) == len(robot)
    assert np.abs(robot[box_frame.labels == Label.FLOOR, 2]).max() < 1e-9
    assert np.abs(robot[box_frame.labels == Label.CEILING, 2] - 3.0).max() < 1e-9
    assert set(box_frame.scan.rings.tolist()) == set(range(32))
    assert set(box_frame.labels.tolist()) == {Label.FLOOR, Label.CEILING, Label.WALL}


def test_truth_cloud_lines_up_with_the_scan(box_frame):
    truth = box_frame.truth_cloud()
    assert truth.frame_id == "robot"
    assert np.array_equal(truth.points, box_frame.scan.robot_points())
    assert np.array_equal(truth.labels, box_frame.labels)
    assert np.allclose(np.linalg.norm(truth.normals, axis=1), 1.0)


def test_noise_free_hits_lie_on_their_surfaces():
    scene = standard_scene()
    surfaces = scene_surfaces(scene)
    frame = simulate_frame(scene, SensorSpec(azimuth_steps=900), Pose.from_xyz_yaw(4.8, 0.0, 0.0, 0.0))
    world = frame.pose.apply(frame.scan.robot_points())
    assert {Label.WALL, Label.CLUTTER} <= set(frame.labels.tolist())
    for label in (Label.WALL, Label.CLUTTER):
        mask = frame.labels == label
        for point, surface_id in zip(world[mask], frame.surface_ids[mask]):
            rect = surfaces[surface_id - 2]
            assert abs(float((point - rect.origin) @ rect.normal)) < 1e-9


def test_simulating_inside_furniture_fails():
    with pytest.raises(PoseInsideGeometry):
        simulate_frame(standard_scene(), SensorSpec(azimuth_steps=90), Pose.from_xyz_yaw(1.5, 1.9, 0.0, 0.0))


def test_simulating_outside_the_walls_fails():
    with pytest.raises(PoseInsideGeometry):
        simulate_frame(standard_scene(), SensorSpec(azimuth_steps=90), Pose.from_xyz_yaw(20.0, 0.0, 0.0, 0.0))


def test_simulating_in_the_notch_of_an_l_shaped_layout_fails():
    with pytest.raises(PoseInsideGeometry, match="outside"):
        simulate_frame(standard_scene(), SensorSpec(azimuth_steps=90), Pose.from_xyz_yaw(10.0, 2.0, 0.0, 0.0))


def test_floor_plan_is_the_union_of_room_and_corridor():
    scene = standard_scene()
    assert scene.floor_plan().area == pytest.approx(14.0 * 2.05 + 6.0 * 1.5)
    assert scene.encloses(3.0, 2.0)
    assert scene.encloses(10.0, 0.0)
    assert not scene.encloses(10.0, 2.0)
    assert scene.encloses(1.0, 1.6, 2.0, 2.3)
    assert not scene.encloses(8.0, 0.5, 9.0, 1.5)


def test_open_wall_layout_falls_back_to_its_bounds():
    scene = SceneSpec(walls=[WallSpec(start=(0.0, -1.0), end=(5.0, -1.0)), WallSpec(start=(5.0, 1.0), end=(0.0, 1.0))])
    assert scene.floor_plan() is None
    assert scene.encloses(2.5, 0.0)
    assert not scene.encloses(6.0, 0.0)


def test_trajectory_poses_are_evenly_spaced():
    poses = trajectory_poses([(0.0, 0.0, 0.0), (4.0, 0.0, 0.0)], 5, 10.0)
    assert [pose.translation.x for pose in poses] == pytest.approx([0.0, 1.0, 2.0, 3.0, 4.0])
    assert [pose.timestamp for pose in poses] == pytest.approx([0.0, 0.1, 0.2, 0.3, 0.4])


def test_stationary_robot_sees_identical_frames(box_room, fast_sensor):
    frames = trajectory_through(box_room, fast_sensor, waypoints=[(4.0, 0.0, 0.0), (4.0, 0.0, 0.0)], n_frames=3)
    assert len(frames) == 3
    first = frames[0][1].scan.positions
    assert all(np.array_equal(frame.scan.positions, first) for _, frame in frames[1:])
    assert [pose.timestamp for pose, _ in frames] == pytest.approx([0.0, 0.1, 0.2])


def test_range_noise_is_seeded(box_room):
    sensor = SensorSpec(azimuth_steps=360, noise_sigma=0.01)
    pose = Pose.from_xyz_yaw(4.0, 0.0, 0.0, 0.0)
    a = simulate_frame(box_room, sensor, pose, seed=3).scan.positions
    b = simulate_frame(box_room, sensor, pose, seed=3).scan.positions
    c = simulate_frame(box_room, sensor, pose, seed=4).scan.positions
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


@pytest.mark.parametrize(
    "update",
    [
        {"doors": [DoorSpec(wall=9, offset=1.0)]},
        {"doors": [DoorSpec(wall=0, offset=13.5)]},
        {"doors": [DoorSpec(wall=0, offset=1.0, lintel=3.5)]},
        {"furniture": [BoxSpec(min=(20.0, 0.0, 0.0), max=(21.0, 1.0, 1.0))]},
        {"furniture": [BoxSpec(min=(1.0, 0.0, 0.0), max=(2.0, 0.5, 3.5))]},
        {"furniture": [BoxSpec(min=(9.0, 1.5, 0.0), max=(10.0, 2.0, 1.0))]},
    ],
)
def test_scene_validation_rejects_bad_layouts(update):
    values = standard_scene().model_dump()
    values.update({key: [item.model_dump() for item in items] for key, items in update.items()})
    with pytest.raises(ValidationError):
        SceneSpec(**values)


def test_box_and_sensor_validation():
    with pytest.raises(ValidationError):
        BoxSpec(min=(1.0, 1.0, 1.0), max=(2.0, 1.0, 2.0))
    with pytest.raises(ValidationError):
        SensorSpec(fov_low=10.0, fov_high=-10.0)
    with pytest.raises(ValidationError):
        WallSpec(start=(0.0, 0.0), end=(1.0, 0.0), height=-1.0)
    with pytest.raises(ValidationError):
        WallSpec(start=(0.0, 0.0), end=(1.0, 0.0), thickness=-0.1)


def test_sensor_elevations_start_at_the_top():
    elevations = np.degrees(SensorSpec().elevations())
    assert elevations[0] == pytest.approx(15.0)
    assert elevations[-1] == pytest.approx(-15.0)
    assert np.all(np.diff(elevations) < 0)


def test_scene_text_round_trip():
    sensor = SensorSpec(azimuth_steps=900, noise_sigma=0.01)
    scene, parsed_sensor = parse_scene_text(serialize_scene(standard_scene(), sensor))
    assert scene == standard_scene()
    assert parsed_sensor == sensor


def test_scene_text_rejects_unknown_keys():
    with pytest.raises(ParseError, match="bogus"):
        parse_scene_text("ceiling_height = 3.0\nbogus = 1\n")


def test_scene_text_rejects_malformed_coordinates():
    with pytest.raises(ParseError):
        parse_scene_text("wall.0.start = 0 1 2\nwall.0.end = 1 0\n")


def test_load_scene_from_file(box_scene_file):
    scene, sensor = load_scene(box_scene_file)
    assert len(scene.walls) == 4
    assert scene.frames == 3
    assert sensor.azimuth_steps == 900


def test_load_scene_missing_file(tmp_path):
    with pytest.raises(ParseError, match="not found"):
        load_scene(tmp_path / "nowhere.conf")


def test_bundled_scene_file_is_the_standard_scene():
    scene, sensor = load_scene(settings.PROJECT_ROOT / "data" / "scenes" / "standard.scene")
    assert scene == standard_scene()
    assert sensor == SensorSpec()

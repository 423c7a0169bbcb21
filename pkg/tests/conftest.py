import pytest

from app.config import PipelineConfig
from app.core.geometry import Pose
from app.services.pipeline import SyntheticSource, run_pipeline
from app.simulation.raycast import simulate_frame
from app.simulation.scene import SceneSpec, SensorSpec, WallSpec, serialize_scene, standard_scene


def make_box_room(frames: int = 4) -> SceneSpec:
    """Empty 8 m x 3 m room; the robot drives along its centre line."""
    return SceneSpec(
        ceiling_height=3.0,
        walls=[
            WallSpec(start=(0.0, -1.5), end=(8.0, -1.5)),
            WallSpec(start=(8.0, -1.5), end=(8.0, 1.5)),
            WallSpec(start=(8.0, 1.5), end=(0.0, 1.5)),
            WallSpec(start=(0.0, 1.5), end=(0.0, -1.5)),
        ],
        waypoints=[(2.0, 0.0, 0.0), (6.0, 0.0, 0.0)],
        frames=frames,
        frame_rate=10.0,
    )


@pytest.fixture
def box_room():
    return make_box_room()


@pytest.fixture
def fast_sensor():
    return SensorSpec(azimuth_steps=900)


@pytest.fixture
def box_frame(box_room):
    return simulate_frame(box_room, SensorSpec(), Pose.from_xyz_yaw(4.0, 0.0, 0.0, 0.0))


@pytest.fixture
def box_scene_file(tmp_path, box_room, fast_sensor):
    path = tmp_path / "box.conf"
    path.write_text(serialize_scene(box_room.model_copy(update={"frames": 3}), fast_sensor), encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def standard_run(tmp_path_factory):
    output = tmp_path_factory.mktemp("standard_run")
    return run_pipeline(PipelineConfig(), SyntheticSource(scene=standard_scene()), output)


@pytest.fixture(scope="session")
def noisy_run(tmp_path_factory):
    output = tmp_path_factory.mktemp("noisy_run")
    config = PipelineConfig(diff_smoothing=9)
    source = SyntheticSource(scene=standard_scene(), sensor=SensorSpec(noise_sigma=0.01), seed=0)
    return run_pipeline(config, source, output)

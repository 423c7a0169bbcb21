import pytest
from pydantic import ValidationError

from app.config import PipelineConfig, build_config, load_config, parse_config_text, serialize_config
from app.core.errors import ConfigError


def test_default_config_values():
    config = PipelineConfig()
    assert config.z_floor == 0.10
    assert config.dist_tol == 0.05
    assert config.angle_tol == 10.0
    assert config.min_height == 1.5
    assert config.d_threshold == 0.3
    assert config.min_points == 10
    assert config.sigma_th == 0.05
    assert config.delta_door == 0.02
    assert config.h_min == 1.6
    assert config.resolution == 0.05
    assert config.slice_below_ceiling == (0.5, 0.6)
    assert config.slice_mid_height == (0.9, 1.1)
    assert config.jobs == 1


def test_parse_config_text_overrides_defaults():
    config = parse_config_text(
        "# tuned for a noisy scanner\n"
        "z_floor = 0.15\n"
        "candidate_strategy = lowest\n"
        "slice_mid_height = 0.8 1.2\n"
    )
    assert config.z_floor == 0.15
    assert config.candidate_strategy == "lowest"
    assert config.slice_mid_height == (0.8, 1.2)
    assert config.delta_door == 0.02


def test_unknown_key_is_reported():
    with pytest.raises(ConfigError, match="wall_tolerance"):
        parse_config_text("wall_tolerance = 0.1\n")


@pytest.mark.parametrize(
    "text",
    [
        "z_floor = -1\n",
        "angle_tol = 95\n",
        "candidate_strategy = middle\n",
        "slice_below_ceiling = 0.6 0.5\n",
        "slice_mid_height = 1.0\n",
        "resample_count = 5\n",
    ],
)
def test_invalid_values_raise_config_error(text):
    with pytest.raises(ConfigError):
        parse_config_text(text, source="tuned.conf")


def test_config_error_names_the_source():
    with pytest.raises(ConfigError, match="tuned.conf"):
        parse_config_text("jobs = 0\n", source="tuned.conf")


def test_serialized_config_parses_back():
    config = PipelineConfig(z_floor=0.12, candidate_strategy="lowest", slice_mid_height=(0.7, 1.3), jobs=4)
    assert parse_config_text(serialize_config(config)) == config


def test_load_config_applies_overrides_over_the_file(tmp_path):
    path = tmp_path / "pipeline.conf"
    path.write_text("z_floor = 0.2\nsigma_th = 0.04\n", encoding="utf-8")
    config = load_config(path, {"sigma_th": 0.03, "h_min": None})
    assert config.z_floor == 0.2
    assert config.sigma_th == 0.03
    assert config.h_min == 1.6


def test_load_config_without_a_file():
    assert load_config() == PipelineConfig()


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.conf")


def test_build_config_rejects_unknown_override():
    with pytest.raises(ConfigError):
        build_config({"bogus": 1})


def test_config_is_immutable():
    config = PipelineConfig()
    with pytest.raises(ValidationError):
        config.z_floor = 0.3

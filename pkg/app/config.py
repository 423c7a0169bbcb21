from __future__ import annotations

import io
import logging
import os
from pathlib import Path
from typing import Any, Dict, Literal, Mapping, Optional, Tuple

from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.core.errors import ConfigError

logger = logging.getLogger(__name__)

PROJECT_ROOT = Path(__file__).parent.parent
load_dotenv(PROJECT_ROOT / ".env")


class Settings:
    # Project paths
    PROJECT_ROOT = PROJECT_ROOT
    DATA_DIR = Path(os.getenv("FFMAP_DATA_DIR", str(PROJECT_ROOT / "data")))
    OUTPUT_DIR = Path(os.getenv("FFMAP_OUTPUT_DIR", str(DATA_DIR / "runs")))
    SCENES_DIR = DATA_DIR / "scenes"

    # API Settings
    API_TITLE = "Furniture-Free Mapping API"
    API_VERSION = "1.0.0"
    API_HOST = os.getenv("FFMAP_API_HOST", "0.0.0.0")
    API_PORT = int(os.getenv("FFMAP_API_PORT", "8000"))

    # Logging
    LOG_LEVEL = os.getenv("FFMAP_LOG_LEVEL", "INFO")
    LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    # Pipeline
    DEFAULT_CONFIG_FILE: Optional[str] = os.getenv("FFMAP_CONFIG")
    MAX_JOBS = int(os.getenv("FFMAP_MAX_JOBS", str(os.cpu_count() or 1)))


settings = Settings()


class PipelineConfig(BaseModel):
    """Every tunable of the pipeline, with the documented defaults.

    Distances are meters, angles degrees.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    # Rearrangement
    n_beams: int = Field(32, ge=1)
    z_floor: float = Field(0.10, gt=0)
    dist_tol: float = Field(0.05, gt=0)
    angle_tol: float = Field(10.0, gt=0, lt=90)
    min_height: float = Field(1.5, gt=0)
    ceiling_iterations: int = Field(200, ge=1)
    ceiling_min_fraction: float = Field(0.05, gt=0, le=1)
    resample_count: int = Field(200, ge=2)

    # Wall detection
    d_threshold: float = Field(0.3, gt=0)
    min_points: int = Field(10, ge=2)
    diff_smoothing: int = Field(1, ge=1)
    candidate_strategy: Literal["highest", "lowest"] = "highest"
    sigma_th: float = Field(0.05, gt=0)
    min_lines_per_wall: int = Field(3, ge=1)
    vertical_tol: float = Field(10.0, gt=0, lt=90)
    grow_iterations: int = Field(100, ge=1)

    # Labeling
    delta_door: float = Field(0.02, gt=0)
    h_min: float = Field(1.6, gt=0)
    wall_band: float = Field(0.08, gt=0)
    door_recess_max: float = Field(0.20, gt=0)
    door_merge_gap: float = Field(0.3, gt=0)

    # Maps
    resolution: float = Field(0.05, gt=0)
    min_hits: int = Field(3, ge=1)
    door_clearance: int = Field(1, ge=0)
    slice_below_ceiling: Tuple[float, float] = (0.5, 0.6)
    slice_mid_height: Tuple[float, float] = (0.9, 1.1)

    # Evaluation
    area_cell: float = Field(0.05, gt=0)
    match_tol: float = Field(0.01, gt=0)

    # Execution
    seed: int = Field(0, ge=0)
    jobs: int = Field(1, ge=1)

    @field_validator("slice_below_ceiling", "slice_mid_height", mode="before")
    @classmethod
    def _parse_band(cls, value: Any) -> Any:
        if isinstance(value, str):
            parts = value.replace(",", " ").split()
            if len(parts) != 2:
                raise ValueError(f"expected two numbers, got {value!r}")
            return float(parts[0]), float(parts[1])
        return value

    @field_validator("slice_below_ceiling", "slice_mid_height")
    @classmethod
    def _check_band(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        low, high = value
        if low < 0 or high <= low:
            raise ValueError(f"band must satisfy 0 <= low < high, got {value}")
        return value

    @model_validator(mode="after")
    def _check_counts(self) -> "PipelineConfig":
        if self.resample_count < self.min_points:
            raise ValueError(
                f"resample_count ({self.resample_count}) must be >= min_points ({self.min_points})"
            )
        return self

    def with_overrides(self, overrides: Mapping[str, Any]) -> "PipelineConfig":
        values = self.model_dump()
        values.update({key: value for key, value in overrides.items() if value is not None})
        return build_config(values)


def build_config(values: Mapping[str, Any], source: str = "<overrides>") -> PipelineConfig:
    """Validate raw values into a PipelineConfig, raising ConfigError."""
    unknown = sorted(set(values) - set(PipelineConfig.model_fields))
    if unknown:
        raise ConfigError(f"{source}: unknown config key(s): {', '.join(unknown)}")
    try:
        return PipelineConfig(**dict(values))
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in error['loc'])}: {error['msg']}" for error in exc.errors()
        )
        raise ConfigError(f"{source}: {problems}") from exc


def parse_config_text(text: str, source: str = "<text>") -> PipelineConfig:
    """Parse ``key = value`` lines (``#`` comments allowed); missing keys keep defaults."""
    raw: Dict[str, Optional[str]] = dotenv_values(stream=io.StringIO(text))
    values = {key.strip(): value for key, value in raw.items() if value is not None and value != ""}
    return build_config(values, source)


def load_config(path: Optional[Path] = None, overrides: Optional[Mapping[str, Any]] = None) -> PipelineConfig:
    """Load a config file (if any) and apply explicit overrides on top."""
    config = PipelineConfig()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Config file not found: {path}")
        config = parse_config_text(path.read_text(encoding="utf-8"), source=str(path))
        logger.info(f"Loaded pipeline config from {path}")
    if overrides:
        config = config.with_overrides(overrides)
    return config


def _format_value(value: Any) -> str:
    if isinstance(value, tuple):
        return " ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(config: PipelineConfig) -> str:
    """Render every field as ``key = value`` in declaration order."""
    lines = ["# furniture-free mapping pipeline configuration"]
    for name in PipelineConfig.model_fields:
        lines.append(f"{name} = {_format_value(getattr(config, name))}")
    return "\n".join(lines) + "\n"

from pydantic import BaseModel, Field, model_validator
from typing import Optional, Dict, Any

class RunRequest(BaseModel):
    """Request model for a pipeline run."""
    frames_dir: Optional[str] = Field(None, description="Directory of <seconds>.ply frames")
    trajectory: Optional[str] = Field(None, description="Trajectory file for recorded frames")
    truth: Optional[str] = Field(None, description="Optional ground-truth labeled PLY for recorded frames")
    scene_file: Optional[str] = Field(None, description="Scene file for a synthetic run")
    standard_scene: bool = Field(False, description="Use the built-in test scene")
    output_dir: Optional[str] = Field(None, description="Directory for the run artifacts")
    config: Dict[str, Any] = Field(default_factory=dict, description="Pipeline config overrides")

    @model_validator(mode="after")
    def _one_source(self) -> "RunRequest":
        recorded = self.frames_dir is not None
        synthetic = self.scene_file is not None or self.standard_scene
        if recorded == synthetic:
            raise ValueError("give either frames_dir (+ trajectory) or a scene")
        if recorded and self.trajectory is None:
            raise ValueError("recorded frames need a trajectory")
        return self

class EvaluateRequest(BaseModel):
    """Request model for label evaluation."""
    predicted: str = Field(..., description="Predicted labeled PLY")
    truth: str = Field(..., description="Ground-truth labeled PLY")
    match_tol: float = Field(0.01, gt=0, description="Point pairing tolerance in meters")
    area_cell: float = Field(0.05, gt=0, description="Area bin size in meters")

class GridCompareRequest(BaseModel):
    """Request model for grid comparison."""
    first: str = Field(..., description="First grid (.pgm or .yaml)")
    second: str = Field(..., description="Second grid (.pgm or .yaml)")

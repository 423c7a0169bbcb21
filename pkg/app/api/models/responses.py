from pydantic import BaseModel
from typing import List, Dict, Optional

class HealthResponse(BaseModel):
    """Response model for health check."""
    ok: bool
    message: str
    version: Optional[str] = None

class TimingRow(BaseModel):
    """One statistic of the timing report."""
    name: str
    average: float
    std: float
    min: float
    max: float

class DoorRow(BaseModel):
    """A detected doorway in world coordinates."""
    kind: str
    lintel_z: float
    x: float
    y: float
    z: float
    width: float
    lines: int

class MetricsRow(BaseModel):
    """Per-label area metrics."""
    label: str
    fp_area: float
    tp_area: float
    fn_area: float
    precision: Optional[float] = None
    recall: Optional[float] = None
    f1: Optional[float] = None

class RunResponse(BaseModel):
    """Response model for a pipeline run."""
    success: bool
    frames_total: int
    frames_processed: int
    frames_skipped: int
    points: int
    artifacts: Dict[str, str]
    timing: List[TimingRow]
    doors: List[DoorRow]
    metrics: Optional[List[MetricsRow]] = None

class EvaluateResponse(BaseModel):
    """Response model for label evaluation."""
    success: bool
    rows: List[MetricsRow]
    table: str

class GridCompareResponse(BaseModel):
    """Response model for grid comparison."""
    success: bool
    agreement: float
    cells: int
    confusion: Dict[str, int]

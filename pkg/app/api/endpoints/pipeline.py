from fastapi import APIRouter, HTTPException
from pathlib import Path
import logging
from app.api.endpoints.evaluation import metrics_rows
from app.api.models.requests import RunRequest
from app.api.models.responses import DoorRow, RunResponse, TimingRow
from app.config import settings, load_config
from app.core.errors import FfmapError
from app.services.pipeline import RecordedSource, SyntheticSource, run_pipeline
from app.simulation.scene import load_scene, standard_scene

logger = logging.getLogger(__name__)
router = APIRouter(prefix="/pipeline", tags=["pipeline"])

def _source(request: RunRequest, seed: int):
    if request.frames_dir is not None:
        return RecordedSource(
            frames_dir=Path(request.frames_dir),
            trajectory_path=Path(request.trajectory),
            truth_path=Path(request.truth) if request.truth else None,
        )
    if request.scene_file is not None:
        scene, sensor = load_scene(Path(request.scene_file))
        return SyntheticSource(scene=scene, sensor=sensor, seed=seed)
    return SyntheticSource(scene=standard_scene(), seed=seed)

@router.post("/run", response_model=RunResponse)
def run(request: RunRequest):
    """Run the full mapping pipeline and write its artifacts."""
    try:
        default_file = Path(settings.DEFAULT_CONFIG_FILE) if settings.DEFAULT_CONFIG_FILE else None
        config = load_config(default_file, request.config)
        output_dir = Path(request.output_dir) if request.output_dir else settings.OUTPUT_DIR
        result = run_pipeline(config, _source(request, config.seed), output_dir)
    except FfmapError as e:
        logger.error(f"Pipeline run failed: {e}")
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Error running pipeline: {e}")
        raise HTTPException(status_code=500, detail=str(e))

    return RunResponse(
        success=True,
        frames_total=result.frames_total,
        frames_processed=result.frames_processed,
        frames_skipped=result.frames_skipped,
        points=len(result.cloud),
        artifacts={name: str(path) for name, path in result.artifacts.items()},
        timing=[
            TimingRow(name=name, average=s.average, std=s.std, min=s.min, max=s.max)
            for name, s in result.timing.rows.items()
        ],
        doors=[
            DoorRow(
                kind=d.kind, lintel_z=d.lintel_z, x=d.center[0], y=d.center[1], z=d.center[2], width=d.width, lines=d.lines
            )
            for d in result.doors
        ],
        metrics=metrics_rows(result.metrics) if result.metrics is not None else None,
    )

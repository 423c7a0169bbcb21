from fastapi import APIRouter, HTTPException
from pathlib import Path
from typing import List
import logging
from app.api.models.requests import EvaluateRequest
from app.api.models.responses import EvaluateResponse, MetricsRow
from app.core.errors import FfmapError
from app.core.evaluation import LabelMetrics, metrics, metrics_table
from app.utils.ply_io import read_labeled_cloud

logger = logging.getLogger(__name__)
router = APIRouter(tags=["evaluation"])

def metrics_rows(rows: List[LabelMetrics]) -> List[MetricsRow]:
    return [
        MetricsRow(
            label=row.label.name.capitalize(),
            fp_area=row.fp_area,
            tp_area=row.tp_area,
            fn_area=row.fn_area,
            precision=row.precision,
            recall=row.recall,
            f1=row.f1,
        )
        for row in rows
    ]

@router.post("/evaluate", response_model=EvaluateResponse)
def evaluate_labels(request: EvaluateRequest):
    """Compare a predicted labeled cloud against ground truth."""
    try:
        predicted = read_labeled_cloud(Path(request.predicted))
        truth = read_labeled_cloud(Path(request.truth))
        rows = metrics(predicted, truth, match_tol=request.match_tol, cell=request.area_cell)
        return EvaluateResponse(success=True, rows=metrics_rows(rows), table=metrics_table(rows))
    except FfmapError as e:
        logger.error(f"Evaluation failed: {e}")
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Error evaluating labels: {e}")
        raise HTTPException(status_code=500, detail=str(e))

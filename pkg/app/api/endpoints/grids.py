from fastapi import APIRouter, HTTPException
from pathlib import Path
import logging
from app.api.models.requests import GridCompareRequest
from app.api.models.responses import GridCompareResponse
from app.core.errors import FfmapError
from app.core.map_builder import compare_grids
from app.utils.grid_io import read_grid

logger = logging.getLogger(__name__)
router = APIRouter(prefix="/grids", tags=["grids"])

@router.post("/compare", response_model=GridCompareResponse)
def compare(request: GridCompareRequest):
    """Cell agreement between two occupancy grids of the same shape."""
    try:
        result = compare_grids(read_grid(Path(request.first)), read_grid(Path(request.second)))
    except (FfmapError, ValueError) as e:
        logger.error(f"Grid comparison failed: {e}")
        raise HTTPException(status_code=400, detail=str(e))
    return GridCompareResponse(
        success=True,
        agreement=result.agreement,
        cells=result.cells,
        confusion={f"{a}/{b}": count for (a, b), count in result.confusion.items()},
    )

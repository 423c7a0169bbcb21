"""Binary PGM occupancy grids with a ``map.yaml``-style metadata sibling."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Tuple

import numpy as np
import yaml
from PIL import Image

from app.core.errors import ParseError
from app.core.map_builder import FREE, OCCUPIED, UNKNOWN, OccupancyGrid

logger = logging.getLogger(__name__)


def metadata_path(pgm_path: Path) -> Path:
    return Path(pgm_path).with_suffix(".yaml")


def write_grid(pgm_path: Path, grid: OccupancyGrid) -> Tuple[Path, Path]:
    """Write ``<name>.pgm`` (top row = largest y) and ``<name>.yaml``."""
    pgm_path = Path(pgm_path)
    with open(pgm_path, "wb") as f:
        f.write(f"P5\n{grid.width} {grid.height}\n255\n".encode())
        f.write(np.flipud(grid.cells).astype(np.uint8).tobytes())

    meta = {
        "image": pgm_path.name,
        "resolution": float(grid.resolution),
        "origin": [float(grid.origin[0]), float(grid.origin[1]), 0.0],
        "negate": 0,
        "occupied_thresh": 0.65,
        "free_thresh": 0.196,
        "occupied_value": OCCUPIED,
        "free_value": FREE,
        "unknown_value": UNKNOWN,
    }
    yaml_path = metadata_path(pgm_path)
    with open(yaml_path, "w", encoding="utf-8") as f:
        yaml.safe_dump(meta, f, sort_keys=False)
    logger.info(f"Wrote {grid.width}x{grid.height} grid to {pgm_path}")
    return pgm_path, yaml_path


def read_pgm(path: Path) -> np.ndarray:
    """Raster rows as stored in the file (top row first)."""
    path = Path(path)
    if not path.exists():
        raise ParseError("grid image not found", path=path)
    try:
        with Image.open(path) as image:
            if image.format != "PPM" or image.mode != "L":
                raise ValueError(f"expected an 8-bit grayscale PGM, got {image.format} {image.mode}")
            return np.array(image, dtype=np.uint8)
    except (OSError, ValueError) as e:
        raise ParseError(f"unreadable grid image: {e}", path=path) from e


def read_grid(path: Path) -> OccupancyGrid:
    """Load a grid from its ``.pgm`` or ``.yaml`` file."""
    path = Path(path)
    yaml_path = path if path.suffix in (".yaml", ".yml") else metadata_path(path)
    if not yaml_path.exists():
        raise ParseError("grid metadata not found", path=yaml_path)
    try:
        meta = yaml.safe_load(yaml_path.read_text(encoding="utf-8"))
        resolution = float(meta["resolution"])
        origin = (float(meta["origin"][0]), float(meta["origin"][1]))
        image = yaml_path.parent / meta["image"]
    except (yaml.YAMLError, KeyError, TypeError, ValueError, IndexError) as e:
        raise ParseError(f"invalid grid metadata: {e}", path=yaml_path) from e
    cells = np.flipud(read_pgm(image)).copy()
    height, width = cells.shape
    return OccupancyGrid(width=width, height=height, resolution=resolution, origin=origin, cells=cells)

"""Local artifact repository for pipeline runs."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

from app.config import settings
from app.core.labeling import LabeledCloud
from app.core.map_builder import OccupancyGrid
from app.utils.grid_io import write_grid
from app.utils.ply_io import write_labeled_cloud

logger = logging.getLogger(__name__)


@dataclass
class StoredArtifact:
    """Metadata returned after storing an artifact."""

    name: str
    path: Path


def _finalize_filename(requested: str, required_suffix: str) -> str:
    """Return a bare filename carrying the required suffix."""
    candidate = Path(requested.strip()).name
    suffix = required_suffix if required_suffix.startswith(".") else f".{required_suffix}"
    if not candidate.lower().endswith(suffix.lower()):
        candidate = f"{candidate}{suffix}"
    return candidate


class ArtifactRepository:
    """Writes run outputs (clouds, grids, reports) below one output directory."""

    def __init__(self, root: Optional[Path] = None) -> None:
        self.root = Path(root or settings.OUTPUT_DIR)
        self.root.mkdir(parents=True, exist_ok=True)
        self.stored: Dict[str, StoredArtifact] = {}

    def _remember(self, name: str, path: Path) -> StoredArtifact:
        artifact = StoredArtifact(name=name, path=path)
        self.stored[name] = artifact
        return artifact

    def store_cloud(self, name: str, cloud: LabeledCloud) -> StoredArtifact:
        target = self.root / _finalize_filename(name, ".ply")
        write_labeled_cloud(target, cloud)
        return self._remember(name, target)

    def store_grid(self, name: str, grid: OccupancyGrid) -> StoredArtifact:
        target = self.root / _finalize_filename(name, ".pgm")
        pgm_path, yaml_path = write_grid(target, grid)
        self._remember(f"{name}_metadata", yaml_path)
        return self._remember(name, pgm_path)

    def store_text(self, name: str, text: str, suffix: str = ".tsv") -> StoredArtifact:
        target = self.root / _finalize_filename(name, suffix)
        with target.open("w", encoding="utf-8") as handle:
            handle.write(text)
        logger.info(f"Wrote {target}")
        return self._remember(name, target)

    def paths(self) -> Dict[str, Path]:
        return {name: artifact.path for name, artifact in self.stored.items()}

from . import health, pipeline, evaluation, grids

__all__ = ["health", "pipeline", "evaluation", "grids"]

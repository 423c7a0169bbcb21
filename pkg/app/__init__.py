"""
Furniture-Free Mapping
Semantic labeling and 2D map building from vertically mounted Lidar scans
"""

__version__ = "1.0.0"

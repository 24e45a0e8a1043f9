"""Depth video -> 3D dynamic voxel point sets -> multi-stream point-set classifier."""

__version__ = "0.1.0"

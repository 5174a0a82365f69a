"""Hybrid additive/subtractive process planning on voxel solids."""

__version__ = "0.1.0"

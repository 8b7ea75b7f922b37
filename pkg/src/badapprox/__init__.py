"""Badly approximable points with weights on a fractal segment: exact construction,
certification, tree measures and absolute games."""

__version__ = "0.1.0"

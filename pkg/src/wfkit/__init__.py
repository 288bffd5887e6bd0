"""Geometry and evaluation toolkit for wireframe parsing."""
from .model import Point2, ScoredLine, Wireframe, WireframeError, to_scored_lines, validate

__all__ = ["Point2", "ScoredLine", "Wireframe", "WireframeError", "to_scored_lines", "validate"]
__version__ = "0.1.0"

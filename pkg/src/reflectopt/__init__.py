"""Reflector placement optimization for radar-based indoor positioning.

The package computes placement quality under two objectives (fingerprint
ambiguity and multilateration GDOP), optimizes placements with an extended
multi-objective particle swarm optimizer, and validates placements by
tracking a simulated mobile robot with a Monte Carlo localization filter.
"""

from .geom import Polygon, RoomModel, Grid, build_grid

__version__ = "0.1.0"

__all__ = ["Polygon", "RoomModel", "Grid", "build_grid", "__version__"]

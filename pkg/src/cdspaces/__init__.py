"""Collapsing l-infinity metric measure spaces X_f and their curvature-dimension checks.

X_f = {(x, y) : -1 <= x <= 1, 0 <= y <= f(x)} carries the d_inf metric and
the measure m = (1 / f(x)) exp(-K (y / f(x))^2) dx dy, whose x-marginal is
the constant C_K regardless of f.
"""

from .geometry import Point2, PairClass, classify_pair, geodesic_refine, midpoint
from .measure import DiscreteMeasure, SpaceParams, block_measure, build_grid, c_K, fiber_measure
from .profiles import PRESETS, ProfileFn, parse_profile, preset, validate_membership
from .transport import build_structured_map, solve_discrete_ot

__version__ = "0.1.0"

__all__ = [
    "DiscreteMeasure", "PRESETS", "PairClass", "Point2", "ProfileFn", "SpaceParams", "block_measure",
    "build_grid", "build_structured_map", "c_K", "classify_pair", "fiber_measure", "geodesic_refine",
    "midpoint", "parse_profile", "preset", "solve_discrete_ot", "validate_membership",
]

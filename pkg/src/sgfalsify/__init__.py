"""Synthesis-guided adversarial scenario generation for gray-box systems."""

from .lp import (LinearProgram, LpSolution, LpStatus, LpError,
                 EmptyPolytopeError, UnboundedPolytopeError, solve,
                 TOL_FEAS, TOL_OBJ)
from .geometry import (HPolytope, VPolytope, Zonotope, EMPTY,
                       affine_map, minkowski_sum, zonotope_intersection_under,
                       project, contains_point, is_empty, distance_1norm,
                       support, chebyshev_center_poly)

__all__ = [
    "LinearProgram", "LpSolution", "LpStatus", "LpError",
    "EmptyPolytopeError", "UnboundedPolytopeError", "solve",
    "TOL_FEAS", "TOL_OBJ",
    "HPolytope", "VPolytope", "Zonotope", "EMPTY",
    "affine_map", "minkowski_sum", "zonotope_intersection_under",
    "project", "contains_point", "is_empty", "distance_1norm",
    "support", "chebyshev_center_poly",
]

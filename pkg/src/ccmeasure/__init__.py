"""Chance-constrained linear programs over probability measures.

A sampled linear program yields discrete measures, a Gaussian-mixture solver
yields densities, and both are checked against a point-decision baseline by
fresh-scenario Monte Carlo.
"""

from .errors import DegenerateSupportError, DomainError, GmmSolveError, NumericError
from .problem import Box, Problem, PointPolicy, DiscretePolicy, GmmPolicy, get_problem, list_problems
from .sampling import RngStream

__all__ = [
    "Box",
    "Problem",
    "PointPolicy",
    "DiscretePolicy",
    "GmmPolicy",
    "RngStream",
    "DomainError",
    "NumericError",
    "DegenerateSupportError",
    "GmmSolveError",
    "get_problem",
    "list_problems",
]

__version__ = "0.1.0"

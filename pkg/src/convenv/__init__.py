"""Convex envelopes of functions on convex planar domains.

The envelope solves the obstacle problem ``min{f - u, lambda_1[D^2 u]} = 0``.
It is discretized with P1 elements on a fine mesh, centered second
differences with a coarse step over a finite direction set, and solved with
Howard's policy iteration.
"""
from .directions import build_angular, build_lattice
from .envelopes import EXAMPLES, exact_u, get_example, oracle_envelope
from .experiment import ExperimentConfig, emit_report, fit_order, run_experiment
from .geometry import Polygon, UnitDisk, square
from .mesh import build_mesh, read_mesh, write_mesh
from .operator import DiscretizationParams, build_stencils, residual
from .solver import howard_solve, solve_polytope
from .widestencil import build_grid, wide_howard_solve

__version__ = "0.1.0"

__all__ = [
    "build_angular", "build_lattice", "EXAMPLES", "exact_u", "get_example", "oracle_envelope",
    "ExperimentConfig", "emit_report", "fit_order", "run_experiment", "Polygon", "UnitDisk",
    "square", "build_mesh", "read_mesh", "write_mesh", "DiscretizationParams", "build_stencils",
    "residual", "howard_solve", "solve_polytope", "build_grid", "wide_howard_solve",
]

"""Guaranteed maximum-norm error bounds for 1D parabolic P1-FEM runs.

The package solves du/dt - eps*u'' + r(x)*u = f on an interval with the
extrapolated backward-Euler scheme (one full step and two half steps
combined as 2w - v) and evaluates a fully computable bound on the
maximum-norm error at the final time, built from elliptic reconstruction
functionals and Green's-function weight integrals.
"""

from .bound import EstimatorBreakdown, GreenWeights, assemble_total, compute_weights
from .elliptic import EllipticEstimator, make_estimator
from .experiments import RunConfig, RunRecord, emit_tables, run_matrix
from .fem1d import NodalField, SpatialMesh, sup_norm
from .problem import (GreensBounds, ProblemSpec, builtin_test_problem, load_problem,
                      manufactured_problem, validate)
from .reconstruction import PsiFamily, StarDefect, compute_psi, compute_psi_family
from .reference import ReferenceSolution, error_at_T, exact_reference, solve_reference
from .stepping import TimeGrid, Trajectory, backward_euler_step, delta_t, initial_field, run

__all__ = [
    "EstimatorBreakdown", "GreenWeights", "assemble_total", "compute_weights",
    "EllipticEstimator", "make_estimator",
    "RunConfig", "RunRecord", "emit_tables", "run_matrix",
    "NodalField", "SpatialMesh", "sup_norm",
    "GreensBounds", "ProblemSpec", "builtin_test_problem", "load_problem",
    "manufactured_problem", "validate",
    "PsiFamily", "StarDefect", "compute_psi", "compute_psi_family",
    "ReferenceSolution", "error_at_T", "exact_reference", "solve_reference",
    "TimeGrid", "Trajectory", "backward_euler_step", "delta_t", "initial_field", "run",
]

__version__ = "0.1.0"

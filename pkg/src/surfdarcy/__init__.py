"""Stabilized mixed finite elements for Darcy flow on closed surfaces."""

from .analysis import (CASES, PUBLISHED_ORDERS, ConvergenceRecord,
                       ExactSolution, eoc, run_all_cases, run_case,
                       torus_exact_solution)
from .assembly import (ErrorNorms, LinearSystem, ProblemData, assemble,
                       assemble_error_norms, interpolate_solution)
from .fespace import FESpace, build_space, eval_basis, quadrature_for
from .geometry import ImplicitSurface, Sphere, Torus, surface_gradient_of_scalar
from .mesh import (ParametricMesh, build_structured_torus,
                   discrete_normal_and_measure, element_map,
                   jiggle_to_unstructured, mesh_quality_report)
from .solver import SolverConfig, SolveStats, solve

__version__ = "0.1.0"

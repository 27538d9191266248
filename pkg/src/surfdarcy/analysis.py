"""Torus benchmark: manufactured solution, convergence driver, EOC tables.

The manufactured fields on the torus (major radius R, minor radius r,
z-axis) are

    u = (2xz, -2yz, 2(x^2 - y^2)(R - d)/d),   d = sqrt(x^2 + y^2)
    p = z,   f = 0,   g = u + grad_Gamma p

with u tangential and surface-divergence free, so the scalar source
vanishes.  Eight standard cases combine velocity/pressure/geometry orders
with structured and jiggled mesh families.
"""

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .assembly import ProblemData, assemble, assemble_error_norms
from .errors import DomainError, NumericalError, SurfDarcyError
from .geometry import Torus, surface_gradient_of_scalar
from .mesh import build_structured_torus, jiggle_to_unstructured
from .fespace import build_space
from .solver import SolverConfig, solve, solve_matrix

DEFAULT_LEVELS = (16, 32, 64, 128)
DEFAULT_SEED = 42
DEFAULT_JIGGLE_AMPLITUDE = 0.25

# case id -> (k_u, k_p, k_g, family)
CASES = {
    1: (1, 1, 1, "structured"),
    2: (1, 2, 1, "structured"),
    3: (1, 1, 1, "unstructured"),
    4: (1, 2, 1, "unstructured"),
    5: (1, 1, 2, "structured"),
    6: (1, 2, 2, "structured"),
    7: (1, 1, 2, "unstructured"),
    8: (1, 2, 2, "unstructured"),
}

# case id -> published (order e_u, order e_p)
PUBLISHED_ORDERS = {
    1: (2, 2), 2: (2, 2), 3: (1, 2), 4: (2, 2),
    5: (2, 2), 6: (2, 3), 7: (1, 2), 8: (2, 3),
}

CSV_COLUMNS = ("level,n_major,h,n_dofs,e_u,eoc_u,e_p,eoc_p,"
               "e_u_tan,eoc_u_tan,e_u_norm,eoc_u_norm,energy,eoc_energy")


@dataclass
class ExactSolution:
    """Closed-form fields on the exact surface (u tangential, p mean zero)."""
    surface: object
    u: callable
    p: callable
    f: callable
    g: callable


def torus_exact_solution(surface):
    """Manufactured Darcy solution on the given torus."""
    if not isinstance(surface, Torus):
        raise DomainError("the manufactured solution is defined on a torus")
    big_r = surface.major_radius

    def u(points):
        points = np.asarray(points, dtype=float)
        x, y, z = points[..., 0], points[..., 1], points[..., 2]
        d = np.hypot(x, y)
        if np.any(d <= surface.tolerance):
            raise DomainError("velocity field undefined on the z-axis")
        return np.stack([2.0 * x * z, -2.0 * y * z,
                         2.0 * (x * x - y * y) * (big_r - d) / d], axis=-1)

    def p(points):
        points = np.asarray(points, dtype=float)
        return points[..., 2]

    def f(points):
        points = np.asarray(points, dtype=float)
        return np.zeros(points.shape[:-1])

    def g(points):
        return u(points) + surface_gradient_of_scalar(surface, p, points)

    return ExactSolution(surface=surface, u=u, p=p, f=f, g=g)


def eoc(errors, hs):
    """Experimental orders of convergence between consecutive levels."""
    if len(errors) != len(hs):
        raise ValueError("errors and hs must have equal length")
    if len(errors) < 2:
        raise ValueError("need at least two levels")
    if any(e <= 0.0 for e in errors):
        raise ValueError("errors must be positive (exact-to-roundoff level?)")
    if any(h <= 0.0 for h in hs):
        raise ValueError("mesh sizes must be positive")
    return [math.log(errors[i] / errors[i + 1]) / math.log(hs[i] / hs[i + 1])
            for i in range(len(errors) - 1)]


@dataclass
class LevelResult:
    level: int
    n_major: int
    h: float
    n_dofs: int
    e_u: float
    e_p: float
    e_u_tan: float
    e_u_norm: float
    energy: float
    solver_iterations: int = 0
    p_mean_integral: float = 0.0
    area: float = 0.0


@dataclass
class LevelArtifacts:
    """Solved state of one refinement level, kept for field export."""
    mesh: object
    space_u: object
    space_p: object
    solution: np.ndarray


_ERROR_KEYS = ("e_u", "e_p", "e_u_tan", "e_u_norm", "energy")


@dataclass
class ConvergenceRecord:
    case_id: Optional[int]
    k_u: int
    k_p: int
    k_g: int
    family: str
    split: str
    c_N: float
    seed: int
    levels: list = field(default_factory=list)
    failed: bool = False
    failure_message: str = ""
    artifacts: list = field(default_factory=list)

    def errors(self, key):
        return [getattr(row, key) for row in self.levels]

    def hs(self):
        return [row.h for row in self.levels]

    def eocs(self, key):
        """EOC column for one error: None for the first level."""
        if len(self.levels) < 2:
            return [None] * len(self.levels)
        return [None] + eoc(self.errors(key), self.hs())

    def last_eoc(self, key):
        return self.eocs(key)[-1]

    def to_csv_text(self):
        def fmt(v):
            return "" if v is None else f"{v:.17g}"

        lines = [CSV_COLUMNS]
        columns = {key: self.eocs(key) for key in _ERROR_KEYS}
        for i, row in enumerate(self.levels):
            cells = [str(row.level), str(row.n_major), fmt(row.h),
                     str(row.n_dofs)]
            for key in _ERROR_KEYS:
                cells.append(fmt(getattr(row, key)))
                cells.append(fmt(columns[key][i]))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def to_json_dict(self):
        rows = []
        columns = {key: self.eocs(key) for key in _ERROR_KEYS}
        for i, row in enumerate(self.levels):
            entry = {"level": row.level, "n_major": row.n_major,
                     "h": row.h, "n_dofs": row.n_dofs}
            for key in _ERROR_KEYS:
                entry[key] = getattr(row, key)
                entry["eoc_" + key] = columns[key][i]
            rows.append(entry)
        return {
            "config": {"case": self.case_id, "k_u": self.k_u,
                       "k_p": self.k_p, "k_g": self.k_g,
                       "family": self.family, "split": self.split,
                       "c_N": self.c_N, "seed": self.seed},
            "levels": rows,
            "failed": self.failed,
            "failure_message": self.failure_message,
        }

    def to_json_text(self):
        return json.dumps(self.to_json_dict(), indent=2) + "\n"


def level_seed(seed, n_major):
    """Per-level jiggle seed: levels are perturbed independently."""
    return [seed, n_major]


def run_case(case=None, orders=None, family=None, levels=DEFAULT_LEVELS,
             c_N=0.0, seed=DEFAULT_SEED, solver_config=None,
             quad_degree=None, split="alternating",
             jiggle_amplitude=DEFAULT_JIGGLE_AMPLITUDE, surface=None,
             cross_check=False, keep_artifacts=False):
    """Run one convergence study and return its ConvergenceRecord.

    Either ``case`` (1-8) or explicit ``orders=(k_u, k_p, k_g)`` plus
    ``family`` must be given.  Levels are mesh resolutions (ascending
    n_major).  A failing level aborts the case; the partial record is
    returned with ``failed`` set.
    """
    if case is not None:
        if case not in CASES:
            raise ValueError(f"case must be in 1..8, got {case}")
        k_u, k_p, k_g, family = CASES[case]
    else:
        if orders is None or family is None:
            raise ValueError("need either a case id or orders and family")
        k_u, k_p, k_g = orders
    if family not in ("structured", "unstructured"):
        raise ValueError(f"unknown mesh family {family!r}")
    if list(levels) != sorted(set(levels)):
        raise ValueError("levels must be strictly ascending")
    if surface is None:
        surface = Torus(1.0, 0.5)
    if solver_config is None:
        solver_config = SolverConfig()
    exact = torus_exact_solution(surface)
    data = ProblemData(f=exact.f, g=exact.g)

    record = ConvergenceRecord(case_id=case, k_u=k_u, k_p=k_p, k_g=k_g,
                               family=family, split=split, c_N=c_N, seed=seed)
    for idx, n_major in enumerate(levels):
        try:
            mesh = build_structured_torus(surface, n_major, k_g, split=split)
            if family == "unstructured":
                mesh = jiggle_to_unstructured(mesh, jiggle_amplitude,
                                              seed=level_seed(seed, n_major))
            space_u = build_space(mesh, k_u)
            space_p = build_space(mesh, k_p)
            system = assemble(space_u, space_p, data, c_N=c_N,
                              quad_degree=quad_degree)
            solution, stats = solve(system, solver_config)
            _check_galerkin_residual(system, solution, solver_config)
            if cross_check and system.size <= 20_000:
                _cross_check_dense(system, solution)
            norms = assemble_error_norms(space_u, space_p, solution, exact,
                                         quad_degree=quad_degree)
            if abs(norms.p_h_mean_integral) > 1e-9 * norms.area:
                raise NumericalError(
                    f"pressure mean {norms.p_h_mean_integral:.3g} exceeds "
                    f"1e-9 * area")
            record.levels.append(LevelResult(
                level=idx, n_major=n_major, h=mesh.h, n_dofs=system.size,
                e_u=norms.e_u, e_p=norms.e_p, e_u_tan=norms.e_u_tan,
                e_u_norm=norms.e_u_norm, energy=norms.energy,
                solver_iterations=stats.iterations,
                p_mean_integral=norms.p_h_mean_integral, area=norms.area))
            if keep_artifacts:
                record.artifacts.append(LevelArtifacts(
                    mesh=mesh, space_u=space_u, space_p=space_p,
                    solution=solution))
        except SurfDarcyError as exc:
            record.failed = True
            record.failure_message = f"level n_major={n_major}: {exc}"
            break
    return record


def _check_galerkin_residual(system, solution, solver_config):
    b_norm = np.linalg.norm(system.rhs)
    residual = np.linalg.norm(system.rhs - system.matrix @ solution)
    if b_norm > 0 and residual / b_norm > 10.0 * solver_config.rel_tol:
        raise NumericalError(
            f"post-solve residual {residual / b_norm:.3e} above tolerance")


def _cross_check_dense(system, solution):
    dense, _ = solve_matrix(system.matrix, system.rhs,
                            SolverConfig(method="lu"))
    gap = np.abs(dense - solution).max()
    if gap > 1e-7:
        raise NumericalError(
            f"gmres and dense solutions disagree: max gap {gap:.3e}")


def run_all_cases(**kwargs):
    """Run the full eight-case study; returns {case_id: record}."""
    return {case: run_case(case=case, **kwargs) for case in sorted(CASES)}

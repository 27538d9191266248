"""Sparse linear solvers for the assembled systems.

The work is delegated to SciPy: restarted GMRES with a Jacobi (diagonal)
preconditioner as the default, and a dense LU factorization as the
cross-check fallback.  Solves start from a zero initial guess and contain
no randomized components, so repeated runs produce identical iterates.
"""

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, ConvergenceError, SingularSystemError

GMRES = "gmres"
DENSE_LU = "lu"
_DENSE_LIMIT = 50_000


@dataclass
class SolverConfig:
    method: str = GMRES
    rel_tol: float = 1e-10
    max_iters: int = 10_000
    restart: int = 200

    def __post_init__(self):
        if self.method not in (GMRES, DENSE_LU):
            raise ConfigError(f"unknown solver method {self.method!r}")
        if not 0.0 < self.rel_tol <= 1e-4:
            raise ConfigError(f"rel_tol must be in (0, 1e-4], got {self.rel_tol}")
        if self.restart < 10:
            raise ConfigError(f"restart must be >= 10, got {self.restart}")
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass
class SolveStats:
    method: str
    iterations: int
    residual: float
    wall_time: float


def _jacobi_preconditioner(matrix):
    """Inverse-diagonal scaling; rows with zero diagonal (the multiplier
    row) are left unscaled."""
    diag = matrix.diagonal().copy()
    diag[diag == 0.0] = 1.0
    return spla.LinearOperator(matrix.shape, matvec=lambda v: v / diag,
                               dtype=float)


def solve_matrix(matrix, rhs, config=None):
    """Solve ``matrix @ x = rhs`` to the configured relative residual.

    Returns ``(x, stats)``.  Raises ConvergenceError when the iteration
    budget runs out and SingularSystemError from the dense path on exact
    singularity.
    """
    if config is None:
        config = SolverConfig()
    matrix = sp.csr_matrix(matrix)
    rhs = np.asarray(rhs, dtype=float)
    start = time.perf_counter()
    b_norm = np.linalg.norm(rhs)
    if b_norm == 0.0:
        return np.zeros_like(rhs), SolveStats(config.method, 0, 0.0,
                                              time.perf_counter() - start)

    if config.method == DENSE_LU:
        if matrix.shape[0] > _DENSE_LIMIT:
            raise ConfigError(
                f"dense fallback limited to N <= {_DENSE_LIMIT}, got {matrix.shape[0]}")
        try:
            lu, piv = scipy.linalg.lu_factor(matrix.toarray())
            x = scipy.linalg.lu_solve((lu, piv), rhs)
        except scipy.linalg.LinAlgError as exc:
            raise SingularSystemError(str(exc)) from exc
        if not np.all(np.isfinite(x)):
            raise SingularSystemError("dense factorization produced non-finite values")
        residual = np.linalg.norm(rhs - matrix @ x) / b_norm
        return x, SolveStats(DENSE_LU, 1, float(residual),
                             time.perf_counter() - start)

    precond = _jacobi_preconditioner(matrix)
    iterations = 0

    def count(_):
        nonlocal iterations
        iterations += 1

    x = np.zeros_like(rhs)
    rtol = config.rel_tol
    # the gmres stopping test sees the preconditioned residual, so verify
    # the true residual and tighten if needed
    for _ in range(4):
        budget = config.max_iters - iterations
        if budget <= 0:
            break
        x, _ = spla.gmres(matrix, rhs, x0=x, rtol=rtol, atol=0.0,
                          restart=config.restart,
                          maxiter=max(1, budget // config.restart + 1),
                          M=precond, callback=count,
                          callback_type='pr_norm')
        residual = np.linalg.norm(rhs - matrix @ x) / b_norm
        if residual <= config.rel_tol:
            return x, SolveStats(GMRES, iterations, float(residual),
                                 time.perf_counter() - start)
        rtol *= 1e-2
    residual = np.linalg.norm(rhs - matrix @ x) / b_norm
    raise ConvergenceError(
        f"gmres stalled at relative residual {residual:.3e} "
        f"after {iterations} iterations",
        residual=float(residual), iterations=iterations)


def solve(system, config=None):
    """Solve an assembled LinearSystem; see :func:`solve_matrix`."""
    return solve_matrix(system.matrix, system.rhs, config)

"""Assembly of the stabilized mixed Darcy system on the discrete surface.

The bilinear form is the stabilized one-half combination

    A((u,p),(v,q)) = 1/2 (u,v) + 1/2 (grad p, grad q)
                   + 1/2 (grad p, v) - 1/2 (u, grad q)
                   [+ c_N (n_h . u, n_h . v)]

with the right-hand side (f, q) + 1/2 (g, v + grad q), all integrals over
the discrete surface.  Velocity is discretized componentwise in R^3 (no
tangency imposed on the space); the pressure mean is pinned by a single
Lagrange-multiplier row/column.  Unknown layout: [u_x | u_y | u_z | p | mu].

Data fields f and g are given on the exact surface and are evaluated at
the closest-point projections of the quadrature points.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError
from .fespace import default_quadrature_degree, surface_gradients
from .mesh import discrete_normal_and_measure, map_cells
from .reference import quadrature_for, reference_triangle


@dataclass
class ProblemData:
    """Source terms on the exact surface: scalar f (mean zero) and
    tangential vector field g."""
    f: Callable
    g: Callable


@dataclass
class ErrorNorms:
    """L2-type errors against an exact solution, measured on the
    discrete surface (pressure compared after shifting both fields to
    zero mean)."""
    e_u: float
    e_p: float
    e_u_tan: float
    e_u_norm: float
    e_u_norm_h: float
    energy: float
    p_h_mean_integral: float
    area: float


@dataclass
class LinearSystem:
    """Sparse system for the coupled velocity/pressure/multiplier unknowns."""
    matrix: sp.csr_matrix
    rhs: np.ndarray
    space_u: object
    space_p: object
    c_N: float
    area: float

    @property
    def n_u(self):
        return self.space_u.n_dofs

    @property
    def n_p(self):
        return self.space_p.n_dofs

    @property
    def size(self):
        return 3 * self.n_u + self.n_p + 1

    def velocity_slice(self, component):
        return slice(component * self.n_u, (component + 1) * self.n_u)

    @property
    def pressure_slice(self):
        return slice(3 * self.n_u, 3 * self.n_u + self.n_p)

    @property
    def multiplier_index(self):
        return 3 * self.n_u + self.n_p


class _QuadratureWorkspace:
    """Per-mesh quadrature-point tabulations shared by assembly and norms."""

    def __init__(self, space_u, space_p, quad_degree):
        mesh = space_u.mesh
        if space_p.mesh is not mesh:
            raise ConfigError("velocity and pressure spaces use different meshes")
        if quad_degree is None:
            quad_degree = default_quadrature_degree(
                space_u.order, space_p.order, mesh.geometry_order)
        self.rule = quadrature_for(quad_degree)
        self.mesh = mesh
        self.x, jac = map_cells(mesh, self.rule.points)
        self.n_h, scale = discrete_normal_and_measure(jac)
        self.w = self.rule.weights[None, :] * scale        # (C, P)
        ref_u = reference_triangle(space_u.order)
        ref_p = reference_triangle(space_p.order)
        self.phi_u = ref_u.eval(self.rule.points)          # (P, nu)
        self.phi_p = ref_p.eval(self.rule.points)          # (P, np)
        self.grad_p = surface_gradients(jac, ref_p.eval_grad(self.rule.points))
        self.closest = mesh.surface.closest_point(self.x)


def assemble(space_u, space_p, data, c_N=0.0, quad_degree=None):
    """Assemble matrix and right-hand side of the stabilized system.

    Parameters
    ----------
    space_u, space_p : FESpace
        Velocity (per component) and pressure spaces on the same mesh.
    data : ProblemData
    c_N : float
        Optional penalty on the discrete normal velocity component.
    quad_degree : int, optional
        Override of the default over-integration degree.
    """
    if c_N < 0.0:
        raise ConfigError(f"normal penalty must be >= 0, got {c_N}")
    ws = _QuadratureWorkspace(space_u, space_p, quad_degree)
    n_u, n_p = space_u.n_dofs, space_p.n_dofs
    off_p = 3 * n_u
    mu = off_p + n_p
    size = mu + 1
    dof_u, dof_p = space_u.dof_map, space_p.dof_map

    mass = 0.5 * np.einsum('cp,pi,pj->cij', ws.w, ws.phi_u, ws.phi_u)
    stiff = 0.5 * np.einsum('cp,cpix,cpjx->cij', ws.w, ws.grad_p, ws.grad_p)
    coupling = 0.5 * np.einsum('cp,pi,cpja->cija', ws.w, ws.phi_u, ws.grad_p)
    constraint = np.einsum('cp,pi->ci', ws.w, ws.phi_p)
    area = float(ws.w.sum())

    rows, cols, vals = [], [], []

    def add_block(dofs_row, dofs_col, local):
        r = np.broadcast_to(dofs_row[:, :, None], local.shape)
        c = np.broadcast_to(dofs_col[:, None, :], local.shape)
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(local.ravel())

    for comp in range(3):
        add_block(comp * n_u + dof_u, comp * n_u + dof_u, mass)
        add_block(comp * n_u + dof_u, off_p + dof_p, coupling[..., comp])
        add_block(off_p + dof_p, comp * n_u + dof_u,
                  -np.swapaxes(coupling[..., comp], 1, 2))
    add_block(off_p + dof_p, off_p + dof_p, stiff)

    if c_N > 0.0:
        normal_block = c_N * np.einsum('cp,pi,pj,cpa,cpb->cijab',
                                       ws.w, ws.phi_u, ws.phi_u,
                                       ws.n_h, ws.n_h)
        for ca in range(3):
            for cb in range(3):
                add_block(ca * n_u + dof_u, cb * n_u + dof_u,
                          normal_block[..., ca, cb])

    rows.append(np.full(constraint.size, mu))
    cols.append((off_p + dof_p).ravel())
    vals.append(constraint.ravel())
    rows.append((off_p + dof_p).ravel())
    cols.append(np.full(constraint.size, mu))
    vals.append(constraint.ravel())

    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(size, size)).tocsr()
    matrix.sum_duplicates()
    matrix.sort_indices()

    f_vals = np.asarray(data.f(ws.closest), dtype=float)
    g_vals = np.asarray(data.g(ws.closest), dtype=float)
    rhs = np.zeros(size)
    rhs_u = 0.5 * np.einsum('cp,pi,cpa->cia', ws.w, ws.phi_u, g_vals)
    rhs_p = (np.einsum('cp,cp,pi->ci', ws.w, f_vals, ws.phi_p)
             + 0.5 * np.einsum('cp,cpa,cpia->ci', ws.w, g_vals, ws.grad_p))
    for comp in range(3):
        np.add.at(rhs, comp * n_u + dof_u.ravel(), rhs_u[..., comp].ravel())
    np.add.at(rhs, off_p + dof_p.ravel(), rhs_p.ravel())

    return LinearSystem(matrix=matrix, rhs=rhs, space_u=space_u,
                        space_p=space_p, c_N=c_N, area=area)


def _fd_composed_gradient(surface, field, x, step=1e-6):
    """Ambient central-difference gradient of field(closest_point(.))."""
    grad = np.empty(x.shape)
    for i in range(3):
        e = np.zeros(3)
        e[i] = step
        hi = field(surface.closest_point(x + e))
        lo = field(surface.closest_point(x - e))
        grad[..., i] = (hi - lo) / (2.0 * step)
    return grad


def assemble_error_norms(space_u, space_p, solution, exact, quad_degree=None):
    """Error norms of a solved coefficient vector against an exact solution.

    All integrals are over the discrete surface; the exact fields are
    pulled back through the closest-point map.  The tangential/normal
    splits use the exact normal at the projected points, except for the
    additional n_h-based normal diagnostic.
    """
    ws = _QuadratureWorkspace(space_u, space_p, quad_degree)
    n_u = space_u.n_dofs
    surface = ws.mesh.surface

    coeff_u = np.stack([solution[comp * n_u + space_u.dof_map]
                        for comp in range(3)], axis=-1)      # (C, nu, 3)
    coeff_p = solution[3 * n_u + space_p.dof_map]            # (C, np)
    u_h = np.einsum('pi,cia->cpa', ws.phi_u, coeff_u)
    p_h = np.einsum('pi,ci->cp', ws.phi_p, coeff_p)
    grad_p_h = np.einsum('cpix,ci->cpx', ws.grad_p, coeff_p)

    y = ws.closest
    u_e = np.asarray(exact.u(y), dtype=float)
    p_e = np.asarray(exact.p(y), dtype=float)
    grad_p_e = _fd_composed_gradient(surface, exact.p, ws.x)
    grad_p_e -= ws.n_h * np.einsum('cpx,cpx->cp', ws.n_h, grad_p_e)[..., None]

    area = ws.w.sum()
    p_h_integral = float((ws.w * p_h).sum())
    p_shift = p_h_integral / area - (ws.w * p_e).sum() / area

    diff = u_e - u_h
    n_ex = surface.normal(y)
    diff_normal = np.einsum('cpx,cpx->cp', n_ex, diff)
    diff_tan = diff - n_ex * diff_normal[..., None]

    def norm2(values):
        if values.ndim == 3:
            return (ws.w * np.einsum('cpx,cpx->cp', values, values)).sum()
        return (ws.w * values * values).sum()

    e_u = np.sqrt(norm2(diff))
    e_p = np.sqrt(norm2(p_e - p_h + p_shift))
    e_u_tan = np.sqrt(norm2(diff_tan))
    e_u_norm = np.sqrt(norm2(np.einsum('cpx,cpx->cp', n_ex, u_h)))
    e_u_norm_h = np.sqrt(norm2(np.einsum('cpx,cpx->cp', ws.n_h, u_h)))
    energy = np.sqrt(norm2(diff) + norm2(grad_p_e - grad_p_h))

    return ErrorNorms(e_u=float(e_u), e_p=float(e_p), e_u_tan=float(e_u_tan),
                      e_u_norm=float(e_u_norm), e_u_norm_h=float(e_u_norm_h),
                      energy=float(energy),
                      p_h_mean_integral=p_h_integral, area=float(area))


def interpolate_solution(space_u, space_p, exact):
    """Nodal interpolant of an exact solution as a full coefficient vector
    (multiplier entry zero).  DOF nodes live on the discrete surface and
    are pulled back through the closest-point map before evaluation."""
    surface = space_u.mesh.surface
    n_u = space_u.n_dofs
    vec = np.zeros(3 * n_u + space_p.n_dofs + 1)
    u_nodes = np.asarray(exact.u(surface.closest_point(space_u.node_coords)))
    for comp in range(3):
        vec[comp * n_u:(comp + 1) * n_u] = u_nodes[:, comp]
    vec[3 * n_u:3 * n_u + space_p.n_dofs] = exact.p(
        surface.closest_point(space_p.node_coords))
    return vec


def validate_problem_data(data, mesh, quad_degree=6, mean_tol=1e-8,
                          tangency_tol=1e-10):
    """Check the source-term contracts: mean-zero f and tangential g,
    sampled at quadrature points of the given mesh."""
    rule = quadrature_for(quad_degree)
    x, jac = map_cells(mesh, rule.points)
    _, scale = discrete_normal_and_measure(jac)
    w = rule.weights[None, :] * scale
    y = mesh.surface.closest_point(x)
    f_vals = np.asarray(data.f(y), dtype=float)
    mean = abs((w * f_vals).sum())
    area = w.sum()
    if mean > mean_tol * area:
        raise ConfigError(f"source f is not mean-zero: integral {mean:.3g}")
    normal_part = np.einsum('cpx,cpx->cp', mesh.surface.normal(y),
                            np.asarray(data.g(y), dtype=float))
    worst = np.abs(normal_part).max()
    if worst > tangency_tol:
        raise ConfigError(f"forcing g is not tangential: |n.g| up to {worst:.3g}")


def dump_matrix_market(system, matrix_target=None, rhs_target=None):
    """Write matrix and/or RHS in Matrix Market format.

    Targets may be paths or binary file objects (file objects avoid
    scipy's automatic .mtx suffixing, needed for atomic writes).
    """
    from scipy.io import mmwrite
    if matrix_target is not None:
        mmwrite(matrix_target, system.matrix.tocoo())
    if rhs_target is not None:
        mmwrite(rhs_target, system.rhs[:, None])

"""Continuous parametric Lagrange spaces on a ParametricMesh.

DOF numbering is deterministic: all vertex DOFs first (vertex index
order), then edge DOFs (edges in lexicographic vertex-pair order, nodes
ordered from the lower- to the higher-numbered vertex), then cell
interior DOFs (cell order).  This makes solver behavior and CSV outputs
reproducible byte for byte.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateElementError
from .mesh import element_map
from .reference import (QuadratureRule, lagrange_node_count, quadrature_for,
                        reference_triangle)

__all__ = ["FESpace", "build_space", "eval_basis", "surface_gradients",
           "quadrature_for", "QuadratureRule", "default_quadrature_degree"]

_LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))


@dataclass
class FESpace:
    """Lagrange space of order k with global DOF numbering.

    dof_map[c, i] is the global index of local node i of cell c, in the
    reference-node ordering of :mod:`surfdarcy.reference`.  node_coords
    holds the physical position (on the discrete surface) of every DOF.
    """
    mesh: object
    order: int
    dof_map: np.ndarray
    n_dofs: int
    node_coords: np.ndarray

    @property
    def n_local(self):
        return self.dof_map.shape[1]


def build_space(mesh, k):
    """Build the order-k continuous Lagrange space over ``mesh``."""
    if k not in (1, 2, 3):
        raise ConfigError(f"polynomial order must be 1, 2 or 3, got {k}")
    n_v, n_e, n_c = mesh.n_vertices, mesh.n_edges, mesh.n_cells
    per_edge = k - 1
    per_cell = (k - 1) * (k - 2) // 2
    n_dofs = n_v + n_e * per_edge + n_c * per_cell

    n_local = lagrange_node_count(k)
    dof_map = np.empty((n_c, n_local), dtype=np.int64)
    dof_map[:, :3] = mesh.cells
    local = 3
    for le, (a, b) in enumerate(_LOCAL_EDGES):
        ga, gb = mesh.cells[:, a], mesh.cells[:, b]
        base = n_v + mesh.cell_edges[:, le] * per_edge
        for step in range(1, k):
            # canonical edge direction runs low vertex -> high vertex
            pos = np.where(ga < gb, step - 1, per_edge - step)
            dof_map[:, local] = base + pos
            local += 1
    if per_cell:
        interior = (n_v + n_e * per_edge
                    + per_cell * np.arange(n_c)[:, None]
                    + np.arange(per_cell)[None, :])
        dof_map[:, local:] = interior

    ref = reference_triangle(k)
    node_coords = np.empty((n_dofs, 3))
    seen = np.zeros(n_dofs, dtype=bool)
    for c in range(n_c):
        fresh = ~seen[dof_map[c]]
        if not fresh.any():
            continue
        x, _ = element_map(mesh, c, ref.nodes[fresh])
        node_coords[dof_map[c][fresh]] = x
        seen[dof_map[c]] = True
    return FESpace(mesh=mesh, order=k, dof_map=dof_map, n_dofs=n_dofs,
                   node_coords=node_coords)


def surface_gradients(jac, ref_grads):
    """Map reference gradients to tangential gradients on the element.

    Implements J (J^T J)^{-1} grad_ref via the explicit 2x2 inverse of the
    first fundamental form.

    Parameters
    ----------
    jac : (..., 3, 2) geometry Jacobians.
    ref_grads : (n, 2) or (..., n, 2) reference-basis gradients,
        broadcast against the leading dimensions of ``jac``.

    Returns
    -------
    (..., n, 3) gradients, tangential to the discrete element.
    """
    jac = np.asarray(jac, dtype=float)
    g00 = np.einsum('...x,...x->...', jac[..., 0], jac[..., 0])
    g01 = np.einsum('...x,...x->...', jac[..., 0], jac[..., 1])
    g11 = np.einsum('...x,...x->...', jac[..., 1], jac[..., 1])
    det = g00 * g11 - g01 * g01
    if np.any(det < 1e-24):
        raise DegenerateElementError("first fundamental form is singular")
    inv = np.empty(jac.shape[:-2] + (2, 2))
    inv[..., 0, 0] = g11 / det
    inv[..., 1, 1] = g00 / det
    inv[..., 0, 1] = -g01 / det
    inv[..., 1, 0] = -g01 / det
    ref_grads = np.broadcast_to(ref_grads,
                                jac.shape[:-2] + ref_grads.shape[-2:])
    return np.einsum('...xd,...de,...ne->...nx', jac, inv, ref_grads)


def eval_basis(space, cell_id, ref_points):
    """Basis values and tangential gradients on one physical cell.

    Returns ``values`` of shape (P, n_local) and ``grads`` of shape
    (P, n_local, 3); the gradients satisfy n_h . grad = 0.
    """
    ref = reference_triangle(space.order)
    ref_points = np.atleast_2d(np.asarray(ref_points, dtype=float))
    values = ref.eval(ref_points)
    _, jac = element_map(space.mesh, cell_id, ref_points)
    grads = surface_gradients(jac, ref.eval_grad(ref_points))
    return values, grads


def default_quadrature_degree(k_u, k_p, k_g):
    """Over-integration default: curved-element integrands are not
    polynomial, so add the geometry order on top of the product degree."""
    return 2 * max(k_u, k_p) + k_g + 1

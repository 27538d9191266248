"""FE space tests: DOF identification, continuity, basis evaluation."""

import numpy as np
import numpy.testing as npt
import pytest

from surfdarcy.errors import ConfigError, DegenerateElementError
from surfdarcy.fespace import (build_space, default_quadrature_degree,
                               eval_basis, surface_gradients)
from surfdarcy.geometry import Torus
from surfdarcy.mesh import (build_structured_torus, element_map,
                            discrete_normal_and_measure,
                            jiggle_to_unstructured)
from surfdarcy.reference import reference_triangle

TORUS = Torus(1.0, 0.5)


def test_dof_counts_n8():
    mesh = build_structured_torus(TORUS, 8, 1)
    assert build_space(mesh, 1).n_dofs == 32
    assert build_space(mesh, 2).n_dofs == 32 + 96        # V + E
    assert build_space(mesh, 3).n_dofs == 32 + 2 * 96 + 64  # V + 2E + C


def test_dof_count_formula_quadratic_geometry():
    mesh = build_structured_torus(TORUS, 16, 2)
    for k in (1, 2, 3):
        space = build_space(mesh, k)
        expected = (mesh.n_vertices + mesh.n_edges * (k - 1)
                    + mesh.n_cells * (k - 1) * (k - 2) // 2)
        assert space.n_dofs == expected


def test_order_validation():
    mesh = build_structured_torus(TORUS, 8, 1)
    with pytest.raises(ConfigError):
        build_space(mesh, 4)


def test_partition_of_unity_at_random_points():
    mesh = build_structured_torus(TORUS, 8, 2)
    space = build_space(mesh, 2)
    rng = np.random.default_rng(0)
    pts = rng.dirichlet([1, 1, 1], size=50)[:, 1:]
    values, grads = eval_basis(space, 11, pts)
    npt.assert_allclose(values.sum(axis=-1), 1.0, atol=1e-13)
    npt.assert_allclose(grads.sum(axis=-2), 0.0, atol=1e-11)


@pytest.mark.parametrize("k,k_g", [(1, 1), (2, 1), (2, 2), (3, 2)])
def test_c0_continuity_across_edges(k, k_g):
    """Traces from both sides of every interior edge agree at k+1 points."""
    mesh = jiggle_to_unstructured(build_structured_torus(TORUS, 8, k_g),
                                  0.2, seed=7)
    space = build_space(mesh, k)
    rng = np.random.default_rng(1)
    coeffs = rng.standard_normal(space.n_dofs)

    local_edge_refs = {  # local edge -> segment endpoints in reference coords
        0: (np.array([0.0, 0.0]), np.array([1.0, 0.0])),
        1: (np.array([1.0, 0.0]), np.array([0.0, 1.0])),
        2: (np.array([0.0, 1.0]), np.array([0.0, 0.0])),
    }
    ts = np.linspace(0.0, 1.0, k + 1)

    edge_owner = {}
    checked = 0
    for c in range(mesh.n_cells):
        for le in range(3):
            edge = mesh.cell_edges[c, le]
            if edge not in edge_owner:
                edge_owner[edge] = (c, le)
                continue
            c0, le0 = edge_owner[edge]
            checked += 1
            for t in ts:
                vals = []
                for cell, loc in ((c0, le0), (c, le)):
                    a, b = local_edge_refs[loc]
                    va, vb = mesh.cells[cell][[loc, (loc + 1) % 3]]
                    # parametrize the edge from the lower global vertex
                    s = t if va < vb else 1.0 - t
                    ref = (1.0 - s) * a + s * b
                    basis, _ = eval_basis(space, cell, ref[None, :])
                    vals.append(basis[0] @ coeffs[space.dof_map[cell]])
                assert abs(vals[0] - vals[1]) <= 1e-11
    assert checked == mesh.n_edges


def test_node_coords_on_discrete_surface():
    mesh = build_structured_torus(TORUS, 8, 2)
    space = build_space(mesh, 2)
    # quadratic space on quadratic geometry: nodes are the geometry nodes
    assert np.abs(TORUS.signed_distance(space.node_coords)).max() <= 1e-12


def test_gradients_tangent_to_element():
    mesh = build_structured_torus(TORUS, 8, 2)
    space = build_space(mesh, 2)
    pts = np.array([[0.2, 0.3], [0.5, 0.25]])
    _, grads = eval_basis(space, 4, pts)
    _, jac = element_map(mesh, 4, pts)
    n_h, _ = discrete_normal_and_measure(jac)
    assert np.abs(np.einsum('px,pnx->pn', n_h, grads)).max() <= 1e-12


def test_flat_reference_aligned_element():
    jac = np.array([[[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]])
    ref_grads = reference_triangle(1).eval_grad(np.array([[0.25, 0.25]]))
    grads = surface_gradients(jac, ref_grads[0])
    # P1 basis 'xi' has gradient (1, 0, 0) on the reference-aligned patch
    npt.assert_allclose(grads[0, 1], [1.0, 0.0, 0.0], atol=1e-15)


def test_directional_derivative_chain_rule():
    mesh = build_structured_torus(TORUS, 8, 2)
    space = build_space(mesh, 2)
    ref = reference_triangle(2)
    rng = np.random.default_rng(3)
    pts = rng.dirichlet([1, 1, 1], size=10)[:, 1:]
    _, grads = eval_basis(space, 9, pts)
    _, jac = element_map(mesh, 9, pts)
    ref_grads = ref.eval_grad(pts)
    for _ in range(5):
        v_hat = rng.standard_normal(2)
        t = np.einsum('pxd,d->px', jac, v_hat)
        lhs = np.einsum('pnx,px->pn', grads, t)
        rhs = np.einsum('pnd,d->pn', ref_grads, v_hat)
        npt.assert_allclose(lhs, rhs, atol=1e-10)


def test_surface_gradients_degenerate_jacobian():
    jac = np.array([[[1.0, 1.0], [1.0, 1.0], [0.0, 0.0]]])
    with pytest.raises(DegenerateElementError):
        surface_gradients(jac, reference_triangle(1).eval_grad(
            np.array([[0.3, 0.3]]))[0])


def test_default_quadrature_degree_formula():
    assert default_quadrature_degree(1, 1, 1) == 4
    assert default_quadrature_degree(1, 2, 2) == 7
    assert default_quadrature_degree(3, 3, 2) == 9

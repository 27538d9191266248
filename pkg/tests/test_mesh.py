"""Mesh construction, jiggling, element maps, and quality diagnostics."""

import math
import os

import numpy as np
import numpy.testing as npt
import pytest

from surfdarcy.errors import ConfigError, DegenerateElementError
from surfdarcy.geometry import Torus
from surfdarcy.mesh import (build_structured_torus, discrete_normal_and_measure,
                            element_map, jiggle_to_unstructured, map_cells,
                            mesh_quality_report, visualization_grid,
                            write_vtk_legacy)

TORUS = Torus(1.0, 0.5)


def test_structured_counts_and_euler():
    mesh = build_structured_torus(TORUS, 8, 1)
    assert mesh.n_vertices == 32
    assert mesh.n_cells == 64
    assert mesh.n_edges == 96
    assert mesh.euler_characteristic() == 0
    assert np.all(mesh.edge_cell_counts() == 2)


def test_vertices_exactly_on_surface():
    mesh = build_structured_torus(TORUS, 8, 1)
    assert np.abs(TORUS.signed_distance(mesh.vertices)).max() <= 1e-15


def test_quadratic_geometry_nodes_on_surface():
    mesh = build_structured_torus(TORUS, 8, 2)
    assert mesh.geometry_nodes.shape == (128, 6, 3)
    assert np.abs(TORUS.signed_distance(mesh.geometry_nodes)).max() <= 1e-12


def test_h_halves_under_refinement():
    coarse = build_structured_torus(TORUS, 8, 1)
    fine = build_structured_torus(TORUS, 16, 1)
    assert abs(fine.h / coarse.h - 0.5) <= 0.05 * 0.5


def test_orientation_outward():
    for k_g in (1, 2):
        mesh = build_structured_torus(TORUS, 16, k_g)
        x, jac = map_cells(mesh, np.array([[1 / 3, 1 / 3]]))
        n_h, _ = discrete_normal_and_measure(jac)
        n_exact = TORUS.normal(TORUS.closest_point(x))
        assert np.einsum('cpx,cpx->cp', n_h, n_exact).min() > 0.0


def test_quasi_uniformity():
    mesh = build_structured_torus(TORUS, 16, 1)
    diam = mesh.cell_diameters()
    assert diam.max() / diam.min() <= 4.0
    jiggled = jiggle_to_unstructured(mesh, 0.25, seed=42)
    diam = jiggled.cell_diameters()
    assert diam.max() / diam.min() <= 8.0


def test_build_preconditions():
    with pytest.raises(ConfigError):
        build_structured_torus(TORUS, 7, 1)
    with pytest.raises(ConfigError):
        build_structured_torus(TORUS, 6, 1)
    with pytest.raises(ConfigError):
        build_structured_torus(TORUS, 8, 3)
    with pytest.raises(ConfigError):
        build_structured_torus(TORUS, 8, 1, split="diagonal")


class TestElementMap:
    def test_vertices_reproduced(self):
        mesh = build_structured_torus(TORUS, 8, 2)
        x, _ = element_map(mesh, 5, np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
        npt.assert_allclose(x, mesh.vertices[mesh.cells[5]], atol=1e-14)

    def test_affine_centroid_is_vertex_mean(self):
        mesh = build_structured_torus(TORUS, 8, 1)
        x, _ = element_map(mesh, 3, np.array([[1 / 3, 1 / 3]]))
        npt.assert_allclose(x[0], mesh.vertices[mesh.cells[3]].mean(axis=0),
                            atol=1e-14)

    def test_affine_jacobian_constant(self):
        mesh = build_structured_torus(TORUS, 8, 1)
        _, jac = element_map(mesh, 3, np.array([[0.1, 0.2], [0.6, 0.3]]))
        npt.assert_allclose(jac[0], jac[1], atol=1e-14)

    @pytest.mark.parametrize("k_g", [1, 2])
    def test_jacobian_matches_finite_differences(self, k_g):
        mesh = build_structured_torus(TORUS, 8, k_g)
        rng = np.random.default_rng(2)
        pts = rng.dirichlet([1, 1, 1], size=5)[:, 1:]
        _, jac = element_map(mesh, 7, pts)
        step = 1e-6
        for d, e in enumerate(np.eye(2)):
            hi, _ = element_map(mesh, 7, pts + step * e)
            lo, _ = element_map(mesh, 7, pts - step * e)
            npt.assert_allclose(jac[..., d], (hi - lo) / (2 * step), atol=1e-7)


class TestDiscreteNormal:
    def test_flat_patch(self):
        jac = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        n_h, scale = discrete_normal_and_measure(jac)
        npt.assert_allclose(n_h, [0.0, 0.0, 1.0])
        npt.assert_allclose(scale, 1.0)

    def test_scaling_homogeneity(self):
        jac = np.array([[1.0, 0.2], [0.1, 1.3], [0.4, 0.5]])
        n1, s1 = discrete_normal_and_measure(jac)
        n2, s2 = discrete_normal_and_measure(2.0 * jac)
        npt.assert_allclose(n2, n1, atol=1e-15)
        npt.assert_allclose(s2, 4.0 * s1, atol=1e-14)

    def test_measure_is_sqrt_gram_determinant(self):
        jac = np.array([[1.0, 0.2], [0.1, 1.3], [0.4, 0.5]])
        _, scale = discrete_normal_and_measure(jac)
        gram = jac.T @ jac
        npt.assert_allclose(scale, math.sqrt(np.linalg.det(gram)), atol=1e-14)

    def test_degenerate_raises(self):
        jac = np.array([[1.0, 2.0], [0.5, 1.0], [0.25, 0.5]])
        with pytest.raises(DegenerateElementError):
            discrete_normal_and_measure(jac)


def _three_level_eoc(values, hs):
    return [math.log(values[i] / values[i + 1]) / math.log(hs[i] / hs[i + 1])
            for i in range(len(values) - 1)]


@pytest.mark.parametrize("k_g,rho_floor,normal_floor", [(1, 1.8, 0.8),
                                                        (2, 2.8, 1.8)])
def test_geometry_approximation_rates(k_g, rho_floor, normal_floor):
    # distance decays like h^{k_g+1}, normals like h^{k_g}
    reports, hs = [], []
    for n in (16, 32, 64):
        mesh = build_structured_torus(TORUS, n, k_g)
        reports.append(mesh_quality_report(mesh))
        hs.append(mesh.h)
    rho_rates = _three_level_eoc([r.max_rho for r in reports], hs)
    nrm_rates = _three_level_eoc([r.max_normal_deviation for r in reports], hs)
    assert min(rho_rates) >= rho_floor
    assert min(nrm_rates) >= normal_floor


class TestJiggle:
    def test_zero_amplitude_identity(self):
        mesh = build_structured_torus(TORUS, 8, 2)
        same = jiggle_to_unstructured(mesh, 0.0, seed=9)
        npt.assert_array_equal(same.vertices, mesh.vertices)
        npt.assert_array_equal(same.geometry_nodes, mesh.geometry_nodes)
        npt.assert_array_equal(same.cells, mesh.cells)

    def test_deterministic_for_fixed_seed(self):
        mesh = build_structured_torus(TORUS, 8, 2)
        a = jiggle_to_unstructured(mesh, 0.25, seed=42)
        b = jiggle_to_unstructured(mesh, 0.25, seed=42)
        npt.assert_array_equal(a.vertices, b.vertices)
        npt.assert_array_equal(a.geometry_nodes, b.geometry_nodes)

    def test_seed_changes_mesh(self):
        mesh = build_structured_torus(TORUS, 8, 1)
        a = jiggle_to_unstructured(mesh, 0.25, seed=1)
        b = jiggle_to_unstructured(mesh, 0.25, seed=2)
        assert np.abs(a.vertices - b.vertices).max() > 1e-6

    def test_invariants_preserved(self):
        mesh = build_structured_torus(TORUS, 16, 2)
        jiggled = jiggle_to_unstructured(mesh, 0.25, seed=42)
        assert np.abs(TORUS.signed_distance(jiggled.vertices)).max() <= 1e-12
        assert np.abs(TORUS.signed_distance(jiggled.geometry_nodes)).max() <= 1e-12
        assert jiggled.euler_characteristic() == 0
        assert np.all(jiggled.edge_cell_counts() == 2)
        npt.assert_array_equal(jiggled.cells, mesh.cells)
        assert not jiggled.structured

    def test_preconditions(self):
        mesh = build_structured_torus(TORUS, 8, 1)
        with pytest.raises(ConfigError):
            jiggle_to_unstructured(mesh, 0.5, seed=0)
        jiggled = jiggle_to_unstructured(mesh, 0.1, seed=0)
        with pytest.raises(ConfigError):
            jiggle_to_unstructured(jiggled, 0.1, seed=0)


def test_quality_report_matches_structured_for_zero_jiggle():
    mesh = build_structured_torus(TORUS, 16, 1)
    jiggled = jiggle_to_unstructured(mesh, 0.0, seed=5)
    a, b = mesh_quality_report(mesh), mesh_quality_report(jiggled)
    assert a == b


class TestVtkExport:
    def test_linear_grid_roundtrip(self, tmp_path):
        mesh = build_structured_torus(TORUS, 8, 1)
        points, tris, cells, refs, parents = visualization_grid(mesh)
        assert len(points) == mesh.n_vertices
        assert len(tris) == mesh.n_cells
        path = os.path.join(tmp_path, "mesh.vtk")
        write_vtk_legacy(path, points, tris,
                         point_data={"z": points[:, 2]},
                         cell_data={"ones": np.ones(len(tris))})
        text = open(path).read()
        assert text.startswith("# vtk DataFile Version 3.0")
        assert f"POINTS {len(points)} double" in text
        assert f"CELLS {len(tris)} {4 * len(tris)}" in text
        assert "SCALARS z double 1" in text

    def test_quadratic_grid_subdivides(self, tmp_path):
        mesh = build_structured_torus(TORUS, 8, 2)
        points, tris, cells, refs, parents = visualization_grid(mesh)
        assert len(points) == mesh.n_vertices + mesh.n_edges
        assert len(tris) == 4 * mesh.n_cells
        # sampling locations reproduce the export points through the maps
        for idx in (0, 40, len(points) - 1):
            x, _ = element_map(mesh, cells[idx], refs[idx][None, :])
            npt.assert_allclose(x[0], points[idx], atol=1e-12)

    def test_deterministic_bytes(self, tmp_path):
        mesh = build_structured_torus(TORUS, 8, 1)
        points, tris, _, _, _ = visualization_grid(mesh)
        p1, p2 = os.path.join(tmp_path, "a.vtk"), os.path.join(tmp_path, "b.vtk")
        write_vtk_legacy(p1, points, tris)
        write_vtk_legacy(p2, points, tris)
        assert open(p1, "rb").read() == open(p2, "rb").read()

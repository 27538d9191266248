"""Reference-triangle basis and quadrature tests."""

import numpy as np
import numpy.testing as npt
import pytest

from surfdarcy.errors import ConfigError
from surfdarcy.reference import (MAX_DEGREE, lagrange_node_count,
                                 monomial_integral, quadrature_for,
                                 reference_triangle)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_node_counts_and_lagrange_property(k):
    ref = reference_triangle(k)
    assert ref.n_nodes == lagrange_node_count(k) == (k + 1) * (k + 2) // 2
    values = ref.eval(ref.nodes)
    npt.assert_allclose(values, np.eye(ref.n_nodes), atol=1e-13)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_vertices_lead_node_ordering(k):
    ref = reference_triangle(k)
    npt.assert_allclose(ref.nodes[:3], [[0, 0], [1, 0], [0, 1]], atol=0)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_partition_of_unity_and_gradient_sum(k):
    ref = reference_triangle(k)
    rng = np.random.default_rng(11)
    pts = rng.dirichlet([1, 1, 1], size=50)[:, 1:]
    npt.assert_allclose(ref.eval(pts).sum(axis=-1), 1.0, atol=1e-13)
    npt.assert_allclose(ref.eval_grad(pts).sum(axis=-2), 0.0, atol=1e-12)


def test_reference_gradients_match_fd():
    ref = reference_triangle(3)
    pts = np.array([[0.21, 0.34], [0.5, 0.1]])
    grads = ref.eval_grad(pts)
    step = 1e-7
    for d, e in enumerate(np.eye(2)):
        fd = (ref.eval(pts + step * e) - ref.eval(pts - step * e)) / (2 * step)
        npt.assert_allclose(grads[..., d], fd, atol=1e-6)


def test_degree_one_is_centroid_rule():
    rule = quadrature_for(1)
    assert len(rule.weights) == 1
    npt.assert_allclose(rule.weights, [0.5])
    npt.assert_allclose(rule.points, [[1.0 / 3.0, 1.0 / 3.0]])


def test_degree_four_rule_on_xi2eta2():
    rule = quadrature_for(4)
    assert len(rule.weights) == 6
    value = np.sum(rule.weights * rule.points[:, 0] ** 2 * rule.points[:, 1] ** 2)
    npt.assert_allclose(value, 1.0 / 180.0, atol=1e-15)


@pytest.mark.parametrize("degree", range(1, MAX_DEGREE + 1))
def test_exactness_positivity_weight_sum(degree):
    rule = quadrature_for(degree)
    assert np.all(rule.weights > 0.0)
    npt.assert_allclose(rule.weights.sum(), 0.5, atol=1e-14)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            quad = np.sum(rule.weights
                          * rule.points[:, 0] ** a * rule.points[:, 1] ** b)
            npt.assert_allclose(quad, monomial_integral(a, b), atol=1e-14,
                                err_msg=f"degree {degree}, monomial ({a},{b})")


def test_points_inside_reference_triangle():
    for degree in range(1, MAX_DEGREE + 1):
        pts = quadrature_for(degree).points
        assert pts.min() >= 0.0
        assert (pts.sum(axis=1) <= 1.0 + 1e-14).all()


def test_degree_out_of_range():
    with pytest.raises(ConfigError):
        quadrature_for(15)
    with pytest.raises(ConfigError):
        quadrature_for(0)

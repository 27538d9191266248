"""Reference-triangle machinery: Lagrange bases and quadrature rules.

The reference triangle is K = {(xi, eta) : xi, eta >= 0, xi + eta <= 1}
with vertices (0,0), (1,0), (0,1) and area 1/2.

Local node ordering convention (used for both geometry maps and FE spaces):
the 3 vertices, then the local edges (0,1), (1,2), (2,0) each carrying
k-1 equispaced interior nodes ordered from the first to the second vertex,
then the interior lattice nodes.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import ConfigError

VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))


def lagrange_node_count(k):
    return (k + 1) * (k + 2) // 2


def _lattice_nodes(k):
    """Nodes in the package ordering: vertices, edge nodes, interior nodes."""
    nodes = [VERTICES[0], VERTICES[1], VERTICES[2]]
    for a, b in LOCAL_EDGES:
        for step in range(1, k):
            t = step / k
            nodes.append((1.0 - t) * VERTICES[a] + t * VERTICES[b])
    for j in range(1, k):
        for i in range(1, k - j):
            nodes.append(np.array([i / k, j / k]))
    return np.array(nodes)


class ReferenceTriangle:
    """Lagrange basis of order k on the reference triangle.

    Basis coefficients come from inverting the monomial Vandermonde matrix
    on the lattice nodes; for k <= 3 this is well conditioned and the
    Lagrange property holds to ~1e-14.
    """

    def __init__(self, k):
        if k < 1:
            raise ConfigError(f"polynomial order must be >= 1, got {k}")
        self.order = k
        self.nodes = _lattice_nodes(k)
        self.n_nodes = len(self.nodes)
        self._exponents = [(a, b) for total in range(k + 1)
                           for a in range(total, -1, -1)
                           for b in [total - a]]
        vander = self._monomials(self.nodes)
        self._coeffs = np.linalg.inv(vander)  # column i = basis_i coefficients

    def _monomials(self, points):
        points = np.asarray(points, dtype=float)
        xi, eta = points[..., 0], points[..., 1]
        cols = [xi ** a * eta ** b for a, b in self._exponents]
        return np.stack(cols, axis=-1)

    def _monomial_grads(self, points):
        points = np.asarray(points, dtype=float)
        xi, eta = points[..., 0], points[..., 1]
        dxi, deta = [], []
        for a, b in self._exponents:
            dxi.append(a * xi ** max(a - 1, 0) * eta ** b if a else np.zeros_like(xi))
            deta.append(b * xi ** a * eta ** max(b - 1, 0) if b else np.zeros_like(xi))
        return np.stack(dxi, axis=-1), np.stack(deta, axis=-1)

    def eval(self, points):
        """Basis values; shape ``points.shape[:-1] + (n_nodes,)``."""
        return self._monomials(points) @ self._coeffs

    def eval_grad(self, points):
        """Reference gradients; shape ``points.shape[:-1] + (n_nodes, 2)``."""
        dxi, deta = self._monomial_grads(points)
        return np.stack([dxi @ self._coeffs, deta @ self._coeffs], axis=-1)


@lru_cache(maxsize=None)
def reference_triangle(k):
    return ReferenceTriangle(k)


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature on the reference triangle: all weights positive, sum 1/2."""
    degree: int
    points: np.ndarray   # (n, 2)
    weights: np.ndarray  # (n,)


def _orbit_s3():
    return np.array([[1.0, 1.0, 1.0]]) / 3.0


def _orbit_s21(a):
    b = 1.0 - 2.0 * a
    return np.array([[b, a, a], [a, b, a], [a, a, b]])


def _orbit_s111(a, b):
    c = 1.0 - a - b
    return np.array([[c, a, b], [c, b, a], [a, c, b],
                     [b, c, a], [a, b, c], [b, a, c]])


_SQRT15 = np.sqrt(15.0)

# Fully symmetric rules with strictly positive weights, in barycentric
# orbits; weights are normalized to sum to 1 and scaled by the triangle
# area on construction.  Degrees with no positive symmetric compact rule
# (3, 7) are served by the next table entry; see _TABLE_FOR_DEGREE.
_RULES = {
    1: [(_orbit_s3(), 1.0)],
    2: [(_orbit_s21(1.0 / 6.0), 1.0 / 3.0)],
    4: [(_orbit_s21(0.445948490915965), 0.223381589678011),
        (_orbit_s21(0.091576213509771), 0.109951743655322)],
    5: [(_orbit_s3(), 9.0 / 40.0),
        (_orbit_s21((6.0 + _SQRT15) / 21.0), (155.0 + _SQRT15) / 1200.0),
        (_orbit_s21((6.0 - _SQRT15) / 21.0), (155.0 - _SQRT15) / 1200.0)],
    6: [(_orbit_s21(0.249286745170910), 0.116786275726379),
        (_orbit_s21(0.063089014491502), 0.050844906370207),
        (_orbit_s111(0.310352451033785, 0.636502499121399), 0.082851075618374)],
    8: [(_orbit_s3(), 0.1443156076777204),
        (_orbit_s21(0.4592925882926750), 0.0950916342673297),
        (_orbit_s21(0.1705693077517035), 0.1032173705347290),
        (_orbit_s21(0.0505472283170321), 0.0324584976232042),
        (_orbit_s111(0.2631128296348056, 0.0083947774098845), 0.0272303141744151)],
    9: [(_orbit_s3(), 0.097135796282799),
        (_orbit_s21(0.489682519198738), 0.031334700227139),
        (_orbit_s21(0.437089591492937), 0.077827541004774),
        (_orbit_s21(0.188203535619033), 0.079647738927210),
        (_orbit_s21(0.044729513394453), 0.025577675658698),
        (_orbit_s111(0.036838412054736, 0.221962989160766), 0.043283539377289)],
}

# requested degree -> table entry (rounded up past the gaps at 3 and 7)
_TABLE_FOR_DEGREE = {1: 1, 2: 2, 3: 4, 4: 4, 5: 5, 6: 6, 7: 8, 8: 8, 9: 9}

MAX_DEGREE = 14


def _conical_symmetrized(degree):
    """Positive symmetric rule from a symmetrized conical Gauss product.

    The Legendre x Jacobi(1,0) product rule on the collapsed square is
    exact to the requested degree with positive weights; averaging it over
    the six triangle symmetries restores full symmetry.
    """
    n = (degree + 2) // 2
    xu, wu = roots_legendre(n)
    xv, wv = roots_jacobi(n, 1.0, 0.0)
    u, wu = (xu + 1.0) / 2.0, wu / 2.0
    v, wv = (xv + 1.0) / 2.0, wv / 4.0
    uu, vv = np.meshgrid(u, v, indexing='ij')
    xi = (uu * (1.0 - vv)).ravel()
    eta = vv.ravel()
    w = np.outer(wu, wv).ravel()
    bary = np.stack([1.0 - xi - eta, xi, eta], axis=-1)
    perms = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
    pts = np.concatenate([bary[:, p] for p in perms], axis=0)
    weights = np.tile(w / 6.0, 6)
    return pts[:, 1:], weights


def quadrature_for(degree):
    """Quadrature rule exact for polynomials up to ``degree``.

    Degrees 1-9 come from the embedded symmetric tables (degrees 3 and 7
    use the next rule up); 10-14 from the symmetrized conical product.
    """
    if degree < 1 or degree > MAX_DEGREE:
        raise ConfigError(
            f"quadrature degree must be in [1, {MAX_DEGREE}], got {degree}")
    if degree in _TABLE_FOR_DEGREE:
        entry = _TABLE_FOR_DEGREE[degree]
        pts, wts = [], []
        for orbit, w in _RULES[entry]:
            pts.append(orbit[:, 1:])
            wts.append(np.full(len(orbit), w))
        points = np.concatenate(pts, axis=0)
        weights = np.concatenate(wts) * 0.5
    else:
        points, weights = _conical_symmetrized(degree)
    return QuadratureRule(degree=degree, points=points, weights=weights)


def monomial_integral(a, b):
    """Exact value of the reference-triangle integral of xi^a eta^b."""
    from math import factorial
    return factorial(a) * factorial(b) / factorial(a + b + 2)

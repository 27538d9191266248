"""Analytic closed surfaces: signed distance, closest points, normals, curvature.

The two surfaces used by the solver and its benchmarks (torus, sphere) have
closed-form signed distance functions and closest-point maps, so projection
introduces no iteration error.  All operations accept single points of shape
``(3,)`` or batches of shape ``(..., 3)`` and broadcast accordingly.

Orientation convention: the unit normal points in the direction of
increasing signed distance (exterior), which for the torus means away
from the core circle of the tube.
"""

import numpy as np

from .errors import DomainError, NumericalError

DEFAULT_TOLERANCE = 1e-12


class ImplicitSurface:
    """Base class for analytic closed surfaces.

    Subclasses provide ``signed_distance``, ``closest_point``, ``normal``
    and ``curvature``.  The generic helpers (tangent projector, surface
    gradient) are defined here in terms of those.
    """

    def __init__(self, tolerance=DEFAULT_TOLERANCE):
        self.tolerance = float(tolerance)

    def signed_distance(self, x):
        raise NotImplementedError

    def closest_point(self, x):
        raise NotImplementedError

    def normal(self, x):
        raise NotImplementedError

    def curvature(self, x):
        raise NotImplementedError

    def tangent_projector(self, x):
        """Projector P = I - n (x) n onto the tangent plane at surface points.

        Returns an array of shape ``(..., 3, 3)``; symmetric, idempotent,
        annihilates the normal, trace 2.
        """
        n = self.normal(x)
        eye = np.eye(3)
        return eye - n[..., :, None] * n[..., None, :]


class Torus(ImplicitSurface):
    """Torus around the z-axis with major radius R and minor radius r.

    Requires 0 < r < R so the closest-point map is single valued inside
    the tube neighborhood.  Points on (or numerically near) the z-axis or
    the core circle are outside the admissible domain.
    """

    def __init__(self, major_radius=1.0, minor_radius=0.5,
                 tolerance=DEFAULT_TOLERANCE):
        super().__init__(tolerance)
        if not 0.0 < minor_radius < major_radius:
            raise DomainError(
                f"torus requires 0 < r < R, got R={major_radius}, r={minor_radius}")
        self.major_radius = float(major_radius)
        self.minor_radius = float(minor_radius)

    def _axis_distance(self, x):
        x = np.asarray(x, dtype=float)
        d = np.hypot(x[..., 0], x[..., 1])
        if np.any(d <= self.tolerance):
            raise DomainError("point on the torus axis: closest point undefined")
        return d

    def _core_offset(self, x):
        """Vector from the nearest core-circle point to x, and its length."""
        x = np.asarray(x, dtype=float)
        d = self._axis_distance(x)
        scale = self.major_radius / d
        c = np.stack([x[..., 0] * scale, x[..., 1] * scale,
                      np.zeros_like(d)], axis=-1)
        v = x - c
        s = np.linalg.norm(v, axis=-1)
        if np.any(s <= self.tolerance):
            raise NumericalError("point on the core circle: direction degenerate")
        return v, s

    def signed_distance(self, x):
        v, s = self._core_offset(x)
        return s - self.minor_radius

    def closest_point(self, x):
        x = np.asarray(x, dtype=float)
        v, s = self._core_offset(x)
        return x - v + v * (self.minor_radius / s)[..., None]

    def normal(self, x):
        v, s = self._core_offset(x)
        return v / s[..., None]

    def parametrize(self, phi, theta):
        """Surface point at major angle phi and minor angle theta.

        theta = 0 is the outer equator, theta = pi the inner one.
        """
        phi = np.asarray(phi, dtype=float)
        theta = np.asarray(theta, dtype=float)
        ring = self.major_radius + self.minor_radius * np.cos(theta)
        return np.stack([ring * np.cos(phi), ring * np.sin(phi),
                         self.minor_radius * np.sin(theta)],
                        axis=-1)

    def curvature(self, x):
        """Curvature tensor (Hessian of the signed distance) at surface points.

        Diagnostic only: the principal directions are the minor-circle and
        major-circle tangents with curvatures 1/r and cos(theta)/(R + r cos(theta)).
        """
        x = np.asarray(x, dtype=float)
        d = self._axis_distance(x)
        n = self.normal(x)
        # minor-circle tangent: rotate n by 90 degrees in the (radial, z) plane
        e_rad = np.stack([x[..., 0] / d, x[..., 1] / d, np.zeros_like(d)], axis=-1)
        cos_t = np.einsum('...i,...i->...', n, e_rad)
        sin_t = n[..., 2]
        a1 = np.stack([-sin_t * e_rad[..., 0], -sin_t * e_rad[..., 1], cos_t],
                      axis=-1)
        a2 = np.stack([-e_rad[..., 1], e_rad[..., 0], np.zeros_like(d)], axis=-1)
        k1 = 1.0 / self.minor_radius
        k2 = cos_t / (self.major_radius + self.minor_radius * cos_t)
        return (k1 * a1[..., :, None] * a1[..., None, :]
                + k2[..., None, None] * a2[..., :, None] * a2[..., None, :])


class Sphere(ImplicitSurface):
    """Sphere of given radius centered at the origin."""

    def __init__(self, radius=1.0, tolerance=DEFAULT_TOLERANCE):
        super().__init__(tolerance)
        if radius <= 0.0:
            raise DomainError(f"sphere radius must be positive, got {radius}")
        self.radius = float(radius)

    def _radial(self, x):
        x = np.asarray(x, dtype=float)
        s = np.linalg.norm(x, axis=-1)
        if np.any(s <= self.tolerance):
            raise DomainError("point at the sphere center: closest point undefined")
        return s

    def signed_distance(self, x):
        return self._radial(x) - self.radius

    def closest_point(self, x):
        x = np.asarray(x, dtype=float)
        s = self._radial(x)
        return x * (self.radius / s)[..., None]

    def normal(self, x):
        x = np.asarray(x, dtype=float)
        s = self._radial(x)
        return x / s[..., None]

    def curvature(self, x):
        n = self.normal(x)
        p = np.eye(3) - n[..., :, None] * n[..., None, :]
        return p / self.radius


def surface_gradient_of_scalar(surface, field, x, fd_step=1e-6):
    """Tangential gradient of a scalar field at surface points.

    The field is composed with the closest-point map (so its values only
    matter on the surface) and differentiated by central differences in the
    ambient coordinates; the result is projected onto the tangent plane.

    Parameters
    ----------
    surface : ImplicitSurface
    field : callable
        Maps an ``(..., 3)`` array of points to an ``(...,)`` array.
    x : array_like, shape (..., 3)
        Evaluation points on the surface (to tolerance).
    fd_step : float
        Central-difference step in each ambient direction.

    Returns
    -------
    ndarray, shape (..., 3), tangential to machine precision.
    """
    x = np.asarray(x, dtype=float)
    grad = np.empty(x.shape)
    for i in range(3):
        e = np.zeros(3)
        e[i] = fd_step
        hi = field(surface.closest_point(x + e))
        lo = field(surface.closest_point(x - e))
        grad[..., i] = (hi - lo) / (2.0 * fd_step)
    proj = surface.tangent_projector(x)
    return np.einsum('...ij,...j->...i', proj, grad)

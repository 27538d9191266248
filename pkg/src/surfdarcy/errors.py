"""Exception types shared across the package."""


class SurfDarcyError(Exception):
    """Base class for all package-specific errors."""


class DomainError(SurfDarcyError):
    """A point lies outside the region where an operation is well defined."""


class NumericalError(SurfDarcyError):
    """A floating-point degeneracy (vanishing norm, singular normalization)."""


class ConfigError(SurfDarcyError):
    """Invalid user-supplied configuration or parameters."""


class DegenerateMeshError(SurfDarcyError):
    """Mesh perturbation could not avoid degenerate cells."""


class DegenerateElementError(SurfDarcyError):
    """An element map has (numerically) rank-deficient Jacobian."""


class ConvergenceError(SurfDarcyError):
    """Iterative solver exhausted its iteration budget."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SingularSystemError(SurfDarcyError):
    """Direct solver hit an exactly singular matrix."""

"""Exception types raised across the package."""


class CauchyformError(Exception):
    """Base class for all package errors."""


class InvalidSpecError(CauchyformError, ValueError):
    """A mesh generator was given sizes or resolutions it cannot honour."""


class MeshParseError(CauchyformError, ValueError):
    """A mesh file could not be read or does not follow the file schema."""


class InvariantViolation(CauchyformError, ValueError):
    """A complex breaks a manifold, orientation or connectivity invariant.

    ``simplex`` holds ``(degree, index)`` of the offending simplex when one
    can be singled out.
    """

    def __init__(self, message, simplex=None):
        super().__init__(message)
        self.simplex = simplex


class DegenerateSimplexError(CauchyformError, ValueError):
    def __init__(self, message, simplex=None):
        super().__init__(message)
        self.simplex = simplex


class DegreeError(CauchyformError, ValueError):
    """A form degree is outside the range an operation supports."""


class BoundaryConditionError(CauchyformError, ValueError):
    """Boundary data is inconsistent with the requested condition."""


class PreconditionError(CauchyformError, ValueError):
    """Inputs do not satisfy an operation's stated preconditions."""


class ConfigError(CauchyformError, ValueError):
    """A run configuration is malformed or refers to unsupported settings."""

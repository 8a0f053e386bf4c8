"""Exception types shared across the package."""


class LinChaosError(Exception):
    """Base class for all package errors."""


class OutOfRangeError(LinChaosError, ValueError):
    """A window, index or prefix length falls outside the valid range."""


class ConfigurationError(LinChaosError, ValueError):
    """Invalid estimator ladder, threshold or experiment setting."""


class SpaceMismatchError(LinChaosError, ValueError):
    """Vectors or operators from different sequence spaces were combined."""


class ConstructionFailed(LinChaosError):
    """A constructive procedure ran out of horizon before its minimum depth.

    ``depth`` is the depth (or ``m``) that was reached, ``partial`` carries
    whatever was built so far.
    """

    def __init__(self, message, depth=0, partial=None):
        super().__init__(message)
        self.depth = depth
        self.partial = partial


class PreconditionError(LinChaosError, ValueError):
    """A documented precondition of a procedure does not hold."""

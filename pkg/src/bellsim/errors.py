"""Exception types shared across the package."""


class BellsimError(Exception):
    """Base class for package errors."""


class ValidationError(BellsimError, ValueError):
    """Malformed input: unnormalized distribution, bad shape, bad parameter."""


class CapabilityError(BellsimError, RuntimeError):
    """A structurally valid request the implementation does not support,
    e.g. exact summation of a continuous model or an oversized feasibility
    problem."""


class UnderpoweredError(BellsimError, RuntimeError):
    """Raised only in strict modes when a statistical result would be
    meaningless at the available sample size."""

"""Exception types shared across the package."""


class CopcureError(Exception):
    """Base class for all package errors."""


class ParameterError(CopcureError, ValueError):
    """A parameter lies outside its family's admissible domain."""


class DomainError(CopcureError, ValueError):
    """A function argument lies outside the mathematical domain."""


class DataError(CopcureError, ValueError):
    """Input data are malformed or incompatible with the model."""


class UsageError(CopcureError, ValueError):
    """An operation was invoked with an inconsistent combination of inputs."""


class NumericalError(CopcureError, RuntimeError):
    """A numerical routine failed to reach its target accuracy."""

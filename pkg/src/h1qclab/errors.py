"""Exception hierarchy shared across the package."""


class H1QCError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgumentError(H1QCError, ValueError):
    """An argument violates a documented precondition."""


class NumericFailure(H1QCError, RuntimeError):
    """A numerical routine failed to converge or produced non-finite values."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SamplingFailure(H1QCError, RuntimeError):
    """Rejection sampling acceptance rate dropped below the viability floor."""


class ConfigurationError(H1QCError):
    """A run configuration is inconsistent or unsatisfiable."""


class MapDomainError(H1QCError, ValueError):
    """A map was evaluated outside its domain of validity."""


class DegenerateMapError(H1QCError, RuntimeError):
    """A map produced a nonpositive Jacobian where a positive one is required."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class DslParseError(H1QCError, ValueError):
    """Syntax error in a map expression; carries the byte offset."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class DslNameError(H1QCError, ValueError):
    """Unknown identifier in a map expression."""

    def __init__(self, name, offset):
        super().__init__(f"unknown identifier {name!r} (at offset {offset})")
        self.name = name
        self.offset = offset

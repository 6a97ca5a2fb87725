"""Exception hierarchy."""


class HHOError(Exception):
    """Base class for all errors raised by the package."""


class MeshParseError(HHOError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TopologyError(HHOError):
    pass


class GeometryError(HHOError):
    pass


class ConfigurationError(HHOError):
    pass


class ConditioningError(HHOError):
    pass


class AssemblyError(HHOError):
    pass


class NotSPDError(HHOError):
    pass


class NonConvergenceError(HHOError):
    """Iterative solver hit its iteration cap. Carries the partial result."""

    def __init__(self, message, x=None, report=None):
        super().__init__(message)
        self.x = x
        self.report = report


class BreakdownError(NonConvergenceError):
    pass


class PreconditionerError(HHOError):
    pass

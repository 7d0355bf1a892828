"""Exception hierarchy shared by every topoflock module."""


class TopoflockError(Exception):
    """Base class for all package errors."""


class VacuumError(TopoflockError):
    """Density reached the vacuum floor; the kernel is undefined there."""


class DegeneratePairError(TopoflockError):
    """Communication domain requested for coincident points x = y."""


class SingularPointError(TopoflockError):
    """Kernel evaluated on the diagonal |x - y| = 0."""


class StaleCacheError(TopoflockError):
    """Kernel cache was built from a different density than the one supplied."""


class BlowUpError(TopoflockError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, message, t=None, field=None):
        super().__init__(message)
        self.t = t
        self.field = field


class UnsupportedDimensionError(TopoflockError):
    """Operation is only defined for a subset of dimensions."""


class ConfigError(TopoflockError):
    """Malformed or out-of-range configuration."""

    def __init__(self, message, key=None, lineno=None):
        super().__init__(message)
        self.key = key
        self.lineno = lineno

"""Exception types shared across the package."""


class OrientraceError(Exception):
    """Base class for all package errors."""


class NotFound(OrientraceError):
    """An input file does not exist."""


class FormatError(OrientraceError):
    """An input file has an unsupported or malformed format."""


class EmptyMask(OrientraceError):
    """A field-of-view mask selects no pixels."""


class ParamError(OrientraceError, ValueError):
    """Invalid construction parameters."""


class DimError(OrientraceError, ValueError):
    """Array dimensions do not match."""


class IllConditioned(OrientraceError):
    """M_psi is too small inside the pass band for exact reconstruction."""


class OutOfBounds(OrientraceError):
    """A sample position lies outside the score grid."""


class SeedError(OrientraceError, ValueError):
    """A tracking seed is degenerate."""


class NoSeeds(OrientraceError):
    """No usable seed survived initialization."""


class LowConfidence(OrientraceError):
    """Optic-disk detection did not produce a reliable result."""

    def __init__(self, message, disk=None):
        super().__init__(message)
        self.disk = disk


class DegenerateSpan(OrientraceError, ValueError):
    """Boundary points share the same abscissa."""


class TooShort(OrientraceError, ValueError):
    """A curve has too few samples for curvature estimation."""

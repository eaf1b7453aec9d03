"""Orientation scores, quadrature-wavelet vessel tracking and curve completion."""

from .errors import OrientraceError

__version__ = "0.1.0"
__all__ = ["OrientraceError", "__version__"]

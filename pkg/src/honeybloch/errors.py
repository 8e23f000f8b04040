"""Shared exception types."""


class ConfigError(ValueError):
    """Malformed or inconsistent configuration input."""


class NumericalError(RuntimeError):
    """Solver failure or loss of required numerical accuracy."""


class DegeneracyError(RuntimeError):
    """Operation requires a simple eigenvalue but found a cluster."""


class SymmetryViolation(RuntimeError):
    """Expected symmetry structure is absent."""


class NotADiracPoint(RuntimeError):
    """Vertex spectrum lacks the clean two-fold conical degeneracy."""


class ConeFitFailure(RuntimeError):
    """Dispersion near the vertex is not conical to fit tolerance."""

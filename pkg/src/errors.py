"""
Exception hierarchy for the cone blow-up lab.

Every failure raised by the numerical core derives from LabError so that
experiment tasks can record it in a report instead of aborting a sweep.
"""


class LabError(Exception):
    """Base class for all lab failures."""


class NoConvergence(LabError):
    """An iterative solver exhausted its iteration budget."""

    def __init__(self, message: str, iterations: int = 0, residual: float = float("nan")):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class DomainError(LabError, ValueError):
    """A point, grid or domain lies outside where an operation is defined."""


class PreconditionError(LabError, ValueError):
    """An input violates a documented precondition."""


class InsufficientSpanError(PreconditionError):
    """Too few samples, or samples spanning too short a window, for a rate fit."""


class CertificationError(LabError):
    """A numerical certificate (barrier, exhaustion, bracketing) failed."""


class DataCorruptionError(LabError):
    """Upstream data violates a bound that no accepted solve can produce."""

"""Error hierarchy shared by the numerics library and the CLI harness."""
from __future__ import annotations


class PtychoError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(PtychoError, ValueError):
    """Raised when parameters or input data violate a documented precondition."""


class DimensionError(ValidationError):
    """Raised on length, shape or divisibility mismatches."""


class SizeGuardError(ValidationError):
    """Raised when a dense assembly would exceed the configured size guard."""

    def __init__(self, what: str, size: int, limit: int):
        super().__init__(f"{what} needs dimension {size}, above the dense-size guard {limit}")
        self.size = size
        self.limit = limit


class NonSpanningError(PtychoError):
    """Raised when a mask family does not span the banded subspace for the requested stride."""

    def __init__(self, message: str, witness: int | None = None):
        super().__init__(message)
        self.witness = witness


class NumericalContractError(PtychoError):
    """Raised when a numerical contract (oracle agreement, residual check) fails."""

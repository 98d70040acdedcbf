"""Exception hierarchy shared by every module."""

from __future__ import annotations


class FracFlowError(Exception):
    """Base class for all package errors."""


class InvalidOrder(FracFlowError, ValueError):
    """Fractional order outside the open interval (0, 1)."""


class GridTooCoarse(FracFlowError, ValueError):
    """Grid size below 8 or odd."""


class NonFinite(FracFlowError, ValueError):
    """NaN or infinite values in an input or a computed field."""


class StarShapeViolated(FracFlowError):
    """Height function no longer describes a valid star-shaped set."""


class QuadratureBudgetExceeded(FracFlowError):
    """Requested quadrature needs more nodes than the configured cap."""


class StabilityCapExceeded(FracFlowError):
    """Explicit time step above the linear stability limit."""


class ModeUnderResolved(FracFlowError, ValueError):
    """Fourier mode too high for the grid used to resolve it."""


class NotNormalized(FracFlowError):
    """State does not have unit-disk volume and centred barycenter."""


class InsufficientRecords(FracFlowError):
    """Too few trajectory records for a finite-difference diagnostic."""


class NonPositiveValues(FracFlowError, ValueError):
    """Log-linear fit requested on values that are not strictly positive."""


class DegenerateWindow(FracFlowError, ValueError):
    """Fit window contains fewer than two distinct times."""


class ConfigInvalid(FracFlowError, ValueError):
    """Experiment configuration failed validation."""

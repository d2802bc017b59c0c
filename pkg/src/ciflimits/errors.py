"""Exception hierarchy used across the package."""


class CiflimitsError(Exception):
    """Base class for all package errors."""


class ConfigError(CiflimitsError):
    """Invalid configuration or arguments (CLI exit code 2)."""


class DomainError(ConfigError):
    """Input outside the mathematical domain of an operation."""


class CalibrationError(CiflimitsError):
    """Root finding for model calibration failed or is infeasible."""


class FitError(CiflimitsError):
    """Estimation failed (non-identifiable data, degenerate input)."""


class ConvergenceError(FitError):
    """Iterative solver did not converge."""


class VarianceError(CiflimitsError):
    """Variance estimation failed (singular information, overflow)."""


class TestError(CiflimitsError):
    """A hypothesis test could not be carried out."""


class SolverError(CiflimitsError):
    """Deterministic limit solver failed (no bracket, divergence)."""

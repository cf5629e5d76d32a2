"""Structured exceptions shared across the package."""


class HFBGasError(Exception):
    """Base class for all package errors."""


class GridMismatchError(HFBGasError):
    """Operands live on different grids."""


class ConvergenceError(HFBGasError):
    """Iterative solver failed to converge.

    Carries the best residual reached so the caller can decide whether
    to retry with a larger budget.
    """

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class SpectralTailError(HFBGasError):
    """Retained spectrum is too small for the requested tolerance."""

    def __init__(self, message, required_count=None):
        super().__init__(message)
        self.required_count = required_count


class TargetUnreachableError(HFBGasError):
    """Requested excited-particle count cannot be met with retained modes."""

    def __init__(self, message, max_reachable=None):
        super().__init__(message)
        self.max_reachable = max_reachable


class TruncationBudgetError(HFBGasError):
    """Discarded trace or truncation estimate exceeds its policy bound."""


class IntegratorError(HFBGasError):
    """Time stepper violated one of its run-time invariants."""

    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index


class ConfigError(HFBGasError):
    """Experiment configuration failed validation."""

"""Exception types shared across the package."""


class BasinwaveError(Exception):
    """Base class for all package errors."""


class ValidationError(BasinwaveError, ValueError):
    """Parameters or configuration violate a documented invariant."""


class SolverError(BasinwaveError, RuntimeError):
    """A numerical solve failed to produce a usable result."""


class CorrectorError(SolverError):
    """Predictor-corrector sweeps diverged (non-finite or growing update)."""

    def __init__(self, message, update_norm=None, time=None):
        super().__init__(message)
        self.update_norm = update_norm
        self.time = time


class NoRootError(SolverError):
    """Bracket expansion found no sign change for a scalar root."""

    def __init__(self, message, bracket=None, residuals=None):
        super().__init__(message)
        self.bracket = bracket
        self.residuals = residuals


class StiffProfileError(SolverError):
    """A profile integration left its representable range."""


class SingularProfileError(SolverError):
    """An algebraic profile relation hit a vanishing denominator."""


class ProfileRangeError(SolverError):
    """An integrated profile left its admissible value range."""


class StepRejected(BasinwaveError):
    """Control-flow signal: retry the time step with a smaller dt."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time

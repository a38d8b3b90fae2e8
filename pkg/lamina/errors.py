"""Exceptions raised across lamina.

Every error carries the process exit code the runner should use for it."""


class LaminaError(Exception):
    """Base class for all contract failures."""

    exit_code = 1


class ValidationError(LaminaError):
    """Inputs are non-finite, inadmissible or otherwise unusable."""


class DomainError(ValidationError):
    """An argument lies outside the domain of the function it was given to."""


class OutOfRangeError(DomainError):
    """A tabulated quantity was queried outside its table."""


class ConfigurationError(ValidationError):
    """The run configuration is inconsistent or names unknown keys."""


class GridMismatchError(ValidationError):
    """Two fields or evaluators do not live on compatible grids."""


class InsufficientDataError(LaminaError):
    """Not enough samples to fit or aggregate."""


class ConstructionError(LaminaError):
    """A closed-form object could not be built (quadrature failure etc)."""


class CheckFailure(LaminaError):
    """A verification failed. ``witness`` describes the first failing sample."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness or {}


class SolverError(LaminaError):
    """Linear or time-stepping failure."""

    exit_code = 2

    def __init__(self, message, residual=None, iterations=None, last_state=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.last_state = last_state


class StepRejected(SolverError):
    """The step violated the advective CFL limit."""

    def __init__(self, message, suggested_dt):
        super().__init__(message)
        self.suggested_dt = suggested_dt

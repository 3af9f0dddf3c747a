"""Exception types shared across the package."""


class KnlbError(Exception):
    """Base class for package-specific failures."""


class ConfigError(KnlbError):
    """Malformed experiment configuration; `field` names the offender."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"config field '{field}': {message}")


class ConvergenceError(KnlbError):
    """Iterative eigensolver ran out of iterations.

    Carries the best estimate and the residual actually achieved so callers
    can decide whether the partial answer is usable.
    """

    def __init__(self, message, estimate=None, residual=None):
        self.estimate = estimate
        self.residual = residual
        super().__init__(message)


class QuadratureError(KnlbError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        self.achieved = achieved
        super().__init__(message)

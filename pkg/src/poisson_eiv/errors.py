"""Exception hierarchy shared by the library and the CLI."""


class EivError(Exception):
    """Base class for all errors raised by poisson_eiv."""


class DomainError(EivError, ValueError):
    """An argument lies outside the admissible domain (e.g. outside an MGF domain)."""


class InvalidDatasetError(EivError, ValueError):
    pass


class AllZeroCountsError(EivError, ValueError):
    """Every count is zero, so the naive score equation has no finite root."""


class NonConvergenceError(EivError, RuntimeError):
    """Newton iteration stopped before reaching the tolerance.

    The partially converged estimate is attached as ``estimate``.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class NoRootError(EivError, ArithmeticError):
    """No sign change of a monotone function inside the admissible bracket."""


class DegenerateMomentError(EivError, ValueError):
    """Moment estimators imply a non-positive variance or shape."""


class ConfigError(EivError, ValueError):
    pass


class SimulationError(EivError, RuntimeError):
    """Too many Monte Carlo replications failed to produce an estimate."""

"""Exception hierarchy shared by all modules."""


class LevyEscapeError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(LevyEscapeError, ValueError):
    """A parameter or configuration value violates its documented constraint."""


class OutOfDomain(LevyEscapeError, ValueError):
    pass


class OutOfRegion(LevyEscapeError, ValueError):
    pass


class GeometryError(LevyEscapeError, ValueError):
    pass


class Singular(LevyEscapeError, ArithmeticError):
    pass


class NoConvergence(LevyEscapeError, RuntimeError):
    pass


class InsufficientData(LevyEscapeError, ValueError):
    pass


class LinearSolveFailure(LevyEscapeError, RuntimeError):
    """Krylov iteration hit its cap before reaching the residual tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NonFiniteSolution(LevyEscapeError, RuntimeError):
    """A solved field left its admissible range (maximum principle violated)."""


class HorizonTooShort(LevyEscapeError, RuntimeError):
    """Too many Monte Carlo paths were still inside the region at ``t_max``."""

    def __init__(self, message, censored_fraction=None):
        super().__init__(message)
        self.censored_fraction = censored_fraction

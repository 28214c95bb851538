"""Exception taxonomy shared across the package.

Exit-code mapping used by the command line driver:
ConfigError -> 2, NumericsError -> 3, ConvergenceFailure -> 4.
"""


class ConfigError(ValueError):
    """Invalid configuration, domain violation, or precondition failure."""


class CapacityError(ConfigError):
    """A resource budget (e.g. the pair budget ``max_pairs``) was exceeded."""


class NumericsError(RuntimeError):
    """A numerical procedure failed to converge or produced garbage."""


class StepFailure(NumericsError):
    """An implicit time step did not converge.

    Carries the best iterate and the residual history so a caller can
    inspect or restart.
    """

    def __init__(self, message, best_values=None, residual=None):
        super().__init__(message)
        self.best_values = best_values
        self.residual = residual


class ConvergenceFailure(RuntimeError):
    """An asserted convergence trend (monotone gap or error decrease) failed."""

"""Exception hierarchy shared by every stackgrad module."""


class StackgradError(Exception):
    """Base class for all library errors."""


class DimensionError(StackgradError, ValueError):
    """Strategy or matrix shape does not match the game."""


class IllPosedGameError(StackgradError, ArithmeticError):
    """A payoff or derivative evaluated to a non-finite value."""


class DegenerateGameError(StackgradError, ArithmeticError):
    """The leader objective of a quadratic game has a singular Hessian."""


class MissingConstantError(StackgradError, ValueError):
    """An operation needs a smoothness constant the game does not declare."""


class ScheduleError(StackgradError, ValueError):
    """Invalid step-size, perturbation or commitment parameters."""


class InvalidContractionError(ScheduleError):
    """beta * mu is outside the open interval (0, 1)."""


class InvalidBoundError(ScheduleError):
    """The strategy-diameter bound B is not positive."""


class SingularHessianError(StackgradError, ArithmeticError):
    """The follower Hessian block is (numerically) singular."""

    def __init__(self, message, eigenvalue):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class NonConvergenceError(StackgradError, RuntimeError):
    """An iterative solver hit its iteration cap."""

    def __init__(self, message, grad_norm):
        super().__init__(message)
        self.grad_norm = grad_norm


class DivergedError(StackgradError, RuntimeError):
    """A trajectory produced non-finite or runaway state.

    ``last_row`` holds the last valid log row and ``log`` the partial
    trajectory (when available) so callers can still summarize it.
    """

    def __init__(self, message, last_row=None, log=None):
        super().__init__(message)
        self.last_row = last_row
        self.log = log


class ConfigError(StackgradError, ValueError):
    """Experiment configuration is malformed or violates an assumption."""

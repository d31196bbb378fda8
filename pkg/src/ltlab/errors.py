"""Exception types raised by the ltlab solvers."""


class LTLabError(Exception):
    """Base class for all ltlab errors."""


class InvalidInputError(LTLabError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateInputError(LTLabError, ValueError):
    """The input is valid but the requested quantity is undefined for it (e.g. V = 0)."""


class ChannelExhaustionError(LTLabError):
    """Not enough angular-momentum channels were solved to certify the requested levels."""

    def __init__(self, l, message=None):
        self.l = l
        super().__init__(message or f"channel l={l} still contributes levels below the cut; increase l_max")


class BreakdownError(LTLabError):
    """The self-consistent iteration cannot proceed (no bound state left)."""


class NumericalFailureError(LTLabError):
    """An internal iterative solve did not reach its tolerance."""

    def __init__(self, message, residual=float("nan")):
        self.residual = residual
        super().__init__(f"{message} (residual={residual:.3e})")


class ExtrapolationWarning(UserWarning):
    """Resampling needed data outside the grid; the missing values were zero-filled."""

"""Exception hierarchy shared by the solvers and the CLI."""


class CoalitionError(Exception):
    """Base class for every error raised by this package."""


class DomainError(CoalitionError, ValueError):
    """An argument lies outside the domain of a formula."""


class DimensionMismatch(CoalitionError, ValueError):
    pass


class NonFiniteState(CoalitionError, ArithmeticError):
    """An ODE state component became NaN or infinite."""

    def __init__(self, message, time=None, node=None):
        super().__init__(message)
        self.time = time
        self.node = node


class PositivityLoss(CoalitionError, ArithmeticError):
    """A value-function factor lost strict positivity."""

    def __init__(self, message, time=None, component=None):
        super().__init__(message)
        self.time = time
        self.component = component


class BadEpsilon(CoalitionError, ValueError):
    pass


class NotCRRA(CoalitionError, ValueError):
    """Raised when a CRRA-only routine gets gamma != 1 - alpha."""


class GridMismatch(CoalitionError, ValueError):
    pass


class NonPositiveWealth(CoalitionError, ArithmeticError):
    """Every simulated Euler-Maruyama path left the positive half-line."""


class ConfigError(CoalitionError, ValueError):
    """Malformed or invalid scenario configuration."""

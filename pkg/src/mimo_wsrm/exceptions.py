class WsrmError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(WsrmError, ValueError):
    """Invalid system or experiment configuration."""


class DegenerateFilterError(WsrmError, ArithmeticError):
    """A receive filter (or derived matrix) is rank deficient where full rank is required."""


class SolverError(WsrmError, ArithmeticError):
    """The covariance subproblem could not be evaluated or solved."""

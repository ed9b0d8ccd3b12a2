"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Shapes or parameters that do not fit together."""


class InvalidDistributionError(ValueError):
    """A probability vector with no positive mass."""


class InsufficientDataError(ValueError):
    pass


class TerminalStateError(RuntimeError):
    """Planning was requested from a state with no legal action."""


class RuleViolationError(ValueError):
    pass


class AgreementWarning(UserWarning):
    """Two policies were compared at a depth after which they still differ."""

class ChannelError(Exception):
    """Base class for every error raised by bandchannel."""


class DomainError(ChannelError, ValueError):
    """A physical parameter is outside its domain (negative frequency, beta <= 0, r < 0, ...)."""


class UsageError(ChannelError, ValueError):
    """Invalid configuration: unknown method tag, empty grid, bad scenario field."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class ConfigConflictError(UsageError):
    """Two mutually exclusive options were requested together."""


class UnsupportedStateError(ChannelError):
    """The state is not in the symmetric twin-beam block form the channel formulas assume."""


class NumericDomainError(ChannelError, ArithmeticError):
    """A formula received values for which it has no real result."""


class ConvergenceError(ChannelError, ArithmeticError):
    """An iterative numeric routine did not reach its tolerance."""

class WavekinError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(WavekinError, ValueError):
    """Invalid configuration or precondition on user-supplied parameters."""


class DomainError(WavekinError, ValueError):
    """Evaluation point outside the domain an operator is defined on."""


class NumericError(WavekinError, FloatingPointError):
    """Non-finite values appeared during a computation."""


class AlignmentError(WavekinError, ValueError):
    """Snapshot times of two series do not line up."""


class DivergenceError(NumericError):
    """Training loss blew up; ``history`` holds what was recorded so far."""

    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = history

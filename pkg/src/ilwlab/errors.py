"""Exception hierarchy shared by every module.

Configuration problems and numerical failures are kept apart so the command
line front end can map them to distinct exit codes.
"""


class LabError(Exception):
    """Base class for all errors raised by ilwlab."""


class ConfigError(LabError, ValueError):
    """Malformed input: wrong lengths, missing parameters, bad config files."""


class DomainError(LabError, ValueError):
    """Argument outside the mathematical domain of a function."""


class NumericalError(LabError, ArithmeticError):
    """A computation could not be carried out to the requested accuracy."""


class BlowUpError(NumericalError):
    """Non-finite or runaway coefficients detected during time stepping."""

    def __init__(self, message, time, partial=None):
        super().__init__(message)
        self.time = time
        self.partial = partial


class PrecisionError(NumericalError):
    """A truncation tail is too large relative to the computed sum."""


class PreconditionError(NumericalError):
    """A smallness gate required by a functional is violated."""

    def __init__(self, message, measured=None):
        super().__init__(message)
        self.measured = measured


class DivergenceError(NumericalError):
    """A series that must converge does not (spectral radius >= 1)."""


class CostGuardError(LabError, RuntimeError):
    """Refusal to start a computation whose estimated cost is too large."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate

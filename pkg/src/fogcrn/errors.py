"""Exception hierarchy shared by every subsystem."""


class FogCRNError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(FogCRNError, ValueError):
    """An argument violates an operation's precondition."""


class RankDeficientError(FogCRNError, ValueError):
    """Normal equations are singular or too ill-conditioned to solve."""


class ConvergenceError(FogCRNError, RuntimeError):
    """An iterative solver hit its iteration cap.

    The last iterate is kept on ``last_iterate`` so callers can inspect it.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class SchemaMismatchError(InvalidArgumentError):
    """Feature vector and model/rules disagree on the feature schema version."""


class SummaryOverflowError(FogCRNError, RuntimeError):
    """An encoded epoch summary exceeds its byte budget."""


class WireFormatError(FogCRNError, ValueError):
    """A binary message or frame could not be decoded."""


class ScenarioError(InvalidArgumentError):
    """A scenario failed validation; ``violations`` lists every problem found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid scenario: " + "; ".join(self.violations))

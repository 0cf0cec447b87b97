"""
errors.py - The Incident Register of the Interchange Workshop

Every failure the workshop can report is a subclass of InterchangeError and
names the operation that raised it. The CLI maps the two families onto exit
codes: input problems (1) and numerical failures (2).
"""

from typing import Any, Optional


class InterchangeError(Exception):
    """Base class for all workshop errors."""

    def __init__(self, message: str, operation: str = "unknown"):
        super().__init__(message)
        self.operation = operation

    def __str__(self) -> str:
        return f"[{self.operation}] {super().__str__()}"


class ConfigError(InterchangeError, ValueError):
    """The experiment configuration could not be parsed or validated."""


class FormatError(InterchangeError, ValueError):
    """A matrix, rate or distribution file is malformed."""


class DimensionError(InterchangeError, IndexError):
    """A state index lies outside the dimension of the object it indexes."""


class PreconditionError(InterchangeError, ValueError):
    """An operation was called with inputs violating its stated precondition."""


class NumericalFailure(InterchangeError):
    """Base class for failures of a numerical procedure (exit code 2)."""


class NonConvergenceError(NumericalFailure):
    """An iteration exhausted its step budget before meeting its tolerance."""

    def __init__(
        self,
        message: str,
        operation: str = "unknown",
        last_iterate: Optional[Any] = None,
        last_gap: Optional[float] = None,
    ):
        super().__init__(message, operation)
        self.last_iterate = last_iterate
        self.last_gap = last_gap


class StochasticityError(NumericalFailure):
    """Rows do not sum to one, or propagation drifted beyond repair."""


class DegenerateRowError(NumericalFailure):
    """A truncated row lost all of its mass and cannot be rescaled."""

    def __init__(self, message: str, operation: str = "unknown", row: int = -1):
        super().__init__(message, operation)
        self.row = row


class StructureError(NumericalFailure):
    """The chain does not have exactly one closed communicating class."""


class IllPosedError(NumericalFailure):
    """A direct solve was refused because the system may be singular."""


class IndeterminateError(NumericalFailure):
    """A ratio evaluated to 0/0."""


class DegenerateGeneratorError(NumericalFailure):
    """A rate matrix with every holding rate zero where a positive one is needed."""


class InternalConsistencyError(NumericalFailure):
    """A postcondition that holds in exact arithmetic was violated."""

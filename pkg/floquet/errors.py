from enum import IntEnum
from typing import ClassVar, Optional

__all__ = [
    "ConfigError",
    "ExitStatus",
    "FloquetError",
    "InternalConsistencyError",
    "InvalidArgumentError",
    "InvalidDimensionError",
    "InvalidParameterError",
    "NotApplicableError",
    "NumericalFailure",
    "PropagationFailure",
    "SpectralFailure",
]


class ExitStatus(IntEnum):
    SUCCESS = 0
    UNSTABLE = 1
    CHECK_FAILED = 1
    INVALID_INPUT = 2
    NUMERICAL_FAILURE = 3


class FloquetError(Exception):
    """Base class for every error raised by this package."""

    exit_status: ClassVar[ExitStatus] = ExitStatus.NUMERICAL_FAILURE


class InvalidArgumentError(FloquetError, ValueError):
    """
    Exception raised when an operation is handed arguments it cannot work with.
    """

    exit_status = ExitStatus.INVALID_INPUT


class InvalidDimensionError(InvalidArgumentError):
    """Exception raised when matrix or vector dimensions do not agree."""


class InvalidParameterError(InvalidArgumentError):
    """Exception raised when a system family is given inadmissible parameters."""


class ConfigError(InvalidArgumentError):
    """Exception raised when a run file or command-line override cannot be understood."""


class NotApplicableError(FloquetError):
    """
    Exception raised when an analysis does not apply to the given spectrum,
    e.g. a gap over multipliers that are not on the unit circle.
    """


class NumericalFailure(FloquetError):
    """Base class for failures of the numerical machinery itself."""


class PropagationFailure(NumericalFailure):
    """Exception raised when an implicit stage fails to converge."""

    def __init__(self, message: str, *, step_index: Optional[int] = None):
        super().__init__(message)
        self.step_index = step_index


class SpectralFailure(NumericalFailure):
    """Exception raised when the eigensolver gives up."""


class InternalConsistencyError(NumericalFailure):
    """
    Exception raised when a result that holds by construction is violated numerically,
    e.g. colour classes that are not closed under conjugation.
    """

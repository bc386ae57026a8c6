class AoiOutageError(Exception):
    """Base class for every error raised by the analyzer."""

    exit_code: int = 1


class UsageError(AoiOutageError):
    """Command-line arguments are missing, empty or malformed."""


class ScenarioParseError(AoiOutageError, ValueError):
    """A scenario file could not be parsed into a valid scenario."""

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class ModelValidationError(AoiOutageError, ValueError):
    """System or link parameters are inconsistent."""


class NumericalError(AoiOutageError, ArithmeticError):
    """A numerical precondition failed (non-PSD covariance, singular transform, ...)."""

    exit_code = 2


class NotDiagonalizableError(NumericalError):
    """The system matrix is defective and the eigenbasis path cannot be used."""


class HistoryError(AoiOutageError, RuntimeError):
    """The controller memory cannot serve the requested age."""

    exit_code = 2


class AcceptanceError(AoiOutageError):
    """Too few comparison cells fall inside their confidence interval."""

    exit_code = 3

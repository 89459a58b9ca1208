"""Exception types raised across the package."""


class MgdmError(ValueError):
    """Base class for all simulator errors."""


class InvalidIndexError(MgdmError):
    pass


class InvalidOrderError(MgdmError):
    pass


class NotGuidedError(MgdmError):
    pass


class UnsupportedProfileError(MgdmError):
    pass


class DomainMismatchError(MgdmError):
    pass


class TargetNotInBasisError(MgdmError):
    pass


class DimensionMismatchError(MgdmError):
    pass


class RateMismatchError(MgdmError):
    pass


class SyncError(MgdmError):
    """Raised when the PRBS correlation peak is not significant."""


class EmptyInputError(MgdmError):
    pass


class ConfigError(MgdmError):
    """Invalid run configuration; ``line`` points into the source document when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)

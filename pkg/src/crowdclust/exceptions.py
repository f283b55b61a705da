"""Exception and warning types raised across the package."""


class CrowdClustError(Exception):
    """Base class for all package errors."""


class InvalidPartition(CrowdClustError, ValueError):
    pass


class DimensionMismatch(CrowdClustError, ValueError):
    pass


class InvalidIndex(CrowdClustError, IndexError):
    pass


class InvalidK(CrowdClustError, ValueError):
    pass


class InvalidSpec(CrowdClustError, ValueError):
    pass


class InvalidSize(CrowdClustError, ValueError):
    pass


class SpectralFailure(CrowdClustError, RuntimeError):
    """The eigensolver did not return a usable embedding."""


class MemoryGuardError(CrowdClustError, MemoryError):
    """A dense n x n matrix would exceed the configured memory cap."""


class IngestError(CrowdClustError, ValueError):
    """A dataset file could not be parsed.

    ``line`` is the 1-based line number of the offending row when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ReportIOError(CrowdClustError, OSError):
    """A report file could not be written or read back."""


class AllZeroAgreement(UserWarning):
    """Every pairwise NMI in an ensemble is zero; weights fall back to uniform."""

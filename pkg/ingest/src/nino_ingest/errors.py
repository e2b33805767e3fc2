class IngestError(Exception):
    """Base class for converter and validator errors."""


class MissingVariable(IngestError):
    """Requested variable absent from the NetCDF file."""


class UnitsUnknown(IngestError):
    """Variable carries no units attribute; the converter refuses to guess."""


class BadTimeAxis(IngestError):
    """Time coordinate missing, unreadable, or with unsupported units."""


class PeriodNotCovered(IngestError):
    """Some month of the requested period has no data."""


class DuplicateMonth(IngestError):
    """The same calendar month appears in more than one input."""


class ValidationError(IngestError):
    """CSV contract violation; carries the offending 1-based line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line

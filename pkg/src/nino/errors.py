"""Exception taxonomy shared across the package.

Each error family gets its own class so callers (and the CLI exit-code
mapping) can distinguish data-format problems from domain violations.
"""


class NinoError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(NinoError):
    """Malformed or incomplete run configuration."""


# ---- gridded data ----

class FormatError(NinoError):
    """Malformed grid CSV; carries the offending 1-based line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InconsistentAxes(NinoError):
    """Observed (lat, lon) pairs do not tile a rectangular grid."""


class GapInTime(NinoError):
    """Months in a grid file are not consecutive."""


class EmptyRegion(NinoError):
    """No grid cell centers fall inside the requested bounds."""


class AllMissing(NinoError):
    """Every cell is missing where at least one value was required."""


class NoOverlap(NinoError):
    """Two grids share no common time range (or no common cell centers)."""


class AxesMismatch(NinoError):
    """Grids or tables expected on identical axes differ."""


# ---- climatology / index ----

class InsufficientData(NinoError):
    """A calendar month has no samples inside the base period."""


class TooShort(NinoError):
    """A series is shorter than the operation requires."""


# ---- preprocessing / rendering ----

class BadScale(NinoError):
    """Heatmap scale must satisfy min < max."""


# ---- tensor engine ----

class ShapeMismatch(NinoError):
    """Operand shapes do not conform."""


class BadRate(NinoError):
    """Dropout rate outside [0, 1)."""


class NotScalar(NinoError):
    """backward() requires a scalar loss."""


# ---- evaluation ----

class BadK(NinoError):
    """Forecast configuration index outside 0..5."""


class LengthMismatch(NinoError):
    """Paired quarter vectors differ in length."""


class EmptyMatrix(NinoError):
    """Confusion matrix has zero total count."""


class EmptySplit(NinoError):
    """A train/test split left one side empty."""


# ---- synthetic ----

class BadSpec(NinoError):
    """Synthetic scenario specification violates its invariants."""

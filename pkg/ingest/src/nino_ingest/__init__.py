"""NetCDF-to-CSV ingest for gridded ocean data.

Converts public NetCDF archives (ERSST v5 SST, OHC products) into the
canonical grid CSV consumed by the forecasting toolkit, restricted to a
bounding box and month range, plus a validator for the CSV contract.
"""

from .convert import IngestJob, convert
from .errors import (
    BadTimeAxis,
    DuplicateMonth,
    IngestError,
    MissingVariable,
    PeriodNotCovered,
    UnitsUnknown,
)
from .validate import ValidationReport, validate

__version__ = "0.1.0"

"""Gridded oceanic variables: in-memory representation, canonical CSV format,
region extraction and time alignment.

The canonical exchange format is a plain CSV with header
``variable,units,lat,lon,time,value`` and one row per (time, lat, lon);
``time`` is ``YYYY-MM``, the value field is empty for missing cells.
Axes and time range are inferred from the row set.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from functools import total_ordering

import numpy as np

from .errors import (
    AllMissing,
    EmptyRegion,
    FormatError,
    GapInTime,
    InconsistentAxes,
    NoOverlap,
)

# Uniform-spacing tolerance for grid axes, in degrees.
AXIS_TOL = 1e-9


class Variable(enum.Enum):
    SST = "SST"
    OHC = "OHC"


@total_ordering
@dataclass(frozen=True)
class TimeStamp:
    """A calendar month: (year, month) with month in 1..12."""

    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValueError(f"month must be in 1..12, got {self.month}")

    def __lt__(self, other: "TimeStamp") -> bool:
        return (self.year, self.month) < (other.year, other.month)

    @property
    def index(self) -> int:
        """Months elapsed since 0000-01; defines the total ordering."""
        return self.year * 12 + (self.month - 1)

    @classmethod
    def from_index(cls, idx: int) -> "TimeStamp":
        return cls(idx // 12, idx % 12 + 1)

    def plus(self, months: int) -> "TimeStamp":
        return TimeStamp.from_index(self.index + months)

    def successor(self) -> "TimeStamp":
        return self.plus(1)

    def months_until(self, other: "TimeStamp") -> int:
        return other.index - self.index

    @classmethod
    def parse(cls, text: str) -> "TimeStamp":
        parts = text.split("-")
        if len(parts) != 2:
            raise ValueError(f"expected YYYY-MM, got {text!r}")
        return cls(int(parts[0]), int(parts[1]))

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


def _normalize_lon(lon: float) -> float:
    """Map a longitude in degrees east onto [-180, 180)."""
    out = (lon + 180.0) % 360.0 - 180.0
    # guard against -180.0 - eps wrapping to +180.0 via float rounding
    return -180.0 if out == 180.0 else out


@dataclass(frozen=True)
class GeoBounds:
    """Inclusive lat/lon bounding box; south and west are negative."""

    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self):
        object.__setattr__(self, "lon_min", _normalize_lon(self.lon_min))
        object.__setattr__(self, "lon_max", _normalize_lon(self.lon_max))
        if self.lat_min > self.lat_max:
            raise ValueError("lat_min > lat_max")
        if self.lon_min > self.lon_max:
            raise ValueError(
                "lon_min > lon_max after normalization to [-180, 180); "
                "antimeridian-crossing boxes are not supported"
            )

    def contains(self, lat: float, lon: float) -> bool:
        lon = _normalize_lon(lon)
        return (self.lat_min <= lat <= self.lat_max
                and self.lon_min <= lon <= self.lon_max)


# The index region: 5S-5N, 170W-120W.
NINO34 = GeoBounds(-5.0, 5.0, -170.0, -120.0)


@dataclass(frozen=True)
class GridAxes:
    """Strictly ascending, uniformly spaced lat/lon coordinate axes."""

    lats: tuple[float, ...]
    lons: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lats", tuple(float(v) for v in self.lats))
        object.__setattr__(self, "lons", tuple(float(v) for v in self.lons))
        for name, vals in (("lats", self.lats), ("lons", self.lons)):
            if len(vals) == 0:
                raise ValueError(f"{name} axis is empty")
            diffs = np.diff(vals)
            if len(diffs) and not np.all(diffs > 0):
                raise ValueError(f"{name} axis not strictly ascending")
            if len(diffs) > 1 and np.ptp(diffs) > AXIS_TOL:
                raise ValueError(f"{name} axis spacing not uniform within {AXIS_TOL}")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.lats), len(self.lons)

    def bounding_box(self) -> GeoBounds:
        return GeoBounds(self.lats[0], self.lats[-1], self.lons[0], self.lons[-1])


@dataclass(frozen=True)
class SpatioTemporalGrid:
    """Time-ordered stack of 2D lat x lon fields for one variable.

    ``values`` has shape [time, lat, lon] (float64); NaN marks missing cells.
    Time steps are consecutive calendar months starting at ``start``.
    Immutable after construction: the value array is set read-only.
    """

    variable: Variable
    axes: GridAxes
    start: TimeStamp
    values: np.ndarray
    units: str = field(default="degC", compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        expected = (vals.shape[0],) + self.axes.shape
        if vals.ndim != 3 or vals.shape != expected:
            raise ValueError(
                f"values shape {vals.shape} inconsistent with axes {self.axes.shape}"
            )
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def __eq__(self, other):
        if not isinstance(other, SpatioTemporalGrid):
            return NotImplemented
        return (self.variable == other.variable
                and self.axes == other.axes
                and self.start == other.start
                and np.array_equal(self.values, other.values, equal_nan=True))

    @property
    def n_months(self) -> int:
        return self.values.shape[0]

    @property
    def end(self) -> TimeStamp:
        """Last covered month (inclusive)."""
        return self.start.plus(self.n_months - 1)

    def times(self) -> list[TimeStamp]:
        return [self.start.plus(i) for i in range(self.n_months)]

    def time_index(self, t: TimeStamp) -> int:
        idx = self.start.months_until(t)
        if not 0 <= idx < self.n_months:
            raise ValueError(f"{t} outside grid time range {self.start}..{self.end}")
        return idx

    def subperiod(self, start: TimeStamp, end: TimeStamp) -> "SpatioTemporalGrid":
        """Slice to the inclusive month range [start, end]."""
        i0 = self.time_index(start)
        i1 = self.time_index(end)
        if i1 < i0:
            raise ValueError("subperiod end precedes start")
        return SpatioTemporalGrid(self.variable, self.axes, start,
                                  self.values[i0:i1 + 1], self.units)


def extract_region(grid: SpatioTemporalGrid, bounds: GeoBounds) -> SpatioTemporalGrid:
    """Keep exactly the cells whose centers lie inside ``bounds`` (inclusive).

    Raises EmptyRegion when no cell center qualifies. Time range is unchanged.
    """
    lat_idx = [i for i, v in enumerate(grid.axes.lats)
               if bounds.lat_min <= v <= bounds.lat_max]
    lon_idx = [j for j, v in enumerate(grid.axes.lons)
               if bounds.lon_min <= _normalize_lon(v) <= bounds.lon_max]
    if not lat_idx or not lon_idx:
        raise EmptyRegion(f"no cell centers inside {bounds}")
    axes = GridAxes(tuple(grid.axes.lats[i] for i in lat_idx),
                    tuple(grid.axes.lons[j] for j in lon_idx))
    sub = grid.values[:, lat_idx, :][:, :, lon_idx]
    return SpatioTemporalGrid(grid.variable, axes, grid.start, sub, grid.units)


def regional_mean(grid: SpatioTemporalGrid, t: TimeStamp) -> float:
    """Arithmetic mean over all non-missing cells at month ``t``."""
    field2d = grid.values[grid.time_index(t)]
    good = ~np.isnan(field2d)
    if not good.any():
        raise AllMissing(f"all cells missing at {t}")
    return float(field2d[good].mean())


_CSV_HEADER = ["variable", "units", "lat", "lon", "time", "value"]


def write_grid_csv(grid: SpatioTemporalGrid, path) -> None:
    """Write the canonical grid CSV (UTF-8, LF, one row per (time, lat, lon)).

    Values are formatted with repr() so the read/write round trip is exact;
    missing cells get an empty value field.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_CSV_HEADER)
        name = grid.variable.value
        for ti, t in enumerate(grid.times()):
            tstr = str(t)
            for li, lat in enumerate(grid.axes.lats):
                for lj, lon in enumerate(grid.axes.lons):
                    v = grid.values[ti, li, lj]
                    vstr = "" if math.isnan(v) else repr(float(v))
                    writer.writerow([name, grid.units, repr(lat), repr(lon), tstr, vstr])


def read_grid_csv(path) -> SpatioTemporalGrid:
    """Parse a canonical grid CSV into a SpatioTemporalGrid.

    Rows may appear in any order. A (time, lat, lon) combination absent from
    the file is stored as missing. Raises FormatError (with line number) on
    malformed rows or duplicates, InconsistentAxes when the observed (lat, lon)
    pairs do not tile a rectangle, GapInTime when months are not consecutive.
    """
    rows: dict[tuple[int, float, float], float] = {}
    variable = None
    units = None
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _CSV_HEADER:
            raise FormatError(f"bad header {header!r}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 6:
                raise FormatError(f"expected 6 fields, got {len(row)}", line=lineno)
            vname, vunits, lat_s, lon_s, time_s, val_s = row
            try:
                var = Variable(vname)
            except ValueError:
                raise FormatError(f"unknown variable {vname!r}", line=lineno) from None
            if variable is None:
                variable, units = var, vunits
            elif var is not variable:
                raise FormatError(f"mixed variables {variable.value!r} and {vname!r}",
                                  line=lineno)
            try:
                lat, lon = float(lat_s), float(lon_s)
                t = TimeStamp.parse(time_s)
                val = math.nan if val_s == "" else float(val_s)
            except ValueError as exc:
                raise FormatError(str(exc), line=lineno) from None
            key = (t.index, lat, lon)
            if key in rows:
                raise FormatError(f"duplicate row for ({time_s}, {lat_s}, {lon_s})",
                                  line=lineno)
            rows[key] = val
    if not rows:
        raise FormatError("no data rows", line=1)

    t_indices = sorted({k[0] for k in rows})
    lats = sorted({k[1] for k in rows})
    lons = sorted({k[2] for k in rows})

    observed_pairs = {(k[1], k[2]) for k in rows}
    if len(observed_pairs) != len(lats) * len(lons):
        raise InconsistentAxes(
            "observed (lat, lon) pairs do not tile the full lat x lon rectangle")

    for a, b in zip(t_indices, t_indices[1:]):
        if b != a + 1:
            raise GapInTime(
                f"months not consecutive: {TimeStamp.from_index(a)} then "
                f"{TimeStamp.from_index(b)}")

    axes = GridAxes(tuple(lats), tuple(lons))
    lat_pos = {v: i for i, v in enumerate(lats)}
    lon_pos = {v: j for j, v in enumerate(lons)}
    t0 = t_indices[0]
    values = np.full((len(t_indices), len(lats), len(lons)), np.nan)
    for (ti, lat, lon), val in rows.items():
        values[ti - t0, lat_pos[lat], lon_pos[lon]] = val
    return SpatioTemporalGrid(variable, axes, TimeStamp.from_index(t0), values,
                              units if units is not None else "degC")


def _intersect_axis(a: tuple[float, ...], b: tuple[float, ...]) -> list[float]:
    out = []
    for v in a:
        if any(abs(v - w) <= AXIS_TOL for w in b):
            out.append(v)
    return out


def _nearest_indices(src: tuple[float, ...], targets: list[float]) -> list[int]:
    src_arr = np.asarray(src)
    return [int(np.argmin(np.abs(src_arr - t))) for t in targets]


def align(a: SpatioTemporalGrid,
          b: SpatioTemporalGrid) -> tuple[SpatioTemporalGrid, SpatioTemporalGrid]:
    """Put two grids on their common time range and common cell set.

    The time range is the intersection of the two ranges (NoOverlap when
    disjoint). The axes are the intersection of the two coordinate sets; each
    grid is resampled onto them by nearest neighbor (exact picks when the
    coordinate already exists, which is always the case for set intersections).
    """
    t0 = max(a.start.index, b.start.index)
    t1 = min(a.end.index, b.end.index)
    if t1 < t0:
        raise NoOverlap(f"time ranges {a.start}..{a.end} and {b.start}..{b.end} "
                        "are disjoint")
    lats = _intersect_axis(a.axes.lats, b.axes.lats)
    lons = _intersect_axis(a.axes.lons, b.axes.lons)
    if not lats or not lons:
        raise NoOverlap("grids share no common cell centers")
    axes = GridAxes(tuple(lats), tuple(lons))
    start = TimeStamp.from_index(t0)
    out = []
    for g in (a, b):
        i0 = g.start.months_until(start)
        vals = g.values[i0:i0 + (t1 - t0 + 1)]
        li = _nearest_indices(g.axes.lats, lats)
        lj = _nearest_indices(g.axes.lons, lons)
        vals = vals[:, li, :][:, :, lj]
        out.append(SpatioTemporalGrid(g.variable, axes, start, vals, g.units))
    return out[0], out[1]

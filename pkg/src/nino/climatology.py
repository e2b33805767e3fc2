"""Monthly climatology, regional SST anomalies, the 3-month running-mean
index, overlapping-quarter matrices, and the five-quarter event rule.

Conventions fixed here so results are deterministic:

* climatology uses a fixed configurable base period (default: all complete
  calendar years of the input); a centered 30-year window is available via
  :func:`centered_base_period` / :func:`regional_anomaly_centered` and errors
  when coverage is insufficient,
* the index series is labeled by the **last** month of each 3-month window,
* quarter-matrix row t covers forward-looking windows starting at months
  t..t+4, so one row spans seven consecutive months,
* the event threshold comparison is inclusive (values meeting the threshold
  count).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import AxesMismatch, EmptyRegion, InsufficientData, TooShort
from .grid import GeoBounds, GridAxes, SpatioTemporalGrid, TimeStamp, _normalize_lon

DEFAULT_THRESHOLD = 0.5  # degC


@dataclass(frozen=True)
class ClimatologyTable:
    """Per-cell mean field for each of the 12 calendar months."""

    axes: GridAxes
    base_period: tuple[TimeStamp, TimeStamp]
    means: np.ndarray  # [12, lat, lon]

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64)
        if means.shape != (12,) + self.axes.shape:
            raise ValueError(f"means shape {means.shape} inconsistent with axes")
        means = means.copy()
        means.flags.writeable = False
        object.__setattr__(self, "means", means)

    def month_field(self, month: int) -> np.ndarray:
        return self.means[month - 1]


@dataclass(frozen=True)
class AnomalySeries:
    """Regional anomaly in degC, one value per consecutive month."""

    start: TimeStamp
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def __len__(self) -> int:
        return len(self.values)

    def time_at(self, i: int) -> TimeStamp:
        return self.start.plus(i)


@dataclass(frozen=True)
class OniSeries:
    """3-month running mean of the regional anomaly.

    ``start`` is the month of the third anomaly in the first window (series
    labeled by the last month of each window).
    """

    start: TimeStamp
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class QuarterMatrix:
    """n_steps x 5 matrix of overlapping 3-month mean anomalies.

    Row t, column i holds the mean anomaly over months (t+i .. t+i+2) counted
    from ``start``; a row consumes seven consecutive months.
    """

    n_steps: int
    quarters: np.ndarray
    start: TimeStamp

    def __post_init__(self):
        q = np.asarray(self.quarters, dtype=np.float64)
        if q.shape != (self.n_steps, 5):
            raise ValueError(f"quarters shape {q.shape} != ({self.n_steps}, 5)")
        q = q.copy()
        q.flags.writeable = False
        object.__setattr__(self, "quarters", q)

    def row_start(self, t: int) -> TimeStamp:
        return self.start.plus(t)


def default_base_period(grid: SpatioTemporalGrid) -> tuple[TimeStamp, TimeStamp]:
    """All complete calendar years covered by the grid."""
    first = grid.start if grid.start.month == 1 else TimeStamp(grid.start.year + 1, 1)
    last = grid.end if grid.end.month == 12 else TimeStamp(grid.end.year - 1, 12)
    if last < first:
        raise InsufficientData("grid covers no complete calendar year")
    return first, last


def centered_base_period(year: int) -> tuple[TimeStamp, TimeStamp]:
    """The 30-year window centered on ``year``: years year-15 .. year+14."""
    return TimeStamp(year - 15, 1), TimeStamp(year + 14, 12)


def compute_climatology(grid: SpatioTemporalGrid,
                        base_period: tuple[TimeStamp, TimeStamp] | None = None,
                        ) -> ClimatologyTable:
    """Mean field per calendar month over ``base_period``, skipping missing.

    Every calendar month must have at least one sample inside the base period
    and the period must lie within the grid's time range (InsufficientData
    otherwise). Cells missing at every sample of a month get a NaN mean.
    """
    if base_period is None:
        base_period = default_base_period(grid)
    p0, p1 = base_period
    if p1 < p0:
        raise InsufficientData("base period end precedes start")
    if p0 < grid.start or grid.end < p1:
        raise InsufficientData(
            f"base period {p0}..{p1} not within grid range {grid.start}..{grid.end}")
    i0 = grid.time_index(p0)
    i1 = grid.time_index(p1)
    means = np.full((12,) + grid.axes.shape, np.nan)
    for month in range(1, 13):
        idx = [i for i in range(i0, i1 + 1) if grid.start.plus(i).month == month]
        if not idx:
            raise InsufficientData(
                f"no samples for month {month} in base period {p0}..{p1}")
        stack = grid.values[idx]
        with np.errstate(invalid="ignore"):
            means[month - 1] = np.nanmean(stack, axis=0)
    return ClimatologyTable(grid.axes, (p0, p1), means)


def _region_mask(axes: GridAxes, bounds: GeoBounds) -> np.ndarray:
    lat_in = np.array([bounds.lat_min <= v <= bounds.lat_max for v in axes.lats])
    lon_in = np.array([bounds.lon_min <= _normalize_lon(v) <= bounds.lon_max
                       for v in axes.lons])
    return np.outer(lat_in, lon_in)


def regional_anomaly(grid: SpatioTemporalGrid, clim: ClimatologyTable,
                     bounds: GeoBounds) -> AnomalySeries:
    """Spatial mean of per-cell anomalies (value minus the cell's monthly
    climatology) over the in-bounds, non-missing cells, month by month.

    A month where every in-bounds cell is missing yields NaN.
    """
    if grid.axes != clim.axes:
        raise AxesMismatch("grid and climatology axes differ")
    mask = _region_mask(grid.axes, bounds)
    if not mask.any():
        raise EmptyRegion(f"no cells inside {bounds}")
    out = []
    for i in range(grid.n_months):
        month = grid.start.plus(i).month
        anom = grid.values[i] - clim.month_field(month)
        vals = anom[mask]
        good = ~np.isnan(vals)
        out.append(float(vals[good].mean()) if good.any() else float("nan"))
    return AnomalySeries(grid.start, tuple(out))


def regional_anomaly_centered(grid: SpatioTemporalGrid, bounds: GeoBounds,
                              period: tuple[TimeStamp, TimeStamp] | None = None,
                              ) -> AnomalySeries:
    """Anomaly with a per-year centered 30-year climatology window.

    This is the strict reading of the climatology term (years c-15..c+14
    around each sample's year), evaluated for the months in ``period``
    (default: the whole grid). It raises InsufficientData unless the grid
    covers the full window for every requested month, which multi-decade
    inputs rarely satisfy; the fixed-base :func:`regional_anomaly` is the
    practical default.
    """
    if period is None:
        period = (grid.start, grid.end)
    tables: dict[int, ClimatologyTable] = {}
    out = []
    t = period[0]
    while t <= period[1]:
        if t.year not in tables:
            tables[t.year] = compute_climatology(grid, centered_base_period(t.year))
        series = regional_anomaly(grid.subperiod(t, t), tables[t.year], bounds)
        out.append(series.values[0])
        t = t.successor()
    return AnomalySeries(period[0], tuple(out))


def oni(a: AnomalySeries) -> OniSeries:
    """3-month running mean of the anomaly series: (A(t-2)+A(t-1)+A(t))/3."""
    if len(a) < 3:
        raise TooShort(f"need at least 3 anomaly values, got {len(a)}")
    vals = tuple((a.values[i - 2] + a.values[i - 1] + a.values[i]) / 3.0
                 for i in range(2, len(a)))
    return OniSeries(a.start.plus(2), vals)


def quarter_matrix(a: AnomalySeries, n_steps: int) -> QuarterMatrix:
    """Build the n_steps x 5 overlapping-quarter matrix from an anomaly series.

    Row t column i is the mean of anomalies at months t+i, t+i+1, t+i+2, so
    n_steps rows need n_steps + 6 anomaly months.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    needed = n_steps + 6
    if len(a) < needed:
        raise TooShort(f"need >= {needed} anomaly months for {n_steps} steps, "
                       f"got {len(a)}")
    vals = np.asarray(a.values)
    q = np.empty((n_steps, 5))
    for i in range(5):
        for t in range(n_steps):
            q[t, i] = vals[t + i:t + i + 3].mean()
    return QuarterMatrix(n_steps, q, a.start)


def classify_event(quarters, threshold: float = DEFAULT_THRESHOLD) -> bool:
    """True iff all five quarter anomalies meet or exceed the threshold."""
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    q = np.asarray(quarters, dtype=float)
    if q.shape != (5,):
        raise ValueError(f"expected 5 quarter values, got shape {q.shape}")
    return bool(np.all(q >= threshold))


def write_series_csv(start: TimeStamp, values, path) -> None:
    """Two-column ``time,value`` CSV used for anomaly and index series."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["time", "value"])
        for i, v in enumerate(values):
            writer.writerow([str(start.plus(i)), repr(float(v))])


def write_quarter_csv(qm: QuarterMatrix, path) -> None:
    """QuarterMatrix CSV with columns ``t,q0..q4``; t is the row's first month."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "q0", "q1", "q2", "q3", "q4"])
        for t in range(qm.n_steps):
            writer.writerow([str(qm.row_start(t))]
                            + [repr(float(v)) for v in qm.quarters[t]])


def read_quarter_csv(path) -> QuarterMatrix:
    rows = []
    start = None
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            if not row:
                continue
            if start is None:
                start = TimeStamp.parse(row[0])
            rows.append([float(v) for v in row[1:6]])
    if start is None:
        raise ValueError(f"no rows in {path}")
    return QuarterMatrix(len(rows), np.asarray(rows), start)

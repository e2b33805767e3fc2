"""One-way NetCDF -> canonical grid CSV conversion.

The output follows the toolkit's grid CSV contract bit-exactly: header
``variable,units,lat,lon,time,value``, one row per (time, lat, lon) sorted by
time, lat, lon; times as YYYY-MM; repr()-formatted values, empty for missing;
UTF-8 with LF endings. Values pass through unchanged apart from fill-value
masking and scale/offset unpacking declared by the source file; nothing is
interpolated or filled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DuplicateMonth, MissingVariable, PeriodNotCovered
from .netcdf import (
    decode_time_axis,
    grid_axes_order,
    read_netcdf,
    require_units,
    unpack_values,
)

# label inference from common variable names; anything else needs --label
_SST_HINTS = ("sst", "temp")
_OHC_HINTS = ("ohc", "heat")


def parse_month(text: str) -> tuple[int, int]:
    year, month = text.split("-")
    y, m = int(year), int(month)
    if not 1 <= m <= 12:
        raise ValueError(f"month out of range in {text!r}")
    return y, m


def month_index(ym: tuple[int, int]) -> int:
    return ym[0] * 12 + (ym[1] - 1)


def format_month(idx: int) -> str:
    return f"{idx // 12:04d}-{idx % 12 + 1:02d}"


def normalize_lon(lon: float) -> float:
    out = (float(lon) + 180.0) % 360.0 - 180.0
    return -180.0 if out == 180.0 else float(out)


@dataclass(frozen=True)
class IngestJob:
    inputs: tuple[str, ...]
    variable: str                       # name inside the NetCDF file
    bounds: tuple[float, float, float, float]  # latmin, latmax, lonmin, lonmax
    period: tuple[str, str]             # YYYY-MM inclusive
    out_path: str
    label: str | None = None            # SST or OHC; inferred when None

    def __post_init__(self):
        p0 = month_index(parse_month(self.period[0]))
        p1 = month_index(parse_month(self.period[1]))
        if p1 < p0:
            raise ValueError("period end precedes start")

    def resolved_label(self) -> str:
        if self.label:
            if self.label not in ("SST", "OHC"):
                raise ValueError(f"label must be SST or OHC, got {self.label!r}")
            return self.label
        low = self.variable.lower()
        if any(h in low for h in _SST_HINTS):
            return "SST"
        if any(h in low for h in _OHC_HINTS):
            return "OHC"
        raise MissingVariable(
            f"cannot infer SST/OHC label from variable {self.variable!r}; "
            "pass --label")


def _load_months(job: IngestJob):
    """Collect per-month fields from all inputs, restricted to bounds.

    Returns (months dict idx -> 2D field, lats, lons, units).
    """
    lat_lo, lat_hi, lon_lo, lon_hi = job.bounds
    lon_lo, lon_hi = normalize_lon(lon_lo), normalize_lon(lon_hi)
    months: dict[int, np.ndarray] = {}
    axes_ref = None
    units = None
    for path in job.inputs:
        nc = read_netcdf(path)
        var = nc.require(job.variable)
        units = require_units(var)
        if "time" not in nc.variables:
            raise MissingVariable(f"{path}: no time coordinate variable")
        times = decode_time_axis(nc.variables["time"])
        lat_name = "lat" if "lat" in nc.variables else "latitude"
        lon_name = "lon" if "lon" in nc.variables else "longitude"
        lats = np.asarray(nc.require(lat_name).values, dtype=np.float64).ravel()
        lons = np.asarray(nc.require(lon_name).values, dtype=np.float64).ravel()

        t_ax, lat_ax, lon_ax, squeeze = grid_axes_order(
            var, len(times), len(lats), len(lons))
        vals = unpack_values(var)
        vals = np.moveaxis(vals, (t_ax, lat_ax, lon_ax), (0, -2, -1))
        vals = vals.reshape(len(times), len(lats), len(lons))

        lat_idx = [i for i, v in enumerate(lats) if lat_lo <= v <= lat_hi]
        lon_norm = [normalize_lon(v) for v in lons]
        lon_idx = [j for j, v in enumerate(lon_norm) if lon_lo <= v <= lon_hi]
        if not lat_idx or not lon_idx:
            raise PeriodNotCovered(f"{path}: no cells inside bounds {job.bounds}")
        sel_lats = [float(lats[i]) for i in lat_idx]
        sel_lons = [lon_norm[j] for j in lon_idx]
        order_lat = np.argsort(sel_lats)
        order_lon = np.argsort(sel_lons)
        sel_lats = [sel_lats[i] for i in order_lat]
        sel_lons = [sel_lons[j] for j in order_lon]
        axes = (tuple(sel_lats), tuple(sel_lons))
        if axes_ref is None:
            axes_ref = axes
        elif axes != axes_ref:
            raise MissingVariable(f"{path}: grid axes differ between inputs")

        sub = vals[:, lat_idx, :][:, :, lon_idx]
        sub = sub[:, order_lat, :][:, :, order_lon]
        for k, ym in enumerate(times):
            idx = month_index(ym)
            if idx in months:
                raise DuplicateMonth(
                    f"month {format_month(idx)} appears in more than one input")
            months[idx] = sub[k]
    return months, axes_ref[0], axes_ref[1], units


def convert(job: IngestJob) -> str:
    """Run the conversion; returns the output path.

    Deterministic: identical inputs produce a byte-identical file. Every
    (time, lat, lon) present in the sources within bounds and period appears
    exactly once in the output.
    """
    label = job.resolved_label()
    months, lats, lons, units = _load_months(job)
    p0 = month_index(parse_month(job.period[0]))
    p1 = month_index(parse_month(job.period[1]))
    missing = [format_month(i) for i in range(p0, p1 + 1) if i not in months]
    if missing:
        raise PeriodNotCovered(
            f"period {job.period[0]}..{job.period[1]} not covered: first "
            f"missing month {missing[0]} ({len(missing)} missing)")
    units_field = str(units).replace(",", " ")
    with open(job.out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("variable,units,lat,lon,time,value\n")
        for idx in range(p0, p1 + 1):
            field = months[idx]
            tstr = format_month(idx)
            for li, lat in enumerate(lats):
                for lj, lon in enumerate(lons):
                    v = field[li, lj]
                    vstr = "" if math.isnan(v) else repr(float(v))
                    fh.write(f"{label},{units_field},{lat!r},{lon!r},{tstr},{vstr}\n")
    return job.out_path

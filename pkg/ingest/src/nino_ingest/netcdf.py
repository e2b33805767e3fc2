"""Minimal NetCDF reading for (time, lat, lon) gridded variables.

Classic NetCDF-3 files go through scipy.io; NetCDF-4 files are HDF5 and go
through h5py. The format is sniffed from the magic bytes. Only what the
converter needs is implemented: coordinate arrays, CF-style time units,
scale/offset unpacking, and fill-value masking.
"""

from __future__ import annotations

import datetime
import re
from dataclasses import dataclass

import numpy as np

from .errors import BadTimeAxis, MissingVariable, UnitsUnknown


def _decode(value):
    if isinstance(value, bytes):
        return value.decode("utf-8", "replace")
    if isinstance(value, np.ndarray) and value.size == 1:
        return _decode(value.item())
    return value


@dataclass
class NcVariable:
    name: str
    dims: tuple[str, ...] | None  # None when the file carries no dim names
    values: np.ndarray            # raw, unscaled
    attrs: dict

    def attr(self, *names, default=None):
        for n in names:
            if n in self.attrs:
                return _decode(self.attrs[n])
        return default


@dataclass
class NcFile:
    path: str
    variables: dict[str, NcVariable]

    def require(self, name: str) -> NcVariable:
        if name not in self.variables:
            raise MissingVariable(
                f"{self.path}: variable {name!r} not found "
                f"(has {sorted(self.variables)})")
        return self.variables[name]


def _read_netcdf3(path) -> NcFile:
    from scipy.io import netcdf_file

    out = {}
    with netcdf_file(str(path), "r", mmap=False, maskandscale=False) as nc:
        for name, var in nc.variables.items():
            out[name] = NcVariable(
                name=name,
                dims=tuple(var.dimensions),
                values=np.array(var[:]),
                attrs={k: _decode(v) for k, v in var._attributes.items()},
            )
    return NcFile(str(path), out)


def _read_hdf5(path) -> NcFile:
    import h5py

    out = {}
    with h5py.File(str(path), "r") as f:
        def visit(name, obj):
            if not isinstance(obj, h5py.Dataset):
                return
            dims = None
            if "DIMENSION_LIST" in obj.attrs:
                try:
                    dims = tuple(
                        f[ref[0]].name.rsplit("/", 1)[-1]
                        for ref in obj.attrs["DIMENSION_LIST"])
                except Exception:
                    dims = None
            attrs = {k: _decode(v) for k, v in obj.attrs.items()
                     if k not in ("DIMENSION_LIST", "REFERENCE_LIST",
                                  "CLASS", "NAME", "_Netcdf4Dimid")}
            short = name.rsplit("/", 1)[-1]
            out[short] = NcVariable(short, dims, np.array(obj[()]), attrs)

        f.visititems(visit)
    return NcFile(str(path), out)


def read_netcdf(path) -> NcFile:
    """Open a NetCDF-3 or NetCDF-4/HDF5 file by sniffing its magic bytes."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic[:3] == b"CDF":
        return _read_netcdf3(path)
    if magic == b"\x89HDF":
        return _read_hdf5(path)
    raise BadTimeAxis(f"{path}: not a NetCDF file (magic {magic!r})")


_SINCE_RE = re.compile(
    r"^\s*(day|hour|minute|second|month)s?\s+since\s+"
    r"(\d{1,4})-(\d{1,2})-(\d{1,2})", re.IGNORECASE)

_UNIT_SECONDS = {"day": 86400.0, "hour": 3600.0, "minute": 60.0, "second": 1.0}


def decode_time_axis(time_var: NcVariable) -> list[tuple[int, int]]:
    """CF 'units since epoch' time values -> (year, month) per step."""
    units = time_var.attr("units")
    if not units:
        raise BadTimeAxis("time variable has no units attribute")
    m = _SINCE_RE.match(str(units))
    if not m:
        raise BadTimeAxis(f"unsupported time units {units!r}")
    unit = m.group(1).lower()
    year0, month0, day0 = int(m.group(2)), int(m.group(3)), int(m.group(4))
    out = []
    values = np.asarray(time_var.values).ravel()
    if unit == "month":
        base = year0 * 12 + (month0 - 1)
        for v in values:
            idx = base + int(round(float(v)))
            out.append((idx // 12, idx % 12 + 1))
        return out
    epoch = datetime.datetime(year0, month0, day0)
    for v in values:
        stamp = epoch + datetime.timedelta(seconds=float(v) * _UNIT_SECONDS[unit])
        out.append((stamp.year, stamp.month))
    return out


def unpack_values(var: NcVariable) -> np.ndarray:
    """Apply fill-value masking and scale/offset; returns float64 with NaNs."""
    vals = np.asarray(var.values, dtype=np.float64)
    mask = np.zeros(vals.shape, dtype=bool)
    for key in ("_FillValue", "missing_value"):
        fill = var.attrs.get(key)
        if fill is not None:
            fillv = float(np.asarray(fill).ravel()[0])
            mask |= vals == fillv
            # float32 fill values often round-trip inexactly
            mask |= np.isclose(vals, fillv, rtol=1e-6, atol=0.0)
    scale = var.attrs.get("scale_factor")
    offset = var.attrs.get("add_offset")
    if scale is not None:
        vals = vals * float(np.asarray(scale).ravel()[0])
    if offset is not None:
        vals = vals + float(np.asarray(offset).ravel()[0])
    vals[mask] = np.nan
    return vals


def require_units(var: NcVariable) -> str:
    units = var.attr("units")
    if units is None or str(units).strip() == "":
        raise UnitsUnknown(f"variable {var.name!r} carries no units attribute; "
                           "refusing to guess")
    return str(units)


def grid_axes_order(var: NcVariable, n_time: int, n_lat: int,
                    n_lon: int) -> tuple[int, int, int, list[int]]:
    """Locate the (time, lat, lon) axes of a data variable.

    Uses dimension names when the file provides them; otherwise assumes the
    conventional order time, [singletons...], lat, lon. Extra axes must have
    length 1 (single-level fields only). Returns (t_axis, lat_axis, lon_axis,
    squeeze_axes).
    """
    shape = var.values.shape
    if var.dims and len(var.dims) == len(shape):
        names = [d.lower() for d in var.dims]
        def find(*cands, size=None):
            for i, n in enumerate(names):
                if n in cands:
                    return i
            if size is not None:
                for i, s in enumerate(shape):
                    if s == size:
                        return i
            raise MissingVariable(f"cannot locate axis {cands} in {var.dims}")
        t_ax = find("time", size=n_time)
        lat_ax = find("lat", "latitude", "y", size=n_lat)
        lon_ax = find("lon", "longitude", "x", size=n_lon)
    else:
        if len(shape) < 3:
            raise MissingVariable(
                f"variable {var.name!r} is not on (time, lat, lon) dimensions")
        t_ax, lat_ax, lon_ax = 0, len(shape) - 2, len(shape) - 1
    squeeze = [i for i in range(len(shape)) if i not in (t_ax, lat_ax, lon_ax)]
    for i in squeeze:
        if shape[i] != 1:
            raise MissingVariable(
                f"variable {var.name!r} has extra non-singleton axis "
                f"(shape {shape}); single-level fields only")
    if shape[t_ax] != n_time or shape[lat_ax] != n_lat or shape[lon_ax] != n_lon:
        raise MissingVariable(
            f"variable {var.name!r} shape {shape} does not match coordinate "
            f"lengths (time {n_time}, lat {n_lat}, lon {n_lon})")
    return t_ax, lat_ax, lon_ax, squeeze

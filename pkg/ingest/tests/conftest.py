"""Builders for ERSST-like NetCDF fixtures (classic NetCDF-3 and HDF5)."""

import datetime

import numpy as np
import pytest

EPOCH = datetime.datetime(1800, 1, 1)


def month_value(year, month, lat, lon):
    """Deterministic fake SST in degC for a cell, smooth in space and time."""
    t = (year - 2000) * 12 + (month - 1)
    return (20.0
            + 6.0 * np.cos(np.radians(lat))
            + 1.5 * np.sin(2 * np.pi * month / 12.0)
            + 0.8 * np.sin(np.radians(lon))
            + 0.01 * np.sin(t * 0.7))


def month_range(start, n):
    y, m = start
    out = []
    for _ in range(n):
        out.append((y, m))
        m += 1
        if m == 13:
            y, m = y + 1, 1
    return out


def days_since_epoch(year, month):
    return float((datetime.datetime(year, month, 15) - EPOCH).days)


def build_fields(months, lats, lons, land_mask=None):
    lat_g, lon_g = np.meshgrid(lats, lons, indexing="ij")
    fields = np.empty((len(months), len(lats), len(lons)), dtype=np.float32)
    for i, (y, m) in enumerate(months):
        fields[i] = month_value(y, m, lat_g, lon_g).astype(np.float32)
    if land_mask is not None:
        fields[:, land_mask] = np.float32(-9.96921e36)
    return fields


def write_ersst_nc3(path, months, lats=None, lons=None, var_name="sst",
                    units="degC", land_mask=None, extra_lev=False,
                    time_units="days since 1800-01-01 00:00:00"):
    """Classic NetCDF-3 file in the ERSST v5 layout (0..358E longitudes)."""
    from scipy.io import netcdf_file

    if lats is None:
        lats = np.arange(-88.0, 89.0, 2.0, dtype=np.float32)
    if lons is None:
        lons = np.arange(0.0, 359.0, 2.0, dtype=np.float32)
    fields = build_fields(months, lats, lons, land_mask)
    with netcdf_file(str(path), "w") as nc:
        nc.createDimension("time", len(months))
        nc.createDimension("lat", len(lats))
        nc.createDimension("lon", len(lons))
        vt = nc.createVariable("time", "d", ("time",))
        vt[:] = [days_since_epoch(y, m) for y, m in months]
        vt.units = time_units.encode()
        vlat = nc.createVariable("lat", "f", ("lat",))
        vlat[:] = lats
        vlat.units = b"degrees_north"
        vlon = nc.createVariable("lon", "f", ("lon",))
        vlon[:] = lons
        vlon.units = b"degrees_east"
        if extra_lev:
            nc.createDimension("lev", 1)
            vv = nc.createVariable(var_name, "f", ("time", "lev", "lat", "lon"))
            vv[:] = fields[:, None]
        else:
            vv = nc.createVariable(var_name, "f", ("time", "lat", "lon"))
            vv[:] = fields
        if units is not None:
            vv.units = units.encode()
        vv._FillValue = np.float32(-9.96921e36)
    return np.asarray(lats), np.asarray(lons), fields


def write_ersst_hdf5(path, months, lats=None, lons=None, var_name="sst",
                     units="degC", land_mask=None, packed=False,
                     dimension_scales=True):
    """NetCDF-4-style HDF5 file; optionally int16-packed with scale/offset."""
    import h5py

    if lats is None:
        lats = np.arange(-88.0, 89.0, 2.0, dtype=np.float32)
    if lons is None:
        lons = np.arange(0.0, 359.0, 2.0, dtype=np.float32)
    fields = build_fields(months, lats, lons, land_mask)
    with h5py.File(str(path), "w") as f:
        dt = f.create_dataset("time", data=[days_since_epoch(y, m)
                                            for y, m in months])
        dt.attrs["units"] = "days since 1800-01-01 00:00:00"
        dlat = f.create_dataset("lat", data=lats)
        dlon = f.create_dataset("lon", data=lons)
        if packed:
            scale, offset = 0.01, 20.0
            fill = np.int16(32767)
            packed_vals = np.round((fields - offset) / scale).astype(np.int16)
            if land_mask is not None:
                packed_vals[:, land_mask] = fill
            dv = f.create_dataset(var_name, data=packed_vals)
            dv.attrs["scale_factor"] = np.float64(scale)
            dv.attrs["add_offset"] = np.float64(offset)
            dv.attrs["_FillValue"] = fill
        else:
            dv = f.create_dataset(var_name, data=fields)
            dv.attrs["_FillValue"] = np.float32(-9.96921e36)
        if units is not None:
            dv.attrs["units"] = units
        if dimension_scales:
            dt.make_scale("time")
            dlat.make_scale("lat")
            dlon.make_scale("lon")
            dv.dims[0].attach_scale(dt)
            dv.dims[1].attach_scale(dlat)
            dv.dims[2].attach_scale(dlon)
    return np.asarray(lats), np.asarray(lons), fields


@pytest.fixture(scope="session")
def ersst_file(tmp_path_factory):
    """Global 2-degree monthly file covering 1999-01..2024-06 (306 months)."""
    path = tmp_path_factory.mktemp("nc") / "ersst.v5.nc"
    months = month_range((1999, 1), 306)
    # plant some land cells well outside the index region
    lats = np.arange(-88.0, 89.0, 2.0, dtype=np.float32)
    lons = np.arange(0.0, 359.0, 2.0, dtype=np.float32)
    land = np.zeros((len(lats), len(lons)), dtype=bool)
    land[:10, :10] = True
    write_ersst_nc3(path, months, lats=lats, lons=lons, land_mask=land)
    return path

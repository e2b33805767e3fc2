import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nino.errors import (
    AllMissing,
    EmptyRegion,
    FormatError,
    GapInTime,
    InconsistentAxes,
    NoOverlap,
)
from nino.grid import (
    NINO34,
    GeoBounds,
    GridAxes,
    SpatioTemporalGrid,
    TimeStamp,
    Variable,
    align,
    extract_region,
    read_grid_csv,
    regional_mean,
    write_grid_csv,
)


def make_grid(lats, lons, values, start=TimeStamp(2000, 1), variable=Variable.SST):
    return SpatioTemporalGrid(variable, GridAxes(tuple(lats), tuple(lons)),
                              start, np.asarray(values, dtype=float))


def global_2deg_axes():
    # even-degree 2-degree grid, like ERSST
    lats = tuple(range(-88, 90, 2))
    lons = tuple(range(-180, 180, 2))
    return GridAxes(lats, lons)


class TestTimeStamp:
    def test_ordering_and_successor(self):
        assert TimeStamp(1999, 12) < TimeStamp(2000, 1)
        assert TimeStamp(2000, 12).successor() == TimeStamp(2001, 1)
        assert TimeStamp(2000, 1).plus(24) == TimeStamp(2002, 1)

    def test_month_range_validated(self):
        with pytest.raises(ValueError):
            TimeStamp(2000, 13)
        with pytest.raises(ValueError):
            TimeStamp(2000, 0)

    def test_parse_format_roundtrip(self):
        t = TimeStamp.parse("2023-09")
        assert t == TimeStamp(2023, 9)
        assert str(t) == "2023-09"

    def test_months_until(self):
        assert TimeStamp(2000, 1).months_until(TimeStamp(2023, 9)) == 284


class TestGeoBounds:
    def test_lon_normalization(self):
        # 120W-170W expressed as 190..240 east
        b = GeoBounds(-5, 5, 190, 240)
        assert b.lon_min == -170.0
        assert b.lon_max == -120.0

    def test_nino34_constant(self):
        assert NINO34.lat_min == -5 and NINO34.lat_max == 5
        assert NINO34.lon_min == -170 and NINO34.lon_max == -120

    def test_rejects_inverted(self):
        with pytest.raises(ValueError):
            GeoBounds(5, -5, 0, 10)
        with pytest.raises(ValueError):
            GeoBounds(0, 1, 170, 190)  # crosses the antimeridian


class TestGridAxes:
    def test_rejects_descending(self):
        with pytest.raises(ValueError):
            GridAxes((2.0, 1.0), (0.0, 1.0))

    def test_rejects_nonuniform(self):
        with pytest.raises(ValueError):
            GridAxes((0.0, 1.0, 3.0), (0.0, 1.0))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            GridAxes((), (0.0,))


class TestExtractRegion:
    def test_nino34_on_global_2deg(self):
        axes = global_2deg_axes()
        grid = SpatioTemporalGrid(Variable.SST, axes, TimeStamp(2000, 1),
                                  np.zeros((2,) + axes.shape))
        sub = extract_region(grid, NINO34)
        # even lats in [-5, 5]
        assert sub.axes.lats == (-4.0, -2.0, 0.0, 2.0, 4.0)
        assert sub.axes.lons == tuple(float(x) for x in range(-170, -119, 2))
        assert sub.n_months == grid.n_months

    def test_own_bounding_box_is_identity(self):
        grid = make_grid([0, 2], [10, 12], np.arange(8).reshape(2, 2, 2))
        assert extract_region(grid, grid.axes.bounding_box()) == grid

    def test_empty_region(self):
        grid = make_grid([86, 88], [0, 2], np.zeros((1, 2, 2)))
        with pytest.raises(EmptyRegion):
            extract_region(grid, GeoBounds(89, 90, 0, 1))

    def test_idempotent(self):
        axes = global_2deg_axes()
        rng = np.random.default_rng(0)
        grid = SpatioTemporalGrid(Variable.SST, axes, TimeStamp(2000, 1),
                                  rng.normal(20, 5, (3,) + axes.shape))
        once = extract_region(grid, NINO34)
        twice = extract_region(once, NINO34)
        assert once == twice


class TestRegionalMean:
    def test_constant_field(self):
        grid = make_grid([0, 2], [0, 2], np.full((1, 2, 2), 27.0))
        assert regional_mean(grid, TimeStamp(2000, 1)) == 27.0

    def test_simple_mean(self):
        grid = make_grid([0, 2], [0, 2], [[[1.0, 2.0], [3.0, 4.0]]])
        assert regional_mean(grid, TimeStamp(2000, 1)) == 2.5

    def test_skips_missing(self):
        grid = make_grid([0, 2], [0, 2], [[[1.0, np.nan], [3.0, np.nan]]])
        assert regional_mean(grid, TimeStamp(2000, 1)) == 2.0

    def test_all_missing(self):
        grid = make_grid([0, 2], [0, 2], np.full((1, 2, 2), np.nan))
        with pytest.raises(AllMissing):
            regional_mean(grid, TimeStamp(2000, 1))

    def test_outside_range(self):
        grid = make_grid([0], [0], np.zeros((1, 1, 1)))
        with pytest.raises(ValueError):
            regional_mean(grid, TimeStamp(2001, 1))

    def test_within_min_max_and_permutation_invariant(self):
        rng = np.random.default_rng(1)
        vals = rng.normal(25, 3, (1, 4, 5))
        grid = make_grid(range(0, 8, 2), range(0, 10, 2), vals)
        m = regional_mean(grid, TimeStamp(2000, 1))
        assert vals.min() <= m <= vals.max()
        # permuting cells leaves the mean unchanged
        flat = vals[0].ravel()
        perm = rng.permutation(flat.size)
        grid2 = make_grid(range(0, 8, 2), range(0, 10, 2),
                          flat[perm].reshape(1, 4, 5))
        assert regional_mean(grid2, TimeStamp(2000, 1)) == pytest.approx(m, abs=1e-12)


class TestCsvRoundTrip:
    def test_roundtrip(self, tmp_path):
        vals = np.arange(12, dtype=float).reshape(3, 2, 2)
        grid = make_grid([0, 2], [10, 12], vals)
        path = tmp_path / "g.csv"
        write_grid_csv(grid, path)
        assert read_grid_csv(path) == grid

    def test_missing_row_becomes_nan(self, tmp_path):
        grid = make_grid([0, 2], [10, 12], np.ones((2, 2, 2)))
        path = tmp_path / "g.csv"
        write_grid_csv(grid, path)
        lines = path.read_text().splitlines()
        del lines[3]  # drop one data row
        path.write_text("\n".join(lines) + "\n")
        got = read_grid_csv(path)
        assert np.isnan(got.values).sum() == 1

    def test_gap_in_time(self, tmp_path):
        path = tmp_path / "g.csv"
        rows = ["variable,units,lat,lon,time,value"]
        for t in ("2000-01", "2000-03"):
            rows.append(f"SST,degC,0.0,0.0,{t},1.0")
        path.write_text("\n".join(rows) + "\n")
        with pytest.raises(GapInTime):
            read_grid_csv(path)

    def test_duplicate_row(self, tmp_path):
        path = tmp_path / "g.csv"
        rows = ["variable,units,lat,lon,time,value",
                "SST,degC,0.0,0.0,2000-01,1.0",
                "SST,degC,0.0,0.0,2000-01,2.0"]
        path.write_text("\n".join(rows) + "\n")
        with pytest.raises(FormatError) as err:
            read_grid_csv(path)
        assert err.value.line == 3

    def test_bad_header(self, tmp_path):
        path = tmp_path / "g.csv"
        path.write_text("lat,lon,time,value\n")
        with pytest.raises(FormatError):
            read_grid_csv(path)

    def test_bad_value(self, tmp_path):
        path = tmp_path / "g.csv"
        path.write_text("variable,units,lat,lon,time,value\n"
                        "SST,degC,0.0,0.0,2000-01,abc\n")
        with pytest.raises(FormatError) as err:
            read_grid_csv(path)
        assert err.value.line == 2

    def test_non_rectangular_pairs(self, tmp_path):
        path = tmp_path / "g.csv"
        rows = ["variable,units,lat,lon,time,value",
                "SST,degC,0.0,10.0,2000-01,1.0",
                "SST,degC,2.0,20.0,2000-01,1.0"]
        path.write_text("\n".join(rows) + "\n")
        with pytest.raises(InconsistentAxes):
            read_grid_csv(path)

    def test_empty_value_reads_as_missing(self, tmp_path):
        vals = np.array([[[1.0, np.nan], [3.0, 4.0]]])
        grid = make_grid([0, 2], [10, 12], vals)
        path = tmp_path / "g.csv"
        write_grid_csv(grid, path)
        got = read_grid_csv(path)
        assert math.isnan(got.values[0, 0, 1])
        assert got == grid

    def test_rows_in_any_order(self, tmp_path):
        grid = make_grid([0, 2], [10, 12], np.arange(8, dtype=float).reshape(2, 2, 2))
        path = tmp_path / "g.csv"
        write_grid_csv(grid, path)
        lines = path.read_text().splitlines()
        body = lines[1:]
        body.reverse()
        path.write_text("\n".join([lines[0]] + body) + "\n")
        assert read_grid_csv(path) == grid

    @settings(max_examples=25, deadline=None)
    @given(
        n_t=st.integers(1, 4),
        n_lat=st.integers(1, 4),
        n_lon=st.integers(1, 4),
        seed=st.integers(0, 2**32 - 1),
        start=st.integers(1990 * 12, 2020 * 12),
    )
    def test_roundtrip_property(self, tmp_path_factory, n_t, n_lat, n_lon, seed, start):
        rng = np.random.default_rng(seed)
        vals = rng.normal(20, 8, (n_t, n_lat, n_lon))
        vals[rng.random(vals.shape) < 0.2] = np.nan
        grid = SpatioTemporalGrid(
            Variable.SST,
            GridAxes(tuple(np.arange(n_lat) * 2.0 - 4.0),
                     tuple(np.arange(n_lon) * 2.0 + 10.0)),
            TimeStamp.from_index(start),
            vals,
        )
        path = tmp_path_factory.mktemp("rt") / "g.csv"
        write_grid_csv(grid, path)
        assert read_grid_csv(path) == grid


class TestAlign:
    def test_time_intersection(self):
        a = make_grid([0], [0], np.zeros((72, 1, 1)), start=TimeStamp(2000, 1))
        b = make_grid([0], [0], np.zeros((96, 1, 1)), start=TimeStamp(2003, 1),
                      variable=Variable.OHC)
        out_a, out_b = align(a, b)
        assert out_a.start == TimeStamp(2003, 1)
        assert out_a.end == TimeStamp(2005, 12)
        assert out_b.start == out_a.start and out_b.end == out_a.end

    def test_identity_on_identical(self):
        vals = np.arange(8, dtype=float).reshape(2, 2, 2)
        a = make_grid([0, 2], [10, 12], vals)
        b = make_grid([0, 2], [10, 12], vals)
        out_a, out_b = align(a, b)
        assert out_a == a and out_b == b

    def test_disjoint_times(self):
        a = make_grid([0], [0], np.zeros((12, 1, 1)), start=TimeStamp(2000, 1))
        b = make_grid([0], [0], np.zeros((12, 1, 1)), start=TimeStamp(2005, 1))
        with pytest.raises(NoOverlap):
            align(a, b)

    def test_coarser_shared_cells(self):
        # OHC on a 1-degree axis vs SST on an even 2-degree axis
        fine_lats = tuple(float(v) for v in range(-5, 6))
        fine_lons = tuple(float(v) for v in range(-170, -119))
        coarse_lats = (-4.0, -2.0, 0.0, 2.0, 4.0)
        coarse_lons = tuple(float(v) for v in range(-170, -119, 2))
        rng = np.random.default_rng(7)
        ohc_vals = rng.normal(size=(3, len(fine_lats), len(fine_lons)))
        sst_vals = rng.normal(size=(3, len(coarse_lats), len(coarse_lons)))
        ohc = SpatioTemporalGrid(Variable.OHC, GridAxes(fine_lats, fine_lons),
                                 TimeStamp(2000, 1), ohc_vals)
        sst = SpatioTemporalGrid(Variable.SST, GridAxes(coarse_lats, coarse_lons),
                                 TimeStamp(2000, 1), sst_vals)
        out_sst, out_ohc = align(sst, ohc)
        assert out_sst.axes.lats == coarse_lats
        assert out_sst.axes.lons == coarse_lons
        assert out_ohc.axes == out_sst.axes
        # nearest-neighbor oracle: exact picks from the fine grid
        for li, lat in enumerate(coarse_lats):
            for lj, lon in enumerate(coarse_lons):
                src_i = fine_lats.index(lat)
                src_j = fine_lons.index(lon)
                assert out_ohc.values[1, li, lj] == ohc_vals[1, src_i, src_j]
        assert np.array_equal(out_sst.values, sst_vals)


class TestGridInvariants:
    def test_shape_consistency_enforced(self):
        with pytest.raises(ValueError):
            make_grid([0, 2], [0, 2], np.zeros((1, 2, 3)))

    def test_values_read_only(self):
        grid = make_grid([0], [0], np.zeros((1, 1, 1)))
        with pytest.raises(ValueError):
            grid.values[0, 0, 0] = 1.0

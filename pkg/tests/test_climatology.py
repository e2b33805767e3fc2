import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nino.climatology import (
    AnomalySeries,
    ClimatologyTable,
    QuarterMatrix,
    centered_base_period,
    classify_event,
    compute_climatology,
    default_base_period,
    oni,
    quarter_matrix,
    read_quarter_csv,
    regional_anomaly,
    regional_anomaly_centered,
    write_quarter_csv,
)
from nino.errors import AxesMismatch, EmptyRegion, InsufficientData, TooShort
from nino.grid import GeoBounds, GridAxes, SpatioTemporalGrid, TimeStamp, Variable

AXES = GridAxes((0.0, 2.0), (10.0, 12.0))


def monthly_grid(n_months, fill, start=TimeStamp(2000, 1), axes=AXES):
    """Grid whose field at step i is fill(i) (scalar or 2D)."""
    shape = axes.shape
    vals = np.empty((n_months,) + shape)
    for i in range(n_months):
        vals[i] = fill(i)
    return SpatioTemporalGrid(Variable.SST, axes, start, vals)


class TestComputeClimatology:
    def test_constant_month(self):
        # every January 25.0, other months vary
        grid = monthly_grid(36, lambda i: 25.0 if i % 12 == 0 else 10.0 + i)
        clim = compute_climatology(grid)
        assert np.all(clim.month_field(1) == 25.0)

    def test_two_year_mean(self):
        grid = monthly_grid(24, lambda i: 24.0 if i == 0 else (26.0 if i == 12 else 0.0))
        clim = compute_climatology(grid)
        assert np.all(clim.month_field(1) == 25.0)

    def test_single_year_identity(self):
        rng = np.random.default_rng(3)
        vals = rng.normal(20, 5, (12, 2, 2))
        grid = SpatioTemporalGrid(Variable.SST, AXES, TimeStamp(2005, 1), vals)
        clim = compute_climatology(grid, (TimeStamp(2005, 1), TimeStamp(2005, 12)))
        for m in range(1, 13):
            assert np.array_equal(clim.month_field(m), vals[m - 1])

    def test_missing_cells_skipped(self):
        vals = np.full((24, 2, 2), 20.0)
        vals[0, 0, 0] = np.nan  # first January missing at one cell
        vals[12, 0, 0] = 30.0
        grid = SpatioTemporalGrid(Variable.SST, AXES, TimeStamp(2000, 1), vals)
        clim = compute_climatology(grid)
        assert clim.month_field(1)[0, 0] == 30.0
        assert clim.month_field(1)[0, 1] == 20.0

    def test_month_without_samples(self):
        grid = monthly_grid(36, lambda i: 20.0)
        with pytest.raises(InsufficientData):
            compute_climatology(grid, (TimeStamp(2000, 1), TimeStamp(2000, 6)))

    def test_base_period_outside_range(self):
        grid = monthly_grid(24, lambda i: 20.0)
        with pytest.raises(InsufficientData):
            compute_climatology(grid, (TimeStamp(1990, 1), TimeStamp(2019, 12)))

    def test_default_base_period_trims_partial_years(self):
        grid = monthly_grid(26, lambda i: 20.0, start=TimeStamp(1999, 12))
        assert default_base_period(grid) == (TimeStamp(2000, 1), TimeStamp(2001, 12))


class TestRegionalAnomaly:
    BOUNDS = GeoBounds(-90, 90, -180, 179)

    def test_zero_when_equal_to_climatology(self):
        grid = monthly_grid(36, lambda i: 15.0 + (i % 12))
        clim = compute_climatology(grid)
        a = regional_anomaly(grid, clim, self.BOUNDS)
        assert np.allclose(a.values, 0.0, atol=1e-12)

    def test_constant_offset(self):
        grid = monthly_grid(36, lambda i: 15.0 + (i % 12))
        clim = compute_climatology(grid)
        shifted = monthly_grid(36, lambda i: 16.0 + (i % 12))
        a = regional_anomaly(shifted, clim, self.BOUNDS)
        assert np.allclose(a.values, 1.0, atol=1e-12)

    def test_half_region_offset(self):
        base = monthly_grid(12, lambda i: 20.0)
        clim = compute_climatology(base, (TimeStamp(2000, 1), TimeStamp(2000, 12)))
        bump = np.full((2, 2), 20.0)
        bump[0, :] = 22.0  # half the cells at +2, half at +0
        grid = monthly_grid(12, lambda i: bump)
        a = regional_anomaly(grid, clim, self.BOUNDS)
        assert np.allclose(a.values, 1.0, atol=1e-12)

    def test_axes_mismatch(self):
        grid = monthly_grid(12, lambda i: 20.0)
        other = GridAxes((0.0, 2.0, 4.0), (10.0, 12.0))
        clim = ClimatologyTable(other, (TimeStamp(2000, 1), TimeStamp(2000, 12)),
                                np.zeros((12, 3, 2)))
        with pytest.raises(AxesMismatch):
            regional_anomaly(grid, clim, self.BOUNDS)

    def test_empty_region(self):
        grid = monthly_grid(12, lambda i: 20.0)
        clim = compute_climatology(grid, (TimeStamp(2000, 1), TimeStamp(2000, 12)))
        with pytest.raises(EmptyRegion):
            regional_anomaly(grid, clim, GeoBounds(50, 60, 0, 5))

    def test_shift_invariance(self):
        rng = np.random.default_rng(11)
        vals = rng.normal(24, 2, (60, 2, 2))
        grid = SpatioTemporalGrid(Variable.SST, AXES, TimeStamp(2000, 1), vals)
        shifted = SpatioTemporalGrid(Variable.SST, AXES, TimeStamp(2000, 1),
                                     vals + 3.7)
        a0 = regional_anomaly(grid, compute_climatology(grid), self.BOUNDS)
        a1 = regional_anomaly(shifted, compute_climatology(shifted), self.BOUNDS)
        assert np.allclose(a0.values, a1.values, atol=1e-9)


class TestCenteredClimatology:
    def test_window_years(self):
        p0, p1 = centered_base_period(2000)
        assert p0 == TimeStamp(1985, 1)
        assert p1 == TimeStamp(2014, 12)

    def test_errors_on_short_coverage(self):
        grid = monthly_grid(285, lambda i: 20.0)  # 2000-01..2023-09
        with pytest.raises(InsufficientData):
            regional_anomaly_centered(grid, GeoBounds(-90, 90, -180, 179))

    def test_matches_fixed_base_on_long_constant_cycle(self):
        # seasonal cycle identical every year: centered and fixed-base agree
        grid = monthly_grid(12 * 40, lambda i: 10.0 + (i % 12), start=TimeStamp(1980, 1))
        bounds = GeoBounds(-90, 90, -180, 179)
        series = regional_anomaly_centered(
            grid, bounds, period=(TimeStamp(1995, 1), TimeStamp(1996, 12)))
        # climatology of a constant cycle equals the cycle: anomalies vanish
        assert len(series) == 24
        assert np.allclose(series.values, 0.0, atol=1e-12)


class TestOni:
    def test_constant(self):
        a = AnomalySeries(TimeStamp(2000, 1), (1.0,) * 10)
        out = oni(a)
        assert out.values == (1.0,) * 8
        assert out.start == TimeStamp(2000, 3)

    def test_simple_window(self):
        out = oni(AnomalySeries(TimeStamp(2000, 1), (0.3, 0.6, 0.9)))
        assert out.values == pytest.approx((0.6,))

    def test_two_windows(self):
        out = oni(AnomalySeries(TimeStamp(2000, 1), (0.0, 0.0, 0.0, 3.0)))
        assert out.values == pytest.approx((0.0, 1.0))

    def test_too_short(self):
        with pytest.raises(TooShort):
            oni(AnomalySeries(TimeStamp(2000, 1), (0.1, 0.2)))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-3, 3), min_size=3, max_size=30),
           st.floats(-2, 2), st.floats(-2, 2))
    def test_linearity(self, vals, alpha, beta):
        a = AnomalySeries(TimeStamp(2000, 1), vals)
        b = AnomalySeries(TimeStamp(2000, 1), [v * 0.5 + 0.1 for v in vals])
        combo = AnomalySeries(
            TimeStamp(2000, 1),
            [alpha * x + beta * y for x, y in zip(a.values, b.values)])
        lhs = oni(combo).values
        rhs = [alpha * x + beta * y for x, y in zip(oni(a).values, oni(b).values)]
        assert np.allclose(lhs, rhs, atol=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-3, 3), min_size=3, max_size=30))
    def test_within_contributors(self, vals):
        out = oni(AnomalySeries(TimeStamp(2000, 1), vals))
        for i, v in enumerate(out.values):
            window = vals[i:i + 3]
            assert min(window) - 1e-12 <= v <= max(window) + 1e-12


class TestQuarterMatrix:
    def test_constant(self):
        a = AnomalySeries(TimeStamp(2000, 1), (0.7,) * 10)
        qm = quarter_matrix(a, 4)
        assert np.allclose(qm.quarters, 0.7)

    def test_ramp_first_row(self):
        a = AnomalySeries(TimeStamp(2000, 1), tuple(0.1 * i for i in range(8)))
        qm = quarter_matrix(a, 2)
        assert np.allclose(qm.quarters[0], [0.1, 0.2, 0.3, 0.4, 0.5])

    def test_row_span_rule(self):
        a = AnomalySeries(TimeStamp(2000, 1), (0.0,) * 57)
        with pytest.raises(TooShort):
            quarter_matrix(a, 52)
        qm = quarter_matrix(AnomalySeries(TimeStamp(2000, 1), (0.0,) * 58), 52)
        assert qm.n_steps == 52

    def test_row0_matches_oni(self):
        rng = np.random.default_rng(5)
        vals = tuple(rng.normal(0, 1, 20))
        a = AnomalySeries(TimeStamp(2000, 1), vals)
        qm = quarter_matrix(a, 10)
        oni_vals = oni(a).values
        for i in range(5):
            assert qm.quarters[0, i] == pytest.approx(oni_vals[i], abs=1e-12)

    def test_csv_roundtrip(self, tmp_path):
        rng = np.random.default_rng(9)
        qm = QuarterMatrix(6, rng.normal(size=(6, 5)), TimeStamp(2018, 11))
        path = tmp_path / "q.csv"
        write_quarter_csv(qm, path)
        got = read_quarter_csv(path)
        assert got.start == qm.start
        assert np.array_equal(got.quarters, qm.quarters)


class TestClassifyEvent:
    def test_all_above(self):
        assert classify_event([0.6, 0.7, 0.8, 0.9, 1.0], 0.5) is True

    def test_one_below(self):
        assert classify_event([0.6, 0.4, 0.8, 0.9, 1.0], 0.5) is False

    def test_boundary_inclusive(self):
        assert classify_event([0.5] * 5, 0.5) is True

    def test_threshold_validation(self):
        with pytest.raises(ValueError):
            classify_event([1.0] * 5, 0.0)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(-1, 2), min_size=5, max_size=5),
           st.integers(0, 4), st.floats(0.0, 1.5))
    def test_monotone_in_quarters(self, q, idx, bump):
        before = classify_event(q, 0.5)
        raised = list(q)
        raised[idx] += bump
        after = classify_event(raised, 0.5)
        assert not (before and not after)

"""Validator for the canonical grid CSV contract.

Checks the same rules the toolkit's reader enforces (header, field count,
parseable values, no duplicates, rectangular (lat, lon) tiling, consecutive
months) and reports coverage statistics. Out-of-range values are warnings,
not violations: SST outside [-5, 45] degC is flagged but does not fail.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

from .convert import format_month, parse_month

_HEADER = ["variable", "units", "lat", "lon", "time", "value"]

SST_RANGE = (-5.0, 45.0)


@dataclass
class ValidationReport:
    path: str
    rows: int = 0
    coverage: tuple[str, str] | None = None
    missing_fraction: float = 0.0
    value_range: tuple[float, float] | None = None
    violations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        lines = [f"file: {self.path}",
                 f"rows: {self.rows}"]
        if self.coverage:
            lines.append(f"coverage: {self.coverage[0]}..{self.coverage[1]}")
        lines.append(f"missing cells: {self.missing_fraction:.2%}")
        if self.value_range:
            lines.append(f"value range: [{self.value_range[0]:g}, "
                         f"{self.value_range[1]:g}]")
        for w in self.warnings:
            lines.append(f"warning: {w}")
        for v in self.violations:
            lines.append(f"VIOLATION: {v}")
        lines.append("status: " + ("OK" if self.ok else "FAILED"))
        return "\n".join(lines)


def validate(path) -> ValidationReport:
    """Check a grid CSV against the contract; never raises on bad content."""
    report = ValidationReport(path=str(path))
    rows: dict[tuple[int, float, float], float | None] = {}
    variable = None
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        report.violations.append(str(exc))
        return report
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _HEADER:
            report.violations.append(f"line 1: bad header {header!r}")
            return report
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 6:
                report.violations.append(
                    f"line {lineno}: expected 6 fields, got {len(row)}")
                continue
            vname, _units, lat_s, lon_s, time_s, val_s = row
            if variable is None:
                variable = vname
            elif vname != variable:
                report.violations.append(
                    f"line {lineno}: mixed variables {variable!r} and {vname!r}")
            try:
                lat, lon = float(lat_s), float(lon_s)
                t = parse_month(time_s)
                value = None if val_s == "" else float(val_s)
            except ValueError as exc:
                report.violations.append(f"line {lineno}: {exc}")
                continue
            key = (t[0] * 12 + t[1] - 1, lat, lon)
            if key in rows:
                report.violations.append(
                    f"line {lineno}: duplicate row for ({time_s}, {lat_s}, {lon_s})")
                continue
            rows[key] = value
            report.rows += 1

    if not rows:
        report.violations.append("no data rows")
        return report

    t_indices = sorted({k[0] for k in rows})
    lats = sorted({k[1] for k in rows})
    lons = sorted({k[2] for k in rows})
    report.coverage = (format_month(t_indices[0]), format_month(t_indices[-1]))

    pairs = {(k[1], k[2]) for k in rows}
    if len(pairs) != len(lats) * len(lons):
        report.violations.append(
            "observed (lat, lon) pairs do not tile a rectangle")
    for a, b in zip(t_indices, t_indices[1:]):
        if b != a + 1:
            report.violations.append(
                f"gap in time: {format_month(a)} then {format_month(b)}")
            break

    expected_cells = len(t_indices) * len(lats) * len(lons)
    present = [v for v in rows.values() if v is not None]
    report.missing_fraction = 1.0 - len(present) / expected_cells
    if present:
        report.value_range = (min(present), max(present))
        if variable == "SST":
            lo, hi = SST_RANGE
            bad = sum(1 for v in present if not lo <= v <= hi)
            if bad:
                report.warnings.append(
                    f"{bad} SST value(s) outside [{lo}, {hi}] degC")
    return report

"""CLI: `ingest convert ...` and `ingest validate <csv>`."""

from __future__ import annotations

import argparse
import sys

from .convert import IngestJob, convert
from .errors import (
    BadTimeAxis,
    DuplicateMonth,
    MissingVariable,
    PeriodNotCovered,
    UnitsUnknown,
)
from .validate import validate

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_NOT_FOUND = 3
EXIT_MISSING_VAR = 4
EXIT_UNITS = 5
EXIT_PERIOD = 6
EXIT_VIOLATION = 7

_CODES = (
    (FileNotFoundError, EXIT_NOT_FOUND),
    (MissingVariable, EXIT_MISSING_VAR),
    (UnitsUnknown, EXIT_UNITS),
    ((PeriodNotCovered, DuplicateMonth), EXIT_PERIOD),
    ((BadTimeAxis, ValueError), EXIT_USAGE),
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ingest",
        description="Convert NetCDF ocean archives to the canonical grid CSV")
    sub = parser.add_subparsers(dest="command", required=True)

    conv = sub.add_parser("convert", help="NetCDF -> grid CSV")
    conv.add_argument("--input", nargs="+", required=True, help="NetCDF file(s)")
    conv.add_argument("--var", required=True, help="variable name in the file")
    conv.add_argument("--bounds", required=True,
                      help="latmin,latmax,lonmin,lonmax")
    conv.add_argument("--period", required=True, help="YYYY-MM:YYYY-MM inclusive")
    conv.add_argument("--out", required=True, help="output CSV path")
    conv.add_argument("--label", choices=("SST", "OHC"),
                      help="output variable label (inferred from --var if omitted)")

    val = sub.add_parser("validate", help="check a grid CSV against the contract")
    val.add_argument("csv", help="grid CSV path")
    return parser


def cmd_convert(args) -> int:
    bounds = tuple(float(v) for v in args.bounds.split(","))
    if len(bounds) != 4:
        raise ValueError("--bounds needs latmin,latmax,lonmin,lonmax")
    p0, _, p1 = args.period.partition(":")
    if not p1:
        raise ValueError("--period needs YYYY-MM:YYYY-MM")
    job = IngestJob(inputs=tuple(args.input), variable=args.var, bounds=bounds,
                    period=(p0, p1), out_path=args.out, label=args.label)
    for path in job.inputs:
        with open(path, "rb"):
            pass
    convert(job)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    report = validate(args.csv)
    print(report.summary())
    return EXIT_OK if report.ok else EXIT_VIOLATION


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "convert":
            return cmd_convert(args)
        return cmd_validate(args)
    except Exception as exc:  # noqa: BLE001 - single exit-code funnel
        for types, code in _CODES:
            if isinstance(exc, types):
                print(f"error: {exc}", file=sys.stderr)
                return code
        raise


if __name__ == "__main__":
    sys.exit(main())

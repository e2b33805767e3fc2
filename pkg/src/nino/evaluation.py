"""Event-classification verification: observed/forecast quarter blending for
configurations 0-5, confusion matrices, and accuracy reporting.

Configuration k fills each row's first 5-k quarters from the observed matrix
and the last k from the forecast matrix, so k=0 is the observed-only baseline
and k=5 is forecast-only. Display accuracy rounds half-up to two decimals;
comparisons always use the raw value.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .climatology import DEFAULT_THRESHOLD, QuarterMatrix, classify_event
from .errors import BadK, EmptyMatrix, ShapeMismatch


@dataclass(frozen=True)
class ForecastConfiguration:
    """k forecasted quarters: observed columns 0..4-k, forecast columns 5-k..4."""

    k: int

    def __post_init__(self):
        if not 0 <= self.k <= 5:
            raise BadK(f"configuration k must be in 0..5, got {self.k}")

    @property
    def observed_columns(self) -> range:
        return range(0, 5 - self.k)

    @property
    def forecast_columns(self) -> range:
        return range(5 - self.k, 5)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion matrix counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def accuracy(cm: ConfusionMatrix) -> float:
    """Percent correct: 100 * (tp + tn) / total."""
    if cm.total == 0:
        raise EmptyMatrix("confusion matrix is empty")
    return 100.0 * (cm.tp + cm.tn) / cm.total


def format_accuracy(value: float) -> str:
    """Two decimals, rounding half-up (90.56603.. -> '90.57')."""
    return str(Decimal(repr(value)).quantize(Decimal("0.01"), ROUND_HALF_UP))


def blend(observed: QuarterMatrix, forecast: QuarterMatrix, k: int) -> QuarterMatrix:
    """Per row: first 5-k quarters observed, last k forecast."""
    cfg = ForecastConfiguration(k)
    if observed.n_steps != forecast.n_steps:
        raise ShapeMismatch(f"observed has {observed.n_steps} steps, forecast "
                            f"{forecast.n_steps}")
    q = observed.quarters.copy()
    for col in cfg.forecast_columns:
        q[:, col] = forecast.quarters[:, col]
    return QuarterMatrix(observed.n_steps, q, observed.start)


def evaluate_config(blended: QuarterMatrix, observed: QuarterMatrix,
                    threshold: float = DEFAULT_THRESHOLD) -> ConfusionMatrix:
    """Row-by-row event classification of blended vs observed quarters."""
    if blended.n_steps != observed.n_steps:
        raise ShapeMismatch(f"blended has {blended.n_steps} steps, observed "
                            f"{observed.n_steps}")
    tp = tn = fp = fn = 0
    for t in range(observed.n_steps):
        pred = classify_event(blended.quarters[t], threshold)
        truth = classify_event(observed.quarters[t], threshold)
        if pred and truth:
            tp += 1
        elif not pred and not truth:
            tn += 1
        elif pred:
            fp += 1
        else:
            fn += 1
    return ConfusionMatrix(tp, tn, fp, fn)


@dataclass(frozen=True)
class EvalReport:
    """Per-configuration confusion matrices and accuracies."""

    n_steps: int
    threshold: float
    matrices: tuple[ConfusionMatrix, ...]  # index = configuration k

    def accuracy(self, k: int) -> float:
        return accuracy(self.matrices[k])

    def rows(self):
        for k, cm in enumerate(self.matrices):
            yield k, cm, accuracy(cm)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["config", "tp", "tn", "fp", "fn", "accuracy"])
            for k, cm, acc in self.rows():
                writer.writerow([k, cm.tp, cm.tn, cm.fp, cm.fn,
                                 format_accuracy(acc)])

    def to_json(self, path) -> None:
        obj = {
            "n_steps": self.n_steps,
            "threshold": self.threshold,
            "configurations": [
                {"k": k, "tp": cm.tp, "tn": cm.tn, "fp": cm.fp, "fn": cm.fn,
                 "accuracy": acc, "accuracy_display": format_accuracy(acc)}
                for k, cm, acc in self.rows()
            ],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=2)
            fh.write("\n")

    def summary_table(self) -> str:
        """Table-style text summary, one line per configuration."""
        lines = ["config  observed  forecast  tp  tn  fp  fn  accuracy(%)"]
        for k, cm, acc in self.rows():
            lines.append(f"{k:>6}  {5 - k:>8}  {k:>8}  {cm.tp:>2}  {cm.tn:>2}  "
                         f"{cm.fp:>2}  {cm.fn:>2}  {format_accuracy(acc):>10}")
        return "\n".join(lines)


def run_all_configs(observed: QuarterMatrix, forecast: QuarterMatrix,
                    threshold: float = DEFAULT_THRESHOLD) -> EvalReport:
    """Evaluate configurations 0..5 of observed/forecast quarter blending."""
    matrices = tuple(
        evaluate_config(blend(observed, forecast, k), observed, threshold)
        for k in range(6))
    return EvalReport(observed.n_steps, threshold, matrices)

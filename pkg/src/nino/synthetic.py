"""Deterministic synthetic SST/OHC scenarios with a known seasonal cycle,
planted warm events, Gaussian noise, and an analytic index oracle for the
noise-free signal.

Event bumps are raised-cosine humps that are spatially uniform (every cell
gets the same anomaly), so the noise-free truth is computable in closed form
by independent scalar code. The hump's apex lands exactly on a sample for any
duration: it rises over the first half as (1-cos(pi*(tau+1)/(a+1)))/2 and
falls as (1+cos(pi*(tau-a)/(d-a)))/2, with apex index a = (d-1)//2.

Noise is drawn from counter-based Philox streams keyed on
(seed, variable, month), so generation order never changes the data.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .climatology import DEFAULT_THRESHOLD, AnomalySeries, OniSeries
from .errors import BadSpec
from .grid import GridAxes, SpatioTemporalGrid, TimeStamp, Variable


@dataclass(frozen=True)
class SynthEvent:
    start_month: int   # index into the series
    duration: int      # months
    peak: float        # degC at the apex


@dataclass(frozen=True)
class SynthSpec:
    axes: GridAxes
    start: TimeStamp
    months: int
    base_temp: float = 26.0
    seasonal_amplitude: float = 2.0
    noise_sigma: float = 0.0
    events: tuple[SynthEvent, ...] = ()
    ohc_lag: int = 3
    ohc_base: float = 10.0
    seed: int = 0
    base_period: tuple[TimeStamp, TimeStamp] | None = None

    def __post_init__(self):
        if self.months < 1:
            raise BadSpec("months must be >= 1")
        if self.noise_sigma < 0:
            raise BadSpec("noise_sigma must be >= 0")
        for ev in self.events:
            if ev.duration < 1:
                raise BadSpec(f"event duration must be >= 1, got {ev.duration}")
            if ev.start_month < 0 or ev.start_month + ev.duration > self.months:
                raise BadSpec(f"event window {ev.start_month}+{ev.duration} "
                              f"outside 0..{self.months}")

    def to_json(self, path) -> None:
        obj = {
            "lats": list(self.axes.lats),
            "lons": list(self.axes.lons),
            "start": str(self.start),
            "months": self.months,
            "base_temp": self.base_temp,
            "seasonal_amplitude": self.seasonal_amplitude,
            "noise_sigma": self.noise_sigma,
            "events": [[e.start_month, e.duration, e.peak] for e in self.events],
            "ohc_lag": self.ohc_lag,
            "ohc_base": self.ohc_base,
            "seed": self.seed,
            "base_period": ([str(self.base_period[0]), str(self.base_period[1])]
                            if self.base_period else None),
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "SynthSpec":
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        base_period = obj.get("base_period")
        return cls(
            axes=GridAxes(tuple(obj["lats"]), tuple(obj["lons"])),
            start=TimeStamp.parse(obj["start"]),
            months=int(obj["months"]),
            base_temp=float(obj.get("base_temp", 26.0)),
            seasonal_amplitude=float(obj.get("seasonal_amplitude", 2.0)),
            noise_sigma=float(obj.get("noise_sigma", 0.0)),
            events=tuple(SynthEvent(int(s), int(d), float(p))
                         for s, d, p in obj.get("events", [])),
            ohc_lag=int(obj.get("ohc_lag", 3)),
            ohc_base=float(obj.get("ohc_base", 10.0)),
            seed=int(obj.get("seed", 0)),
            base_period=(tuple(TimeStamp.parse(t) for t in base_period)
                         if base_period else None),
        )


@dataclass(frozen=True)
class GroundTruth:
    """Noise-free analytics for a scenario: the designed event signal, the
    climatology-adjusted anomaly, the index, and per-row event flags."""

    event_signal: tuple[float, ...]   # raw bump sum per month (degC)
    anomaly: AnomalySeries            # after subtracting the scalar climatology
    oni: OniSeries
    event_flags: tuple[bool, ...]     # one per quarter-matrix row
    threshold: float = DEFAULT_THRESHOLD


def event_bump(tau: int, duration: int, peak: float) -> float:
    """Raised-cosine hump value at offset tau inside an event window."""
    if tau < 0 or tau >= duration:
        return 0.0
    apex = (duration - 1) // 2
    if tau <= apex:
        return peak * 0.5 * (1.0 - math.cos(math.pi * (tau + 1) / (apex + 1)))
    return peak * 0.5 * (1.0 + math.cos(math.pi * (tau - apex) / (duration - apex)))


def _event_signal(spec: SynthSpec) -> list[float]:
    sig = [0.0] * spec.months
    for ev in spec.events:
        for tau in range(ev.duration):
            sig[ev.start_month + tau] += event_bump(tau, ev.duration, ev.peak)
    return sig


def _scalar_series(spec: SynthSpec) -> list[float]:
    """The noise-free per-cell value at each month (identical across cells)."""
    sig = _event_signal(spec)
    out = []
    for i in range(spec.months):
        month = spec.start.plus(i).month
        seasonal = spec.seasonal_amplitude * math.sin(2.0 * math.pi * month / 12.0)
        out.append(spec.base_temp + seasonal + sig[i])
    return out


def _resolve_base_period(spec: SynthSpec) -> tuple[TimeStamp, TimeStamp]:
    if spec.base_period is not None:
        return spec.base_period
    end = spec.start.plus(spec.months - 1)
    first = spec.start if spec.start.month == 1 else TimeStamp(spec.start.year + 1, 1)
    last = end if end.month == 12 else TimeStamp(end.year - 1, 12)
    if last < first:
        raise BadSpec("scenario covers no complete calendar year and no "
                      "base_period was given")
    return first, last


def _scalar_truth(spec: SynthSpec) -> GroundTruth:
    """Analytic anomaly/index/flags via plain scalar arithmetic.

    Independent of the grid pipeline on purpose: sums run over python floats
    in a fixed order, with no numpy and no shared helper code.
    """
    series = _scalar_series(spec)
    p0, p1 = _resolve_base_period(spec)
    i0 = spec.start.months_until(p0)
    i1 = spec.start.months_until(p1)
    if i0 < 0 or i1 >= spec.months:
        raise BadSpec(f"base period {p0}..{p1} outside the scenario")
    clim = {}
    for month in range(1, 13):
        samples = [series[i] for i in range(i0, i1 + 1)
                   if spec.start.plus(i).month == month]
        if not samples:
            raise BadSpec(f"base period has no samples for month {month}")
        clim[month] = sum(samples) / len(samples)
    anomaly = [series[i] - clim[spec.start.plus(i).month]
               for i in range(spec.months)]
    oni_vals = [(anomaly[i - 2] + anomaly[i - 1] + anomaly[i]) / 3.0
                for i in range(2, spec.months)]
    flags = []
    for t in range(spec.months - 6):
        ok = True
        for i in range(5):
            q = (anomaly[t + i] + anomaly[t + i + 1] + anomaly[t + i + 2]) / 3.0
            if q < DEFAULT_THRESHOLD:
                ok = False
                break
        flags.append(ok)
    return GroundTruth(
        event_signal=tuple(_event_signal(spec)),
        anomaly=AnomalySeries(spec.start, tuple(anomaly)),
        oni=OniSeries(spec.start.plus(2), tuple(oni_vals)),
        event_flags=tuple(flags),
    )


def _noise_field(seed: int, var_id: int, month_idx: int,
                 shape: tuple[int, int], sigma: float) -> np.ndarray:
    if sigma == 0.0:
        return np.zeros(shape)
    bits = np.random.Philox(counter=[month_idx, var_id, 0, 0], key=seed)
    return np.random.Generator(bits).normal(0.0, sigma, shape)


def generate(spec: SynthSpec) -> tuple[SpatioTemporalGrid, SpatioTemporalGrid,
                                       GroundTruth]:
    """Build the SST and OHC grids plus the noise-free ground truth.

    SST(t, cell) = base + seasonal sine + event bump(t) + noise;
    OHC leads the SST events by ``ohc_lag`` months and has its own noise
    stream. Deterministic per seed regardless of generation order.
    """
    shape = spec.axes.shape
    sig = _event_signal(spec)
    sst = np.empty((spec.months,) + shape)
    ohc = np.empty((spec.months,) + shape)
    for i in range(spec.months):
        month = spec.start.plus(i).month
        seasonal = spec.seasonal_amplitude * math.sin(2.0 * math.pi * month / 12.0)
        lead = i + spec.ohc_lag
        ohc_bump = sig[lead] if 0 <= lead < spec.months else 0.0
        sst[i] = (spec.base_temp + seasonal + sig[i]
                  + _noise_field(spec.seed, 0, i, shape, spec.noise_sigma))
        ohc[i] = (spec.ohc_base + seasonal + ohc_bump
                  + _noise_field(spec.seed, 1, i, shape, spec.noise_sigma))
    truth = _scalar_truth(spec)
    return (
        SpatioTemporalGrid(Variable.SST, spec.axes, spec.start, sst),
        SpatioTemporalGrid(Variable.OHC, spec.axes, spec.start, ohc,
                           units="arbitrary"),
        truth,
    )


def oracle_oni(truth: GroundTruth) -> OniSeries:
    """Recompute the index from the analytic anomaly with an independent
    scalar running-mean routine (no numpy, no shared code path)."""
    vals = truth.anomaly.values
    out = []
    for i in range(2, len(vals)):
        out.append((vals[i - 2] + vals[i - 1] + vals[i]) / 3.0)
    return OniSeries(truth.anomaly.start.plus(2), tuple(out))

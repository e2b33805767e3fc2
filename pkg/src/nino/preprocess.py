"""Min-max normalization with exact inverse, heatmap encoding of SST fields,
and sliding-window sample construction for training.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .errors import AllMissing, BadScale, TooShort
from .grid import SpatioTemporalGrid, TimeStamp, Variable

log = logging.getLogger("nino.preprocess")

MISSING_COLOR = (128, 128, 128)

# Diverging colormap anchors at parameter 0, 1/4, 1/2, 3/4, 1:
# violet -> blue -> white -> yellow -> red.
_ANCHOR_PARAMS = (0.0, 0.25, 0.5, 0.75, 1.0)
_ANCHOR_COLORS = (
    (48, 0, 96),      # violet
    (0, 0, 255),      # blue
    (255, 255, 255),  # white
    (255, 220, 0),    # yellow
    (200, 0, 0),      # red
)


@dataclass(frozen=True)
class NormalizationParams:
    """Min/max of the training data for one variable."""

    variable: Variable
    min: float
    max: float

    def __post_init__(self):
        if self.min > self.max:
            raise ValueError("min > max")

    @property
    def degenerate(self) -> bool:
        return self.min == self.max

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"variable": self.variable.value,
                       "min": self.min, "max": self.max}, fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "NormalizationParams":
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        return cls(Variable(obj["variable"]), float(obj["min"]), float(obj["max"]))


def fit_minmax(grid: SpatioTemporalGrid,
               variable: Variable | None = None) -> NormalizationParams:
    """Min/max over all non-missing values of the grid (training data only)."""
    good = grid.values[~np.isnan(grid.values)]
    if good.size == 0:
        raise AllMissing("cannot fit normalization on an all-missing grid")
    return NormalizationParams(variable or grid.variable,
                               float(good.min()), float(good.max()))


def count_out_of_range(x, p: NormalizationParams) -> int:
    """How many finite values fall outside [p.min, p.max] (they will clamp)."""
    arr = np.asarray(x, dtype=float)
    finite = arr[~np.isnan(arr)]
    return int(((finite < p.min) | (finite > p.max)).sum())


def normalize(x, p: NormalizationParams):
    """Map values into [0, 1] via (x - min) / (max - min).

    Out-of-range values clamp to [0, 1] and the clamp count is logged.
    A degenerate range (max == min) maps everything to 0.0 with a warning.
    Scalars in, scalar out; arrays in, array out. NaN passes through.
    """
    arr = np.asarray(x, dtype=float)
    if p.degenerate:
        log.warning("degenerate normalization range (min == max == %s); "
                    "mapping all values to 0.0", p.min)
        out = np.where(np.isnan(arr), np.nan, 0.0)
    else:
        clamped = count_out_of_range(arr, p)
        if clamped:
            log.warning("%d value(s) outside [%s, %s] clamped during "
                        "normalization", clamped, p.min, p.max)
        out = np.clip((arr - p.min) / (p.max - p.min), 0.0, 1.0)
    return float(out) if np.isscalar(x) else out


def denormalize(y, p: NormalizationParams):
    """Inverse of normalize: min + y * (max - min)."""
    arr = np.asarray(y, dtype=float)
    out = p.min + arr * (p.max - p.min)
    return float(out) if np.isscalar(y) else out


@dataclass(frozen=True)
class HeatmapImage:
    """RGB raster, one pixel block per grid cell, row 0 = northernmost lat."""

    width: int
    height: int
    pixels: np.ndarray  # [height, width, 3] uint8

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.shape != (self.height, self.width, 3):
            raise ValueError(f"pixel buffer shape {px.shape} inconsistent")
        object.__setattr__(self, "pixels", px)

    def to_ppm_bytes(self) -> bytes:
        header = f"P6\n{self.width} {self.height}\n255\n".encode("ascii")
        return header + self.pixels.tobytes()

    def write_ppm(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_ppm_bytes())

    def write_png(self, path) -> None:
        from PIL import Image

        Image.fromarray(self.pixels, mode="RGB").save(path, format="PNG")


def value_to_param(value, scale: tuple[float, float]):
    """Colormap parameter in [0, 1] for a value on the given scale (clamped)."""
    lo, hi = scale
    return np.clip((np.asarray(value, dtype=float) - lo) / (hi - lo), 0.0, 1.0)


def colormap(t) -> np.ndarray:
    """Piecewise-linear RGB along the diverging anchor path; t in [0, 1]."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    params = np.asarray(_ANCHOR_PARAMS)
    colors = np.asarray(_ANCHOR_COLORS, dtype=float)
    out = np.empty(t.shape + (3,))
    for c in range(3):
        out[..., c] = np.interp(t, params, colors[:, c])
    return np.rint(out).astype(np.uint8)


def render_heatmap(field, scale: tuple[float, float], cell_px: int = 1) -> HeatmapImage:
    """Render a 2D field (rows = ascending latitude) as a heatmap image.

    Colors run violet -> blue -> white -> yellow -> red across the scale;
    missing cells are gray. The first image row is the northernmost latitude.
    """
    lo, hi = scale
    if not lo < hi:
        raise BadScale(f"scale min {lo} must be < max {hi}")
    arr = np.asarray(field, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2D field, got shape {arr.shape}")
    flipped = arr[::-1]  # north at the top
    rgb = colormap(value_to_param(np.nan_to_num(flipped, nan=lo), scale))
    rgb[np.isnan(flipped)] = MISSING_COLOR
    if cell_px > 1:
        rgb = np.repeat(np.repeat(rgb, cell_px, axis=0), cell_px, axis=1)
    return HeatmapImage(rgb.shape[1], rgb.shape[0], rgb)


@dataclass(frozen=True)
class WindowSample:
    """One training sample: an input window and its forecast targets.

    ``inputs`` is [window_len, channels, lat, lon]; ``targets`` is
    [horizon, lat, lon] of SST fields. ``anchor`` is the first forecast month
    (inputs cover the window_len months strictly before it).
    """

    inputs: np.ndarray
    targets: np.ndarray
    anchor: TimeStamp

    def __post_init__(self):
        inp = np.asarray(self.inputs, dtype=np.float64)
        tgt = np.asarray(self.targets, dtype=np.float64)
        if inp.ndim != 4:
            raise ValueError(f"inputs must be 4D, got shape {inp.shape}")
        if tgt.ndim != 3:
            raise ValueError(f"targets must be 3D, got shape {tgt.shape}")
        if inp.shape[1] not in (1, 2):
            raise ValueError(f"channels must be 1 or 2, got {inp.shape[1]}")
        object.__setattr__(self, "inputs", inp)
        object.__setattr__(self, "targets", tgt)


def window_count(n_months: int, window_len: int, horizon: int, stride: int) -> int:
    return (n_months - window_len - horizon) // stride + 1


def build_windows(sst: SpatioTemporalGrid, ohc: SpatioTemporalGrid | None,
                  window_len: int = 12, horizon: int = 7,
                  stride: int = 1) -> list[WindowSample]:
    """Cut aligned grids into sliding-window samples.

    Sample k: inputs are months [k*stride, k*stride + window_len) with SST as
    channel 0 (and OHC as channel 1 when given); targets are the next
    ``horizon`` months of SST. Grids must already share axes and time range.
    """
    if window_len < 1 or horizon < 1 or stride < 1:
        raise ValueError("window_len, horizon and stride must be >= 1")
    time_len = sst.n_months
    if ohc is not None:
        if ohc.axes != sst.axes or ohc.start != sst.start or ohc.n_months != time_len:
            raise ValueError("ohc grid not aligned with sst grid (use align())")
    if time_len < window_len + horizon:
        raise TooShort(f"{time_len} months < window_len {window_len} + "
                       f"horizon {horizon}")
    if ohc is None:
        stacked = sst.values[:, None]
    else:
        stacked = np.stack([sst.values, ohc.values], axis=1)  # [T, C, lat, lon]
    samples = []
    for k in range(window_count(time_len, window_len, horizon, stride)):
        i0 = k * stride
        origin = i0 + window_len
        samples.append(WindowSample(
            inputs=stacked[i0:origin],
            targets=sst.values[origin:origin + horizon],
            anchor=sst.start.plus(origin),
        ))
    return samples

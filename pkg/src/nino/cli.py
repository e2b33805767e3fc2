"""Command-line entry point wiring the full pipeline:
synth -> oni -> train -> predict -> evaluate -> render.

One binary with subcommands; a JSON run config supplies paths and
hyperparameters, flags override config values, and the effective config is
echoed into the output directory. A single --seed drives every stochastic
component (init, shuffle, dropout, synthesis). Distinct exit codes per error
family; outputs land only under the configured output directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import errors
from .autodiff import load_checkpoint, save_checkpoint
from .climatology import (
    AnomalySeries,
    ClimatologyTable,
    QuarterMatrix,
    classify_event,
    compute_climatology,
    oni,
    quarter_matrix,
    regional_anomaly,
    write_quarter_csv,
    write_series_csv,
)
from .evaluation import run_all_configs
from .grid import (
    GeoBounds,
    SpatioTemporalGrid,
    TimeStamp,
    Variable,
    align,
    extract_region,
    read_grid_csv,
    write_grid_csv,
)
from .model import (
    CnnForecaster,
    CnnForecasterConfig,
    ConvLstmCellConfig,
    ConvLstmXt,
    ConvLstmXtConfig,
    TrainConfig,
    ensemble,
    observed_quarters,
    predict_quarter_anomalies,
    split_train_test,
    train,
    write_loss_curve,
)
from .preprocess import (
    NormalizationParams,
    build_windows,
    denormalize,
    fit_minmax,
    normalize,
    render_heatmap,
    window_count,
)
from .synthetic import SynthSpec, generate

log = logging.getLogger("nino.cli")

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_NOT_FOUND = 3
EXIT_FORMAT = 4
EXIT_DATA = 5
EXIT_DOMAIN = 6

_EXIT_CODES = (
    (errors.ConfigError, EXIT_USAGE),
    (FileNotFoundError, EXIT_NOT_FOUND),
    (errors.FormatError, EXIT_FORMAT),
    ((errors.GapInTime, errors.InconsistentAxes), EXIT_DATA),
    (errors.NinoError, EXIT_DOMAIN),
)


def exit_code_for(exc: BaseException) -> int:
    for types, code in _EXIT_CODES:
        if isinstance(exc, types):
            return code
    return EXIT_UNEXPECTED


@dataclass(frozen=True)
class RunConfig:
    """Everything a pipeline run needs, loadable from one JSON file."""

    out_dir: str = "out"
    sst_csv: str | None = None
    ohc_csv: str | None = None
    bounds: tuple[float, float, float, float] = (-5.0, 5.0, -170.0, -120.0)
    base_period: tuple[str, str] | None = None
    window_len: int = 12
    horizon: int = 7
    stride: int = 1
    n_steps: int = 53
    threshold: float = 0.5
    seed: int = 0
    render_scale: tuple[float, float] = (-2.0, 2.0)
    render_cell_px: int = 8
    convlstm: dict = field(default_factory=dict)
    cnn: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    synth: dict | None = None

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise errors.ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("bounds", "base_period", "render_scale"):
            if obj.get(key) is not None:
                obj[key] = tuple(obj[key])
        return cls(**obj)

    def to_json(self, path) -> None:
        obj = {k: getattr(self, k) for k in self.__dataclass_fields__}
        for key in ("bounds", "base_period", "render_scale"):
            if obj[key] is not None:
                obj[key] = list(obj[key])
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=2)
            fh.write("\n")

    @property
    def geo_bounds(self) -> GeoBounds:
        return GeoBounds(*self.bounds)

    def base_period_stamps(self) -> tuple[TimeStamp, TimeStamp] | None:
        if self.base_period is None:
            return None
        return TimeStamp.parse(self.base_period[0]), TimeStamp.parse(self.base_period[1])

    def convlstm_config(self) -> ConvLstmXtConfig:
        d = dict(self.convlstm)
        blocks = d.pop("blocks", [[16, 3], [8, 3]])
        return ConvLstmXtConfig(
            blocks=tuple(ConvLstmCellConfig(int(c), int(k)) for c, k in blocks),
            fc_dims=tuple(d.pop("fc_dims", [64])),
            dropout_rate=float(d.pop("dropout_rate", 0.3)),
            horizon=self.horizon,
            in_channels=int(d.pop("in_channels", 2)),
        )

    def cnn_config(self) -> CnnForecasterConfig:
        d = dict(self.cnn)
        return CnnForecasterConfig(
            window_len=self.window_len,
            conv_channels=tuple(d.pop("conv_channels", [8])),
            kernel_size=int(d.pop("kernel_size", 3)),
            fc_dims=tuple(d.pop("fc_dims", [32])),
        )

    def train_config(self) -> TrainConfig:
        d = dict(self.train)
        return TrainConfig(
            epochs=int(d.pop("epochs", 50)),
            lr=float(d.pop("lr", 0.001)),
            batch_size=int(d.pop("batch_size", 32)),
            split=float(d.pop("split", 0.8)),
            seed=int(d.pop("seed", self.seed)),
        )


def _require_file(path, what: str) -> Path:
    if path is None:
        raise FileNotFoundError(f"{what} not configured")
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"{what} not found: {p}")
    return p


def _ensure_out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.to_json(out / "run_config.json")
    return out


@dataclass
class PipelineData:
    """Shared per-run artifacts derived deterministically from the config."""

    sst: SpatioTemporalGrid            # region-extracted, degC
    ohc: SpatioTemporalGrid
    clim: ClimatologyTable
    anomaly: AnomalySeries             # regional anomaly series
    norm_sst: NormalizationParams
    norm_ohc: NormalizationParams
    lstm_inputs: np.ndarray            # [N, window, 2, lat, lon], normalized
    lstm_targets: np.ndarray           # [N, horizon, lat, lon], normalized
    cnn_inputs: np.ndarray             # [N, window, lat, lon], degC anomalies
    cnn_targets: np.ndarray            # [N, 5] observed quarters
    anchors: list[TimeStamp]


def load_region_grids(cfg: RunConfig) -> tuple[SpatioTemporalGrid, SpatioTemporalGrid]:
    sst_path = _require_file(cfg.sst_csv, "SST CSV")
    ohc_path = _require_file(cfg.ohc_csv, "OHC CSV")
    sst = extract_region(read_grid_csv(sst_path), cfg.geo_bounds)
    ohc = extract_region(read_grid_csv(ohc_path), cfg.geo_bounds)
    return align(sst, ohc)


def prepare_pipeline_data(cfg: RunConfig) -> PipelineData:
    """Load grids, fit normalization on the training prefix, window the data.

    Normalization parameters are fitted only on months visible to training
    anchors, then frozen for the whole run.
    """
    sst, ohc = load_region_grids(cfg)
    n_anchors = window_count(sst.n_months, cfg.window_len, cfg.horizon, cfg.stride)
    if n_anchors < 2:
        raise errors.TooShort("not enough months for a train/test split")
    n_train, _ = split_train_test(n_anchors, cfg.train_config().split)
    train_cut = (n_train - 1) * cfg.stride + cfg.window_len + cfg.horizon
    train_end = sst.start.plus(train_cut - 1)
    norm_sst = fit_minmax(sst.subperiod(sst.start, train_end))
    norm_ohc = fit_minmax(ohc.subperiod(ohc.start, train_end))

    sst_n = SpatioTemporalGrid(sst.variable, sst.axes, sst.start,
                               normalize(sst.values, norm_sst), sst.units)
    ohc_n = SpatioTemporalGrid(ohc.variable, ohc.axes, ohc.start,
                               normalize(ohc.values, norm_ohc), ohc.units)
    samples = build_windows(sst_n, ohc_n, cfg.window_len, cfg.horizon, cfg.stride)

    clim = compute_climatology(sst, cfg.base_period_stamps())
    anomaly = regional_anomaly(sst, clim, cfg.geo_bounds)
    anom_fields = sst.values - np.stack(
        [clim.month_field(sst.start.plus(i).month) for i in range(sst.n_months)])
    anom_grid = SpatioTemporalGrid(Variable.SST, sst.axes, sst.start, anom_fields)
    cnn_samples = build_windows(anom_grid, None, cfg.window_len, cfg.horizon,
                                cfg.stride)

    anchors = [s.anchor for s in samples]
    return PipelineData(
        sst=sst,
        ohc=ohc,
        clim=clim,
        anomaly=anomaly,
        norm_sst=norm_sst,
        norm_ohc=norm_ohc,
        lstm_inputs=np.stack([s.inputs for s in samples]),
        lstm_targets=np.stack([s.targets for s in samples]),
        cnn_inputs=np.stack([s.inputs[:, 0] for s in cnn_samples]),
        cnn_targets=np.stack([observed_quarters(anomaly, a) for a in anchors]),
        anchors=anchors,
    )


def build_models(cfg: RunConfig, grid_shape) -> tuple[ConvLstmXt, CnnForecaster]:
    lstm = ConvLstmXt(cfg.convlstm_config(), grid_shape, seed=cfg.seed)
    cnn = CnnForecaster(cfg.cnn_config(), grid_shape, seed=cfg.seed + 1_000_003)
    return lstm, cnn


def _save_model(model, state, path) -> None:
    named = dict(model.named_parameters())
    for (name, _), m, v in zip(model.named_parameters().items(), state.m, state.v):
        named[f"adam.m.{name}"] = m
        named[f"adam.v.{name}"] = v
    named["adam.step"] = np.asarray(float(state.step))
    save_checkpoint(named, path)


def _load_model(model, path) -> None:
    model.load_named(load_checkpoint(_require_file(path, "checkpoint")))


def eval_anchor_range(cfg: RunConfig, n_anchors: int) -> range:
    """The last n_steps anchors are the evaluation steps."""
    if n_anchors < cfg.n_steps:
        raise errors.TooShort(f"need {cfg.n_steps} evaluation anchors, have "
                              f"{n_anchors}")
    return range(n_anchors - cfg.n_steps, n_anchors)


def forecast_matrices(cfg: RunConfig, data: PipelineData, lstm: ConvLstmXt,
                      cnn: CnnForecaster) -> tuple[QuarterMatrix, QuarterMatrix]:
    """Observed and ensemble-forecast quarter matrices over the eval anchors."""
    if cfg.horizon != 7:
        raise errors.ShapeMismatch("evaluation requires horizon = 7 months")
    idx = eval_anchor_range(cfg, len(data.anchors))
    lstm_pred = lstm.forward(data.lstm_inputs[list(idx)]).data
    cnn_pred = cnn.forward(data.cnn_inputs[list(idx)]).data
    obs_rows, fc_rows = [], []
    for row, k in enumerate(idx):
        anchor = data.anchors[k]
        lstm_q = predict_quarter_anomalies(lstm_pred[row], anchor, data.norm_sst,
                                           data.clim, cfg.geo_bounds)
        fc_rows.append(ensemble(cnn_pred[row], lstm_q))
        obs_rows.append(observed_quarters(data.anomaly, anchor))
    start = data.anchors[idx[0]]
    observed = QuarterMatrix(cfg.n_steps, np.asarray(obs_rows), start)
    forecast = QuarterMatrix(cfg.n_steps, np.asarray(fc_rows), start)
    return observed, forecast


# ---- subcommands ----

def cmd_synth(cfg: RunConfig) -> int:
    if cfg.synth is None:
        raise errors.BadSpec("config has no 'synth' section")
    out = _ensure_out_dir(cfg)
    spec_obj = dict(cfg.synth)
    spec_obj.setdefault("seed", cfg.seed)
    spec_path = out / "synth_spec.json"
    with open(spec_path, "w", encoding="utf-8") as fh:
        json.dump(spec_obj, fh, indent=2)
        fh.write("\n")
    spec = SynthSpec.from_json(spec_path)
    sst, ohc, truth = generate(spec)
    write_grid_csv(sst, out / "sst.csv")
    write_grid_csv(ohc, out / "ohc.csv")
    write_series_csv(truth.anomaly.start, truth.anomaly.values,
                     out / "truth_anomaly.csv")
    write_series_csv(truth.oni.start, truth.oni.values, out / "truth_oni.csv")
    with open(out / "truth_flags.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,flag\n")
        for t, flag in enumerate(truth.event_flags):
            fh.write(f"{truth.anomaly.start.plus(t)},{int(flag)}\n")
    print(f"wrote {spec.months}-month scenario to {out} "
          f"({sum(truth.event_flags)} event rows)")
    return EXIT_OK


def cmd_oni(cfg: RunConfig) -> int:
    sst_path = _require_file(cfg.sst_csv, "SST CSV")
    sst = extract_region(read_grid_csv(sst_path), cfg.geo_bounds)
    clim = compute_climatology(sst, cfg.base_period_stamps())
    anomaly = regional_anomaly(sst, clim, cfg.geo_bounds)
    oni_series = oni(anomaly)
    qm = quarter_matrix(anomaly, len(anomaly) - 6)
    flags = [classify_event(qm.quarters[t], cfg.threshold)
             for t in range(qm.n_steps)]
    out = _ensure_out_dir(cfg)
    write_series_csv(anomaly.start, anomaly.values, out / "anomaly.csv")
    write_series_csv(oni_series.start, oni_series.values, out / "oni.csv")
    write_quarter_csv(qm, out / "quarters.csv")
    with open(out / "event_flags.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,flag\n")
        for t, flag in enumerate(flags):
            fh.write(f"{qm.row_start(t)},{int(flag)}\n")
    base = clim.base_period
    print(f"months {sst.start}..{sst.end}  base period {base[0]}..{base[1]}")
    print(f"index range [{min(oni_series.values):+.3f}, "
          f"{max(oni_series.values):+.3f}] degC; "
          f"{sum(flags)}/{len(flags)} rows classified as events")
    return EXIT_OK


def cmd_train(cfg: RunConfig) -> int:
    data = prepare_pipeline_data(cfg)
    out = _ensure_out_dir(cfg)
    lstm, cnn = build_models(cfg, data.sst.axes.shape)
    tc = cfg.train_config()
    log.info("training ConvLSTM on %d samples", len(data.lstm_inputs))
    lstm_hist, lstm_state = train(lstm, data.lstm_inputs, data.lstm_targets, tc)
    log.info("training CNN on %d samples", len(data.cnn_inputs))
    cnn_hist, cnn_state = train(cnn, data.cnn_inputs, data.cnn_targets, tc)
    _save_model(lstm, lstm_state, out / "convlstm.ckpt")
    _save_model(cnn, cnn_state, out / "cnn.ckpt")
    write_loss_curve(lstm_hist, out / "convlstm_loss.csv")
    write_loss_curve(cnn_hist, out / "cnn_loss.csv")
    data.norm_sst.to_json(out / "norm_sst.json")
    data.norm_ohc.to_json(out / "norm_ohc.json")
    if lstm_hist:
        print(f"convlstm final train/test mse: {lstm_hist[-1][1]:.3g}/"
              f"{lstm_hist[-1][2]:.3g}")
        print(f"cnn final train/test mse: {cnn_hist[-1][1]:.3g}/"
              f"{cnn_hist[-1][2]:.3g}")
    else:
        print("epochs = 0: checkpoints hold the initialization")
    return EXIT_OK


def cmd_predict(cfg: RunConfig, anchor: str | None = None) -> int:
    data = prepare_pipeline_data(cfg)
    out = _ensure_out_dir(cfg)
    lstm, cnn = build_models(cfg, data.sst.axes.shape)
    _load_model(lstm, Path(cfg.out_dir) / "convlstm.ckpt")
    _load_model(cnn, Path(cfg.out_dir) / "cnn.ckpt")
    if anchor is None:
        k = len(data.anchors) - 1
    else:
        want = TimeStamp.parse(anchor)
        matches = [i for i, a in enumerate(data.anchors) if a == want]
        if not matches:
            raise errors.TooShort(f"no forecast anchor at {want}")
        k = matches[0]
    at = data.anchors[k]
    pred = lstm.forward(data.lstm_inputs[k:k + 1]).data[0]
    pred_c = denormalize(pred, data.norm_sst)
    pred_grid = SpatioTemporalGrid(Variable.SST, data.sst.axes, at, pred_c)
    clim_stack = np.stack([data.clim.month_field(at.plus(i).month)
                           for i in range(cfg.horizon)])
    anom_grid = SpatioTemporalGrid(Variable.SST, data.sst.axes, at,
                                   pred_c - clim_stack)
    write_grid_csv(pred_grid, out / "pred_sst.csv")
    write_grid_csv(anom_grid, out / "pred_anomaly.csv")
    lstm_q = predict_quarter_anomalies(pred, at, data.norm_sst, data.clim,
                                       cfg.geo_bounds)
    cnn_q = cnn.forward(data.cnn_inputs[k:k + 1]).data[0]
    ens = ensemble(cnn_q, lstm_q)
    with open(out / "pred_quarters.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("model,q0,q1,q2,q3,q4\n")
        for name, row in (("cnn", cnn_q), ("convlstm", lstm_q), ("ensemble", ens)):
            fh.write(name + "," + ",".join(repr(float(v)) for v in row) + "\n")
    print(f"forecast at {at}: ensemble quarters "
          + " ".join(f"{v:+.3f}" for v in ens))
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig, self_test: bool = False) -> int:
    data = prepare_pipeline_data(cfg)
    out = _ensure_out_dir(cfg)
    lstm, cnn = build_models(cfg, data.sst.axes.shape)
    _load_model(lstm, Path(cfg.out_dir) / "convlstm.ckpt")
    _load_model(cnn, Path(cfg.out_dir) / "cnn.ckpt")
    observed, forecast = forecast_matrices(cfg, data, lstm, cnn)
    if self_test:
        forecast = observed
    report = run_all_configs(observed, forecast, cfg.threshold)
    write_quarter_csv(observed, out / "observed_quarters.csv")
    write_quarter_csv(forecast, out / "forecast_quarters.csv")
    report.to_csv(out / "report.csv")
    report.to_json(out / "report.json")
    print(report.summary_table())
    return EXIT_OK


def cmd_render(cfg: RunConfig, input_csv: str | None = None,
               png: bool = False) -> int:
    path = _require_file(input_csv or str(Path(cfg.out_dir) / "pred_anomaly.csv"),
                         "render input CSV")
    grid = read_grid_csv(path)
    out = _ensure_out_dir(cfg) / "heatmaps"
    out.mkdir(exist_ok=True)
    scale = cfg.render_scale
    px = cfg.render_cell_px
    written = []

    def emit(name, field2d):
        img = render_heatmap(field2d, scale, cell_px=px)
        img.write_ppm(out / f"{name}.ppm")
        if png:
            img.write_png(out / f"{name}.png")
        written.append(name)

    times = grid.times()
    for i, t in enumerate(times):
        emit(str(t), grid.values[i])
    for i in range(grid.n_months - 2):
        avg = np.nanmean(grid.values[i:i + 3], axis=0)
        emit(f"{times[i]}_to_{times[i + 2]}_avg", avg)
    if grid.n_months > 1:
        emit(f"{times[0]}_to_{times[-1]}_avg", np.nanmean(grid.values, axis=0))
    print(f"wrote {len(written)} heatmaps to {out}")
    return EXIT_OK


# ---- argument parsing ----

def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    updates = {}
    for key in ("out_dir", "sst_csv", "ohc_csv", "seed", "n_steps", "threshold"):
        val = getattr(args, key, None)
        if val is not None:
            updates[key] = val
    return replace(cfg, **updates) if updates else cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nino",
        description="El Nino index computation, forecasting and verification")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="run config JSON")
        p.add_argument("--out-dir", dest="out_dir")
        p.add_argument("--sst-csv", dest="sst_csv")
        p.add_argument("--ohc-csv", dest="ohc_csv")
        p.add_argument("--seed", type=int)
        p.add_argument("--n-steps", dest="n_steps", type=int)
        p.add_argument("--threshold", type=float)

    common(sub.add_parser("synth", help="generate a synthetic scenario"))
    common(sub.add_parser("oni", help="compute anomaly, index and event flags"))
    common(sub.add_parser("train", help="train both forecasters"))
    p_pred = sub.add_parser("predict", help="forecast at one anchor")
    common(p_pred)
    p_pred.add_argument("--anchor", help="forecast origin YYYY-MM (default: last)")
    p_eval = sub.add_parser("evaluate", help="run configurations 0-5")
    common(p_eval)
    p_eval.add_argument("--self-test", action="store_true",
                        help="feed observed quarters back as the forecast")
    p_render = sub.add_parser("render", help="render heatmap images")
    common(p_render)
    p_render.add_argument("--input", help="grid CSV to render")
    p_render.add_argument("--png", action="store_true", help="also write PNGs")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("NINO_LOG", "WARNING").upper())
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(RunConfig.from_json(args.config), args)
        if args.command == "synth":
            return cmd_synth(cfg)
        if args.command == "oni":
            return cmd_oni(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "predict":
            return cmd_predict(cfg, anchor=args.anchor)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, self_test=args.self_test)
        if args.command == "render":
            return cmd_render(cfg, input_csv=args.input, png=args.png)
        raise AssertionError(f"unhandled command {args.command}")
    except Exception as exc:  # noqa: BLE001 - single exit-code funnel
        code = exit_code_for(exc)
        print(f"error: {exc}", file=sys.stderr)
        if code == EXIT_UNEXPECTED:
            raise
        return code


if __name__ == "__main__":
    sys.exit(main())

"""The two forecasters and their training machinery.

ConvLSTM-XT: two ConvLSTM blocks (gate transforms are same-padding 2D
convolutions, standard formulation without peepholes) followed by a
fully-connected head with ReLU and dropout, emitting the predicted SST grids
for each month of the forecast horizon. The CNN forecaster reads a window of
SST anomaly fields stacked as channels and emits the five overlapping
quarterly anomalies directly.

Training is plain minibatch Adam on MSE with a chronological train/test
split; everything is deterministic for a fixed seed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .autodiff import (
    AdamState,
    Tensor,
    adam_step,
    add,
    backward,
    conv2d,
    dense,
    dropout,
    hadamard,
    mse,
    relu,
    reshape,
    sigmoid,
    slice_channels,
    tanh,
)
from .climatology import (
    AnomalySeries,
    ClimatologyTable,
    quarter_matrix,
    regional_anomaly,
)
from .errors import EmptySplit, LengthMismatch, ShapeMismatch
from .grid import GeoBounds, SpatioTemporalGrid, TimeStamp, Variable
from .preprocess import NormalizationParams, WindowSample, denormalize

GATE_ORDER = ("input", "forget", "output", "candidate")


@dataclass(frozen=True)
class ConvLstmCellConfig:
    hidden_channels: int
    kernel_size: int = 3


@dataclass(frozen=True)
class ConvLstmXtConfig:
    """Two ConvLSTM blocks plus a fully-connected head."""

    blocks: tuple[ConvLstmCellConfig, ConvLstmCellConfig] = (
        ConvLstmCellConfig(16), ConvLstmCellConfig(8))
    fc_dims: tuple[int, ...] = (64,)
    dropout_rate: float = 0.3
    horizon: int = 7
    in_channels: int = 2

    def __post_init__(self):
        if len(self.blocks) != 2:
            raise ValueError("exactly 2 ConvLSTM blocks required")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")


@dataclass(frozen=True)
class CnnForecasterConfig:
    """Conv feature extractor over an anomaly-field window, dense head,
    five quarterly anomaly outputs."""

    window_len: int = 12
    conv_channels: tuple[int, ...] = (8,)
    kernel_size: int = 3
    fc_dims: tuple[int, ...] = (32,)

    N_OUTPUTS = 5

    def __post_init__(self):
        if len(self.conv_channels) < 1:
            raise ValueError("at least one conv layer required")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    lr: float = 0.001
    batch_size: int = 32
    split: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.split < 1.0:
            raise ValueError("split fraction must be in (0, 1)")


def _uniform_init(rng, shape, fan_in):
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, shape)


class ConvLstmCell:
    """Gate parameters of one ConvLSTM cell.

    Kernels are stored fused over the four gates in GATE_ORDER; the forget
    gate bias starts at 1.0, everything else uniform in +-1/sqrt(fan_in).
    """

    def __init__(self, in_channels, hidden_channels, kernel_size, rng, name):
        c, k = hidden_channels, kernel_size
        self.in_channels = in_channels
        self.hidden_channels = c
        self.kernel_size = k
        self.name = name
        self.w_x = Tensor(_uniform_init(rng, (4 * c, in_channels, k, k),
                                        in_channels * k * k),
                          requires_grad=True, name=f"{name}.w_x")
        self.w_h = Tensor(_uniform_init(rng, (4 * c, c, k, k), c * k * k),
                          requires_grad=True, name=f"{name}.w_h")
        bias = np.zeros(4 * c)
        bias[c:2 * c] = 1.0  # forget gate opens by default
        self.bias = Tensor(bias, requires_grad=True, name=f"{name}.bias")

    def parameters(self):
        return [self.w_x, self.w_h, self.bias]

    def gate(self, which: str) -> dict[str, np.ndarray]:
        """Per-gate views (input kernels, hidden kernels, bias) by gate name."""
        i = GATE_ORDER.index(which)
        c = self.hidden_channels
        sl = slice(i * c, (i + 1) * c)
        return {"w_x": self.w_x.data[sl], "w_h": self.w_h.data[sl],
                "b": self.bias.data[sl]}


def cell_step(cell: ConvLstmCell, x: Tensor, h_prev: Tensor,
              c_prev: Tensor) -> tuple[Tensor, Tensor]:
    """One ConvLSTM step: i,f,o = sigmoid(conv(x) + conv(h)), g = tanh(...),
    c_t = f*c_prev + i*g, h_t = o*tanh(c_t). Shapes are preserved."""
    gates = add(conv2d(x, cell.w_x, cell.bias), conv2d(h_prev, cell.w_h))
    c = cell.hidden_channels
    i = sigmoid(slice_channels(gates, 0, c))
    f = sigmoid(slice_channels(gates, c, 2 * c))
    o = sigmoid(slice_channels(gates, 2 * c, 3 * c))
    g = tanh(slice_channels(gates, 3 * c, 4 * c))
    c_t = add(hadamard(f, c_prev), hadamard(i, g))
    h_t = hadamard(o, tanh(c_t))
    return h_t, c_t


class _DenseHead:
    """Stack of dense layers; hidden layers get ReLU (and optional dropout)."""

    def __init__(self, in_dim, hidden_dims, out_dim, rng, name,
                 dropout_rate=0.0):
        self.dropout_rate = dropout_rate
        self.layers = []
        prev = in_dim
        for idx, dim in enumerate(list(hidden_dims) + [out_dim]):
            w = Tensor(_uniform_init(rng, (dim, prev), prev),
                       requires_grad=True, name=f"{name}.fc{idx}.w")
            b = Tensor(np.zeros(dim), requires_grad=True, name=f"{name}.fc{idx}.b")
            self.layers.append((w, b))
            prev = dim

    def parameters(self):
        return [t for w, b in self.layers for t in (w, b)]

    def forward(self, x: Tensor, mode: str, seed: int) -> Tensor:
        for idx, (w, b) in enumerate(self.layers):
            x = dense(x, w, b)
            if idx < len(self.layers) - 1:
                x = relu(x)
                if self.dropout_rate:
                    x = dropout(x, self.dropout_rate, mode, seed=seed + idx)
        return x


class ConvLstmXt:
    """Two stacked ConvLSTM blocks and a dense head over the final hidden
    state, reshaped to one predicted grid per horizon month."""

    def __init__(self, cfg: ConvLstmXtConfig, grid_shape: tuple[int, int],
                 seed: int = 0):
        self.cfg = cfg
        self.grid_shape = grid_shape
        rng = np.random.default_rng(seed)
        b1, b2 = cfg.blocks
        self.block1 = ConvLstmCell(cfg.in_channels, b1.hidden_channels,
                                   b1.kernel_size, rng, "block1")
        self.block2 = ConvLstmCell(b1.hidden_channels, b2.hidden_channels,
                                   b2.kernel_size, rng, "block2")
        h, w = grid_shape
        self.head = _DenseHead(b2.hidden_channels * h * w, cfg.fc_dims,
                               cfg.horizon * h * w, rng, "head",
                               dropout_rate=cfg.dropout_rate)

    def parameters(self):
        return (self.block1.parameters() + self.block2.parameters()
                + self.head.parameters())

    def forward(self, inputs: np.ndarray, mode: str = "eval",
                dropout_seed: int = 0) -> Tensor:
        """inputs [batch, window, channels, lat, lon] -> [batch, horizon, lat, lon]."""
        if inputs.ndim != 5:
            raise ShapeMismatch(f"expected 5D batch input, got {inputs.shape}")
        n, t_len, channels, h, w = inputs.shape
        if channels != self.cfg.in_channels or (h, w) != self.grid_shape:
            raise ShapeMismatch(f"input {inputs.shape} does not match model "
                                f"({self.cfg.in_channels} channels, "
                                f"grid {self.grid_shape})")
        c1, c2 = (self.block1.hidden_channels, self.block2.hidden_channels)
        h1 = Tensor(np.zeros((n, c1, h, w)))
        s1 = Tensor(np.zeros((n, c1, h, w)))
        hidden_seq = []
        for t in range(t_len):
            h1, s1 = cell_step(self.block1, Tensor(inputs[:, t]), h1, s1)
            hidden_seq.append(h1)
        h2 = Tensor(np.zeros((n, c2, h, w)))
        s2 = Tensor(np.zeros((n, c2, h, w)))
        for h1_t in hidden_seq:
            h2, s2 = cell_step(self.block2, h1_t, h2, s2)
        flat = reshape(h2, (n, c2 * h * w))
        out = self.head.forward(flat, mode, dropout_seed)
        return reshape(out, (n, self.cfg.horizon, h, w))

    def loss(self, inputs, targets, mode="eval", dropout_seed=0) -> Tensor:
        pred = self.forward(inputs, mode, dropout_seed)
        return mse(pred, Tensor(np.asarray(targets, dtype=np.float64)))

    def named_parameters(self) -> dict[str, np.ndarray]:
        return {p.name: p.data for p in self.parameters()}

    def load_named(self, named: dict[str, np.ndarray]) -> None:
        for p in self.parameters():
            arr = named[p.name]
            if arr.shape != p.data.shape:
                raise ShapeMismatch(f"{p.name}: checkpoint shape {arr.shape} "
                                    f"vs model {p.data.shape}")
            p.data = np.array(arr, dtype=np.float64)


class CnnForecaster:
    """Conv layers with ReLU over the anomaly window, then a dense head to
    the five quarterly anomalies (degC)."""

    def __init__(self, cfg: CnnForecasterConfig, grid_shape: tuple[int, int],
                 seed: int = 0):
        self.cfg = cfg
        self.grid_shape = grid_shape
        rng = np.random.default_rng(seed)
        k = cfg.kernel_size
        self.convs = []
        prev = cfg.window_len
        for idx, ch in enumerate(cfg.conv_channels):
            kern = Tensor(_uniform_init(rng, (ch, prev, k, k), prev * k * k),
                          requires_grad=True, name=f"conv{idx}.k")
            bias = Tensor(np.zeros(ch), requires_grad=True, name=f"conv{idx}.b")
            self.convs.append((kern, bias))
            prev = ch
        h, w = grid_shape
        self.head = _DenseHead(prev * h * w, cfg.fc_dims, cfg.N_OUTPUTS,
                               rng, "head")

    def parameters(self):
        return [t for kern, bias in self.convs for t in (kern, bias)] \
            + self.head.parameters()

    def forward(self, inputs: np.ndarray, mode: str = "eval",
                dropout_seed: int = 0) -> Tensor:
        """inputs [batch, window, lat, lon] -> [batch, 5] quarterly anomalies."""
        if inputs.ndim != 4:
            raise ShapeMismatch(f"expected 4D batch input, got {inputs.shape}")
        n = inputs.shape[0]
        if inputs.shape[1] != self.cfg.window_len or inputs.shape[2:] != self.grid_shape:
            raise ShapeMismatch(f"input {inputs.shape} does not match model "
                                f"(window {self.cfg.window_len}, grid "
                                f"{self.grid_shape})")
        x = Tensor(np.asarray(inputs, dtype=np.float64))
        for kern, bias in self.convs:
            x = relu(conv2d(x, kern, bias))
        h, w = self.grid_shape
        flat = reshape(x, (n, self.convs[-1][0].data.shape[0] * h * w))
        return self.head.forward(flat, mode, dropout_seed)

    def loss(self, inputs, targets, mode="eval", dropout_seed=0) -> Tensor:
        pred = self.forward(inputs, mode, dropout_seed)
        return mse(pred, Tensor(np.asarray(targets, dtype=np.float64)))

    def named_parameters(self) -> dict[str, np.ndarray]:
        return {p.name: p.data for p in self.parameters()}

    def load_named(self, named: dict[str, np.ndarray]) -> None:
        for p in self.parameters():
            arr = named[p.name]
            if arr.shape != p.data.shape:
                raise ShapeMismatch(f"{p.name}: checkpoint shape {arr.shape} "
                                    f"vs model {p.data.shape}")
            p.data = np.array(arr, dtype=np.float64)


def split_train_test(n: int, split: float) -> tuple[int, int]:
    """Chronological split sizes: first n_train anchors train, rest test.

    Half-up rounding, so 267 anchors at 0.8 give a 214/53 split.
    """
    n_train = int(math.floor(n * split + 0.5))
    n_test = n - n_train
    if n_train < 1 or n_test < 1:
        raise EmptySplit(f"split {split} of {n} samples leaves an empty side")
    return n_train, n_test


def _dropout_seed(base_seed: int, step: int) -> int:
    return (base_seed + 1) * 1_000_003 + step


def train(model, inputs: np.ndarray, targets: np.ndarray,
          tc: TrainConfig) -> tuple[list[tuple[int, float, float]], AdamState]:
    """Minibatch Adam over the chronological training split.

    ``inputs``/``targets`` must be ordered by anchor time. Returns the
    per-epoch (epoch, train_mse, test_mse) history and the optimizer state;
    the model parameters are updated in place. Fully deterministic for a
    fixed tc.seed (shuffle and dropout streams are derived from it).
    """
    n = len(inputs)
    if n != len(targets):
        raise ShapeMismatch("inputs and targets differ in length")
    n_train, _ = split_train_test(n, tc.split)
    params = model.parameters()
    state = AdamState.init(params)
    shuffle_rng = np.random.default_rng(tc.seed)
    history = []
    step = 0
    for epoch in range(1, tc.epochs + 1):
        perm = shuffle_rng.permutation(n_train)
        loss_sum = 0.0
        for lo in range(0, n_train, tc.batch_size):
            idx = perm[lo:lo + tc.batch_size]
            loss = model.loss(inputs[idx], targets[idx], mode="train",
                              dropout_seed=_dropout_seed(tc.seed, step))
            grads = backward(loss, params)
            adam_step(params, grads, state, tc.lr)
            loss_sum += loss.item() * len(idx)
            step += 1
        train_mse = loss_sum / n_train
        test_mse = model.loss(inputs[n_train:], targets[n_train:]).item()
        history.append((epoch, train_mse, test_mse))
    return history, state


def write_loss_curve(history, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "train_mse", "test_mse"])
        for epoch, train_mse, test_mse in history:
            writer.writerow([epoch, repr(train_mse), repr(test_mse)])


def predict_quarter_anomalies(pred_grids: np.ndarray, start: TimeStamp,
                              norm: NormalizationParams, clim: ClimatologyTable,
                              bounds: GeoBounds) -> np.ndarray:
    """Five overlapping quarterly anomalies (degC) from 7 predicted grids.

    Denormalizes the grids, forms the regional anomaly against the
    climatology month by month, then takes the five 3-month means.
    """
    grids = np.asarray(pred_grids, dtype=np.float64)
    if grids.ndim != 3 or grids.shape[0] != 7:
        raise ShapeMismatch(f"expected 7 predicted grids, got {grids.shape}")
    grid = SpatioTemporalGrid(Variable.SST, clim.axes, start,
                              denormalize(grids, norm))
    series = regional_anomaly(grid, clim, bounds)
    return quarter_matrix(series, 1).quarters[0]


def observed_quarters(series: AnomalySeries, start: TimeStamp) -> np.ndarray:
    """The observed quarter row anchored at ``start`` (needs 7 months)."""
    offset = series.start.months_until(start)
    window = series.values[offset:offset + 7]
    if offset < 0 or len(window) < 7:
        raise ShapeMismatch(f"anomaly series does not cover 7 months from {start}")
    sub = AnomalySeries(start, window)
    return quarter_matrix(sub, 1).quarters[0]


def ensemble(cnn_q, lstm_q) -> np.ndarray:
    """Elementwise mean of the two five-quarter forecasts."""
    a = np.asarray(cnn_q, dtype=np.float64)
    b = np.asarray(lstm_q, dtype=np.float64)
    if a.shape != (5,) or b.shape != (5,):
        raise LengthMismatch(f"expected two length-5 vectors, got {a.shape} "
                             f"and {b.shape}")
    return (a + b) / 2.0


def stack_inputs(samples: list[WindowSample]) -> np.ndarray:
    return np.stack([s.inputs for s in samples])


def stack_targets(samples: list[WindowSample]) -> np.ndarray:
    return np.stack([s.targets for s in samples])

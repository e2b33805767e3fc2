"""Small dense-tensor engine with reverse-mode differentiation.

Covers exactly what the two forecasters need: same-padding 2D convolution
(cross-correlation, the deep-learning convention), pointwise activations,
dense layers, inverted dropout, MSE loss, and Adam. Everything is float64;
numpy supplies storage and matrix products, all derivatives are written here.

Ops build an acyclic graph on `Tensor` objects (the tape); `backward` walks
it in reverse topological order exactly once and returns per-parameter
gradients.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import BadRate, NotScalar, ShapeMismatch

log = logging.getLogger("nino.autodiff")


class Tensor:
    """A dense float64 array plus the graph bookkeeping for backprop."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"


def _from_op(data, parents, backward_fn) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.requires_grad:
        if t.grad is None:
            t.grad = np.zeros_like(t.data)
        t.grad += g


def topo_order(root: Tensor) -> list[Tensor]:
    """Parents-before-children ordering of the graph reachable from root."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            stack.append((p, False))
    return order


def backward(loss: Tensor, params: list[Tensor]) -> list[np.ndarray]:
    """Gradients of a scalar loss w.r.t. each parameter tensor.

    Parameters not connected to the loss get a zero gradient and a warning.
    Also leaves .grad populated on every reachable tensor that requires grad.
    """
    if loss.data.size != 1:
        raise NotScalar(f"loss must be scalar, got shape {loss.shape}")
    order = topo_order(loss)
    for node in order:
        node.grad = None
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    in_graph = {id(n) for n in order}
    grads = []
    for p in params:
        if id(p) not in in_graph:
            log.warning("parameter %s not reached by the loss graph; gradient 0",
                        p.name or "<unnamed>")
            grads.append(np.zeros_like(p.data))
        else:
            grads.append(p.grad if p.grad is not None else np.zeros_like(p.data))
    return grads


# ---- pointwise ops ----

def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeMismatch(f"add: {a.shape} vs {b.shape}")

    def back(g):
        _accumulate(a, g)
        _accumulate(b, g)

    return _from_op(a.data + b.data, (a, b), back)


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeMismatch(f"hadamard: {a.shape} vs {b.shape}")

    def back(g):
        _accumulate(a, g * b.data)
        _accumulate(b, g * a.data)

    return _from_op(a.data * b.data, (a, b), back)


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    out = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))),
                   np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))))

    def back(g):
        _accumulate(x, g * out * (1.0 - out))

    return _from_op(out, (x,), back)


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def back(g):
        _accumulate(x, g * (1.0 - out * out))

    return _from_op(out, (x,), back)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def back(g):
        _accumulate(x, g * mask)

    return _from_op(x.data * mask, (x,), back)


_POINTWISE = {"sigmoid": sigmoid, "tanh": tanh, "relu": relu,
              "hadamard": hadamard, "add": add}


def pointwise(op: str, *args: Tensor) -> Tensor:
    """Dispatch an elementwise op by name: sigmoid|tanh|relu|hadamard|add."""
    try:
        fn = _POINTWISE[op]
    except KeyError:
        raise ValueError(f"unknown pointwise op {op!r}") from None
    return fn(*args)


# ---- shape plumbing ----

def reshape(x: Tensor, shape) -> Tensor:
    shape = tuple(shape)

    def back(g):
        _accumulate(x, g.reshape(x.shape))

    return _from_op(x.data.reshape(shape), (x,), back)


def slice_channels(x: Tensor, lo: int, hi: int) -> Tensor:
    """Slice the channel axis (axis -3) of a [..., C, H, W] tensor."""

    def back(g):
        full = np.zeros_like(x.data)
        full[..., lo:hi, :, :] = g
        _accumulate(x, full)

    return _from_op(x.data[..., lo:hi, :, :].copy(), (x,), back)


# ---- layers ----

def dense(x: Tensor, weights: Tensor, bias: Tensor | None = None) -> Tensor:
    """y = W x + b for x of shape [n] or [batch, n]; W is [m, n], b is [m]."""
    w = weights.data
    if w.ndim != 2 or x.data.shape[-1] != w.shape[1]:
        raise ShapeMismatch(f"dense: x {x.shape} vs W {weights.shape}")
    if bias is not None and bias.data.shape != (w.shape[0],):
        raise ShapeMismatch(f"dense: bias {bias.shape} vs W {weights.shape}")
    y = x.data @ w.T
    if bias is not None:
        y = y + bias.data

    def back(g):
        if x.data.ndim == 1:
            _accumulate(weights, np.outer(g, x.data))
            _accumulate(x, g @ w)
            if bias is not None:
                _accumulate(bias, g)
        else:
            _accumulate(weights, g.T @ x.data)
            _accumulate(x, g @ w)
            if bias is not None:
                _accumulate(bias, g.sum(axis=0))

    parents = (x, weights) if bias is None else (x, weights, bias)
    return _from_op(y, parents, back)


def _im2col(x4: np.ndarray, k: int) -> np.ndarray:
    """[B, C, H, W] -> [B*H*W, C*k*k] patch matrix under same-padding."""
    p = k // 2
    xp = np.pad(x4, ((0, 0), (0, 0), (p, p), (p, p)))
    win = sliding_window_view(xp, (k, k), axis=(2, 3))  # [B, C, H, W, k, k]
    b, c, h, w = x4.shape
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(b * h * w, c * k * k)


def conv2d(x: Tensor, kernels: Tensor, bias: Tensor | None = None) -> Tensor:
    """Same-padding stride-1 2D cross-correlation.

    x is [C_in, H, W] or [batch, C_in, H, W]; kernels are
    [C_out, C_in, k, k] with k odd; bias, when given, is [C_out].
    Output spatial dims equal input dims.
    """
    kd = kernels.data
    if kd.ndim != 4 or kd.shape[2] != kd.shape[3]:
        raise ShapeMismatch(f"kernels must be [C_out, C_in, k, k], got {kernels.shape}")
    k = kd.shape[2]
    if k % 2 == 0:
        raise ShapeMismatch(f"kernel size must be odd, got {k}")
    batched = x.data.ndim == 4
    if x.data.ndim not in (3, 4) or x.data.shape[-3] != kd.shape[1]:
        raise ShapeMismatch(f"conv2d: input {x.shape} vs kernels {kernels.shape}")
    c_out = kd.shape[0]
    if bias is not None and bias.data.shape != (c_out,):
        raise ShapeMismatch(f"conv2d: bias {bias.shape} vs C_out {c_out}")

    x4 = x.data if batched else x.data[None]
    b, c_in, h, w = x4.shape
    cols = _im2col(x4, k)
    y = (cols @ kd.reshape(c_out, -1).T).reshape(b, h, w, c_out).transpose(0, 3, 1, 2)
    if bias is not None:
        y = y + bias.data[None, :, None, None]
    if not batched:
        y = y[0]

    def back(g):
        g4 = g if batched else g[None]
        g_flat = g4.transpose(0, 2, 3, 1).reshape(b * h * w, c_out)
        if kernels.requires_grad:
            # cols captured from the forward pass; avoids a second im2col
            _accumulate(kernels, (g_flat.T @ cols).reshape(kd.shape))
        if bias is not None and bias.requires_grad:
            _accumulate(bias, g4.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            # input gradient: correlate g with spatially flipped,
            # channel-transposed kernels
            kflip = kd[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)  # [C_in, C_out, k, k]
            cols_g = _im2col(g4, k)
            dx = (cols_g @ kflip.reshape(c_in, -1).T)
            dx = dx.reshape(b, h, w, c_in).transpose(0, 3, 1, 2)
            _accumulate(x, dx if batched else dx[0])

    parents = (x, kernels) if bias is None else (x, kernels, bias)
    return _from_op(y, parents, back)


def dropout(x: Tensor, rate: float, mode: str, seed: int = 0) -> Tensor:
    """Inverted dropout: eval mode is the identity; train mode zeroes each
    element with probability ``rate`` and scales survivors by 1/(1-rate).
    Deterministic for a fixed seed.
    """
    if not 0.0 <= rate < 1.0:
        raise BadRate(f"dropout rate must be in [0, 1), got {rate}")
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if mode == "eval" or rate == 0.0:
        return x
    rng = np.random.Generator(np.random.Philox(key=seed))
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)

    def back(g):
        _accumulate(x, g * mask)

    return _from_op(x.data * mask, (x,), back)


def mse(pred: Tensor, target: Tensor) -> Tensor:
    """Mean over all elements of (pred - target)^2, as a scalar tensor."""
    if pred.shape != target.shape:
        raise ShapeMismatch(f"mse: {pred.shape} vs {target.shape}")
    diff = pred.data - target.data
    n = diff.size

    def back(g):
        scaled = (2.0 / n) * diff * g
        _accumulate(pred, scaled)
        _accumulate(target, -scaled)

    return _from_op(np.asarray((diff * diff).mean()), (pred, target), back)


# ---- optimizer ----

@dataclass
class AdamState:
    """First/second moment estimates per parameter, plus the step count."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, params: list[Tensor], **kw) -> "AdamState":
        return cls(m=[np.zeros_like(p.data) for p in params],
                   v=[np.zeros_like(p.data) for p in params], **kw)


def adam_step(params: list[Tensor], grads: list[np.ndarray],
              state: AdamState, lr: float) -> AdamState:
    """One bias-corrected Adam update, applied to params in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeMismatch("params/grads/state lengths differ")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.data.shape != g.shape:
            raise ShapeMismatch(f"grad shape {g.shape} vs param {p.data.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return state


# ---- checkpoint format ----
# magic 'NINO', version u32, count u32, then per tensor:
# name length u32, name bytes (utf-8), rank u32, extents u32 each,
# raw little-endian float64 values. A JSON manifest sits alongside.

_MAGIC = b"NINO"
_VERSION = 1


def save_checkpoint(named: dict[str, np.ndarray], path) -> None:
    path = str(path)
    manifest = {"version": _VERSION, "tensors": []}
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(named)))
        for name, arr in named.items():
            arr = np.asarray(arr, dtype="<f8")  # tobytes() yields C order
            nb = name.encode("utf-8")
            fh.write(struct.pack("<I", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())
            manifest["tensors"].append({"name": name, "shape": list(arr.shape)})
    with open(path + ".json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        version, count = struct.unpack("<II", fh.read(8))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        out: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", fh.read(4))
            name = fh.read(name_len).decode("utf-8")
            (rank,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack(f"<{rank}I", fh.read(4 * rank))
            n = int(np.prod(shape)) if rank else 1
            data = np.frombuffer(fh.read(8 * n), dtype="<f8").reshape(shape)
            out[name] = data.astype(np.float64)
        return out

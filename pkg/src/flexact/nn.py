"""Layers with hand-written backward passes, LSTM stacks and conv autoencoders.

Models keep the activations of the last forward call and are therefore
single-writer: call ``forward`` then ``backward`` on the same instance.
Gradients accumulate into :class:`~flexact.tensor.Parameter` objects.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .activations import Activation, check_kind
from .tensor import (
    DTYPE,
    DimensionError,
    Parameter,
    conv2d,
    conv2d_backward,
    conv_output_size,
    conv_transpose2d,
    conv_transpose2d_backward,
    conv_transpose_output_size,
    maxpool2d,
    maxpool2d_backward,
)


class ModelSpecError(ValueError):
    pass


def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def mse(pred, target):
    """Mean squared error over every element and its gradient w.r.t. ``pred``."""
    pred = np.asarray(pred, dtype=DTYPE)
    diff = pred - np.asarray(target, dtype=DTYPE)
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


class Dense:
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, name: str = "dense"):
        self.weight = Parameter(uniform_init(rng, (n_in, n_out), n_in), f"{name}.weight")
        self.bias = Parameter(uniform_init(rng, (n_out,), n_in), f"{name}.bias")
        self._x = None

    def forward(self, x):
        x = np.asarray(x, dtype=DTYPE)
        if x.shape[-1] != self.weight.shape[0]:
            raise DimensionError(f"dense layer expects {self.weight.shape[0]} inputs, got {x.shape}")
        self._x = x
        return x @ self.weight.value + self.bias.value

    def backward(self, grad):
        self.weight.grad += self._x.T @ grad
        self.bias.grad += grad.sum(axis=0)
        return grad @ self.weight.value.T

    def parameters(self):
        return [self.weight, self.bias]


# -- LSTM -------------------------------------------------------------------


class LstmCell:
    """One LSTM layer.

    Gate weights are stacked column-wise in the order forget, input, output,
    candidate: ``w_x`` is ``d_in x 4h``, ``w_h`` is ``h x 4h``, ``b`` is
    ``4h``. Each of the three sigmoid-domain gates owns its own activation
    block; ``cell_act`` replaces the candidate tanh and ``squash_act`` the
    tanh applied to the cell state.
    """

    def __init__(
        self,
        n_in: int,
        hidden: int,
        rng: np.random.Generator | None = None,
        gate: str = "sigmoid",
        cell: str = "tanh",
        squash: str = "tanh",
        name: str = "lstm",
    ):
        self.n_in = n_in
        self.hidden = hidden
        fan_in = n_in + hidden
        if rng is None:
            w_x = np.zeros((n_in, 4 * hidden))
            w_h = np.zeros((hidden, 4 * hidden))
            b = np.zeros(4 * hidden)
        else:
            w_x = uniform_init(rng, (n_in, 4 * hidden), fan_in)
            w_h = uniform_init(rng, (hidden, 4 * hidden), fan_in)
            b = uniform_init(rng, (4 * hidden,), fan_in)
        self.w_x = Parameter(w_x, f"{name}.w_x")
        self.w_h = Parameter(w_h, f"{name}.w_h")
        self.b = Parameter(b, f"{name}.b")
        self.gate_acts = [Activation(gate, hidden, name=f"{name}.{g}") for g in ("forget", "input", "output")]
        self.cell_act = Activation(cell, hidden, name=f"{name}.candidate")
        self.squash_act = Activation(squash, hidden, name=f"{name}.squash")

    def activations(self) -> list[Activation]:
        return [*self.gate_acts, self.cell_act, self.squash_act]

    def parameters(self) -> list[Parameter]:
        params = [self.w_x, self.w_h, self.b]
        for act in self.activations():
            params += act.parameters()
        return params

    def weight_parameters(self) -> list[Parameter]:
        return [self.w_x, self.w_h]


class StepCache(NamedTuple):
    cell: LstmCell
    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    z: np.ndarray
    f: np.ndarray
    i: np.ndarray
    o: np.ndarray
    g: np.ndarray
    c: np.ndarray
    s: np.ndarray


class CacheError(RuntimeError):
    pass


def lstm_cell_step(x, h_prev, c_prev, cell: LstmCell):
    """Advance one time step for a batch; returns ``(h, c, cache)``."""
    x = np.atleast_2d(np.asarray(x, dtype=DTYPE))
    h_prev = np.atleast_2d(np.asarray(h_prev, dtype=DTYPE))
    c_prev = np.atleast_2d(np.asarray(c_prev, dtype=DTYPE))
    if x.shape[1] != cell.n_in or h_prev.shape[1] != cell.hidden or c_prev.shape != h_prev.shape:
        raise DimensionError(
            f"cell ({cell.n_in} -> {cell.hidden}) got x {x.shape}, h {h_prev.shape}, c {c_prev.shape}"
        )
    n = cell.hidden
    z = x @ cell.w_x.value + h_prev @ cell.w_h.value + cell.b.value
    f, i, o = (act(z[:, k * n : (k + 1) * n]) for k, act in enumerate(cell.gate_acts))
    g = cell.cell_act(z[:, 3 * n :])
    c = f * c_prev + i * g
    s = cell.squash_act(c)
    h = o * s
    return h, c, StepCache(cell, x, h_prev, c_prev, z, f, i, o, g, c, s)


def lstm_cell_backward(grad_h, grad_c, cache: StepCache, cell: LstmCell):
    """Reverse-mode step through one cell.

    ``grad_h`` and ``grad_c`` are the loss sensitivities of this step's
    outputs. Returns ``(grad_x, grad_h_prev, grad_c_prev, grads)`` where
    ``grads`` maps ``w_x``, ``w_h``, ``b`` and each activation block name to
    its gradient (``None`` for fixed activations). Nothing is accumulated.
    """
    if cache.cell is not cell:
        raise CacheError("cache was produced by a different cell")
    grad_h = np.broadcast_to(np.asarray(grad_h, dtype=DTYPE), cache.h_prev.shape)
    grad_c = np.broadcast_to(np.asarray(grad_c, dtype=DTYPE), cache.c_prev.shape)
    n = cell.hidden
    grads = {}

    d_o = grad_h * cache.s
    dc, grads[cell.squash_act.name] = cell.squash_act.backward(cache.c, grad_h * cache.o)
    dc = dc + grad_c
    d_f = dc * cache.c_prev
    d_i = dc * cache.g
    d_g = dc * cache.i
    grad_c_prev = dc * cache.f

    dz = np.empty_like(cache.z)
    for k, (act, d) in enumerate(zip(cell.gate_acts, (d_f, d_i, d_o))):
        dz[:, k * n : (k + 1) * n], grads[act.name] = act.backward(cache.z[:, k * n : (k + 1) * n], d)
    dz[:, 3 * n :], grads[cell.cell_act.name] = cell.cell_act.backward(cache.z[:, 3 * n :], d_g)

    grads["w_x"] = cache.x.T @ dz
    grads["w_h"] = cache.h_prev.T @ dz
    grads["b"] = dz.sum(axis=0)
    grad_x = dz @ cell.w_x.value.T
    grad_h_prev = dz @ cell.w_h.value.T
    return grad_x, grad_h_prev, grad_c_prev, grads


def _accumulate(cell: LstmCell, grads: dict) -> None:
    cell.w_x.grad += grads["w_x"]
    cell.w_h.grad += grads["w_h"]
    cell.b.grad += grads["b"]
    for act in cell.activations():
        if act.trainable:
            act.param.grad += grads[act.name]


class StackedLstm:
    """LSTM layers followed by a dense head giving a one-step-ahead forecast.

    ``layer_sizes = [d, h1, h2, ...]``; the head maps ``h_last`` back to ``d``.
    """

    def __init__(
        self,
        layer_sizes,
        rng: np.random.Generator | None = None,
        gate: str = "sigmoid",
        cell: str = "tanh",
        squash: str = "tanh",
    ):
        if len(layer_sizes) < 2:
            raise ModelSpecError("an LSTM stack needs an input size and at least one hidden size")
        self.layer_sizes = list(layer_sizes)
        self.cells = [
            LstmCell(a, b, rng, gate, cell, squash, name=f"lstm{j}")
            for j, (a, b) in enumerate(zip(layer_sizes[:-1], layer_sizes[1:]))
        ]
        if rng is None:
            self.head = Dense(layer_sizes[-1], layer_sizes[0], np.random.default_rng(0), name="head")
            self.head.weight.value[...] = 0.0
            self.head.bias.value[...] = 0.0
        else:
            self.head = Dense(layer_sizes[-1], layer_sizes[0], rng, name="head")
        self._caches = None

    def forward(self, seq):
        seq = np.asarray(seq, dtype=DTYPE)
        single = seq.ndim == 2
        if single:
            seq = seq[None]
        if seq.ndim != 3 or seq.shape[2] != self.layer_sizes[0] or seq.shape[1] < 1:
            raise DimensionError(f"expected batch x T x {self.layer_sizes[0]} input, got {seq.shape}")
        batch, steps, _ = seq.shape
        inputs = [seq[:, t] for t in range(steps)]
        self._caches = []
        for cell in self.cells:
            h = np.zeros((batch, cell.hidden))
            c = np.zeros((batch, cell.hidden))
            caches = []
            outputs = []
            for x in inputs:
                h, c, cache = lstm_cell_step(x, h, c, cell)
                caches.append(cache)
                outputs.append(h)
            self._caches.append(caches)
            inputs = outputs
        pred = self.head.forward(inputs[-1])
        return pred[0] if single else pred

    def backward(self, grad_pred):
        grad_pred = np.atleast_2d(np.asarray(grad_pred, dtype=DTYPE))
        grad_hs = [None] * len(self._caches[0])
        grad_hs[-1] = self.head.backward(grad_pred)
        for cell, caches in zip(reversed(self.cells), reversed(self._caches)):
            batch = caches[0].x.shape[0]
            dh_next = np.zeros((batch, cell.hidden))
            dc_next = np.zeros((batch, cell.hidden))
            grad_inputs = [None] * len(caches)
            for t in reversed(range(len(caches))):
                dh = dh_next if grad_hs[t] is None else dh_next + grad_hs[t]
                grad_inputs[t], dh_next, dc_next, grads = lstm_cell_backward(dh, dc_next, caches[t], cell)
                _accumulate(cell, grads)
            grad_hs = grad_inputs
        return np.stack(grad_hs, axis=1)

    def parameters(self) -> list[Parameter]:
        params = []
        for cell in self.cells:
            params += cell.parameters()
        return params + self.head.parameters()

    def weight_parameters(self) -> list[Parameter]:
        params = []
        for cell in self.cells:
            params += cell.weight_parameters()
        return params + [self.head.weight]

    def activation_blocks(self) -> list[Activation]:
        return [act for cell in self.cells for act in cell.activations()]


# -- convolutional autoencoders ---------------------------------------------


@dataclass
class ConvLayerSpec:
    """One stage of a conv stack.

    ``op`` is ``conv``, ``deconv`` (fractionally-strided) or ``pool``;
    ``channels`` is the output channel count (ignored for pooling).
    """

    op: str
    channels: int = 0
    kernel: int = 2
    stride: int = 1
    padding: int = 0
    activation: str | None = None


def _conv(c, k, s, act, p=0):
    return ConvLayerSpec("conv", c, k, s, p, act)


def _deconv(c, k, s, act, p=0):
    return ConvLayerSpec("deconv", c, k, s, p, act)


def _pool(k, s):
    return ConvLayerSpec("pool", 0, k, s)


CAE_PRESETS = {
    "cae1": ((1, 28, 28), [_conv(16, 3, 3, "relu"), _pool(2, 2), _deconv(8, 5, 3, "relu"), _deconv(1, 2, 2, "tanh")]),
    "cae2": (
        (1, 28, 28),
        [
            _conv(16, 3, 3, "relu", 1),
            _pool(2, 2),
            _conv(8, 3, 2, "relu", 1),
            _pool(2, 1),
            _deconv(16, 3, 2, "relu"),
            _deconv(8, 5, 3, "relu", 1),
            _deconv(1, 2, 2, "tanh", 1),
        ],
    ),
    "cae3": (
        (3, 32, 32),
        [
            _conv(12, 4, 2, "relu", 1),
            _conv(24, 4, 2, "relu", 1),
            _conv(48, 4, 2, "relu", 1),
            _deconv(24, 4, 2, "relu", 1),
            _deconv(12, 4, 2, "relu", 1),
            _deconv(3, 4, 2, "relu", 1),
        ],
    ),
    # desk-scale stack used by the gradient checks
    "toy": (
        (1, 10, 10),
        [_conv(3, 3, 1, "relu", 1), _pool(2, 2), _deconv(2, 2, 2, "relu"), _conv(1, 3, 1, "tanh", 1)],
    ),
}


def cae_preset(name: str, activation: str | None = None):
    """Return ``(input_shape, layers)`` for a named stack.

    When ``activation`` is given it replaces every ReLU position.
    """
    if name not in CAE_PRESETS:
        raise ModelSpecError(f"unknown autoencoder preset {name!r}")
    shape, layers = CAE_PRESETS[name]
    out = []
    for spec in layers:
        spec = ConvLayerSpec(**asdict(spec))
        if activation is not None and spec.activation == "relu":
            spec.activation = check_kind(activation)
        out.append(spec)
    return shape, out


class _ConvLayer:
    def __init__(self, spec: ConvLayerSpec, c_in: int, rng, name: str):
        self.spec = spec
        k = spec.kernel
        if spec.op == "conv":
            shape = (spec.channels, c_in, k, k)
            fan_in = c_in * k * k
        else:
            shape = (c_in, spec.channels, k, k)
            fan_in = spec.channels * k * k
        if rng is None:
            w = np.zeros(shape)
            b = np.zeros(spec.channels)
        else:
            w = uniform_init(rng, shape, fan_in)
            b = uniform_init(rng, (spec.channels,), fan_in)
        self.weight = Parameter(w, f"{name}.weight")
        self.bias = Parameter(b, f"{name}.bias")
        self._x = None

    def forward(self, x):
        self._x = x
        fn = conv2d if self.spec.op == "conv" else conv_transpose2d
        return fn(x, self.weight.value, self.bias.value, self.spec.stride, self.spec.padding)

    def backward(self, grad):
        fn = conv2d_backward if self.spec.op == "conv" else conv_transpose2d_backward
        gx, gw, gb = fn(grad, self._x, self.weight.value, self.spec.stride, self.spec.padding)
        self.weight.grad += gw
        self.bias.grad += gb
        return gx

    def parameters(self):
        return [self.weight, self.bias]


class _PoolLayer:
    def __init__(self, spec: ConvLayerSpec):
        self.spec = spec
        self._cache = None

    def forward(self, x):
        out, idx = maxpool2d(x, self.spec.kernel, self.spec.stride)
        self._cache = (idx, x.shape)
        return out

    def backward(self, grad):
        idx, shape = self._cache
        return maxpool2d_backward(grad, idx, shape, self.spec.kernel, self.spec.stride)

    def parameters(self):
        return []


class _ActLayer:
    def __init__(self, act: Activation):
        self.act = act
        self._z = None

    def forward(self, z):
        self._z = z
        return self.act(z)

    def backward(self, grad):
        gz, gp = self.act.backward(self._z, grad)
        if gp is not None:
            self.act.param.grad += gp
        return gz

    def parameters(self):
        return self.act.parameters()


class ConvAutoencoder:
    """Sequential conv / pool / fractionally-strided conv stack.

    Activations after conv stages are channel-shared: one parameter block
    per output channel.
    """

    def __init__(self, input_shape, layers, rng: np.random.Generator | None = None):
        self.input_shape = tuple(input_shape)
        self.specs = list(layers)
        self.layers = []
        c, h, w = self.input_shape
        for j, spec in enumerate(self.specs):
            if spec.op == "pool":
                if spec.kernel > h or spec.kernel > w:
                    raise ModelSpecError(f"layer {j}: pool {spec.kernel} larger than feature map {h}x{w}")
                self.layers.append(_PoolLayer(spec))
                h = conv_output_size(h, spec.kernel, spec.stride)
                w = conv_output_size(w, spec.kernel, spec.stride)
                continue
            if spec.op not in ("conv", "deconv"):
                raise ModelSpecError(f"layer {j}: unknown op {spec.op!r}")
            if spec.channels < 1:
                raise ModelSpecError(f"layer {j}: channel count must be positive")
            self.layers.append(_ConvLayer(spec, c, rng, f"layer{j}"))
            c = spec.channels
            if spec.op == "conv":
                if h + 2 * spec.padding < spec.kernel or w + 2 * spec.padding < spec.kernel:
                    raise ModelSpecError(f"layer {j}: kernel {spec.kernel} larger than feature map {h}x{w}")
                h = conv_output_size(h, spec.kernel, spec.stride, spec.padding)
                w = conv_output_size(w, spec.kernel, spec.stride, spec.padding)
            else:
                h = conv_transpose_output_size(h, spec.kernel, spec.stride, spec.padding)
                w = conv_transpose_output_size(w, spec.kernel, spec.stride, spec.padding)
            if h < 1 or w < 1:
                raise ModelSpecError(f"layer {j}: feature map collapsed to {h}x{w}")
            if spec.activation is not None:
                self.layers.append(_ActLayer(Activation(spec.activation, c, axis=1, name=f"layer{j}.act")))
        self.output_shape = (c, h, w)

    def forward(self, x):
        x = np.asarray(x, dtype=DTYPE)
        if tuple(x.shape[-3:]) != self.input_shape or x.ndim not in (3, 4):
            raise DimensionError(f"expected input {self.input_shape}, got {x.shape}")
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def parameters(self) -> list[Parameter]:
        return [p for layer in self.layers for p in layer.parameters()]

    def weight_parameters(self) -> list[Parameter]:
        return [layer.weight for layer in self.layers if isinstance(layer, _ConvLayer)]

    def activation_blocks(self) -> list[Activation]:
        return [layer.act for layer in self.layers if isinstance(layer, _ActLayer)]


# -- declarative specs ------------------------------------------------------


@dataclass
class ModelSpec:
    """Serializable model description used by experiment configs."""

    kind: str = "lstm"
    layer_sizes: list[int] = field(default_factory=lambda: [7, 10])
    gate_activation: str = "sigmoid"
    cell_activation: str = "tanh"
    squash_activation: str = "tanh"
    preset: str | None = None
    activation: str | None = None
    input_shape: list[int] | None = None
    layers: list[ConvLayerSpec] | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        d = dict(d)
        if d.get("layers") is not None:
            d["layers"] = [ConvLayerSpec(**layer) for layer in d["layers"]]
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ModelSpecError(f"unknown model keys: {sorted(unknown)}")
        spec = cls(**d)
        spec.validate()
        return spec

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> None:
        if self.kind == "lstm":
            if len(self.layer_sizes) < 2 or any(int(n) < 1 for n in self.layer_sizes):
                raise ModelSpecError(f"invalid LSTM layer sizes {self.layer_sizes}")
            for kind in (self.gate_activation, self.cell_activation, self.squash_activation):
                check_kind(kind)
        elif self.kind == "cae":
            if self.layers is None and self.preset is None:
                raise ModelSpecError("an autoencoder needs either a preset or an explicit layer list")
            if self.layers is not None and self.input_shape is None:
                raise ModelSpecError("an explicit layer list needs input_shape")
            if self.activation is not None:
                check_kind(self.activation)
        else:
            raise ModelSpecError(f"unknown model kind {self.kind!r}")

    def conv_stack(self):
        if self.layers is not None:
            layers = [ConvLayerSpec(**asdict(s)) for s in self.layers]
            if self.activation is not None:
                for s in layers:
                    if s.activation == "relu":
                        s.activation = self.activation
            return tuple(self.input_shape), layers
        return cae_preset(self.preset, self.activation)

    def build(self, rng: np.random.Generator | None = None):
        self.validate()
        if self.kind == "lstm":
            return StackedLstm(self.layer_sizes, rng, self.gate_activation, self.cell_activation, self.squash_activation)
        shape, layers = self.conv_stack()
        return ConvAutoencoder(shape, layers, rng)


def count_parameters(model, trainable_activation_only: bool = False) -> int:
    """Enumerate parameter array lengths of an instantiated model."""
    blocks = {id(b.param) for b in model.activation_blocks() if b.trainable}
    return sum(p.size for p in model.parameters() if (id(p) in blocks) == trainable_activation_only)

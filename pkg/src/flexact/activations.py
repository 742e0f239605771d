"""Fixed and trainable activation functions with closed-form derivatives.

Every trainable family is a weighted blend of simple components. Each
``*_grad`` function returns the partial derivatives of the output with
respect to the input followed by one array per trainable parameter, all
broadcast to the shape of ``z``.

Kink conventions: ``ReLU'(0) = 0``, ``ELU'(0) = 1`` and the ramp takes its
middle-branch derivative on the closed interval ``|z| <= 1 / (2 beta)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .tensor import DTYPE, Parameter

BETA_MIN = 1e-4
_GELU_C = np.sqrt(2.0 / np.pi)


class ActivationKindError(ValueError):
    """Raised when an operation is given the wrong family of activation."""


class ParameterRangeError(ValueError):
    """Raised when an activation parameter is outside its valid range."""


# -- components -------------------------------------------------------------


def _arr(z) -> np.ndarray:
    """Float view of ``z``; extended-precision input keeps its dtype."""
    z = np.asarray(z)
    return z if z.dtype == np.longdouble else z.astype(DTYPE, copy=False)


def sigmoid(z):
    z = _arr(z)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def relu(z):
    return np.maximum(_arr(z), 0.0)


def elu(z):
    z = _arr(z)
    return np.where(z > 0, z, np.expm1(np.minimum(z, 0.0)))


def elu_prime(z):
    z = _arr(z)
    return np.where(z >= 0, 1.0, np.exp(np.minimum(z, 0.0)))


def gelu(z):
    z = _arr(z)
    return 0.5 * z * (1.0 + np.tanh(_GELU_C * (z + 0.044715 * z**3)))


def _gelu_prime(z):
    t = np.tanh(_GELU_C * (z + 0.044715 * z**3))
    return 0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * _GELU_C * (1.0 + 3 * 0.044715 * z * z)


_BASELINES: dict[str, tuple[Callable, Callable]] = {
    "sigmoid": (sigmoid, lambda z: sigmoid(z) * (1.0 - sigmoid(z))),
    "tanh": (np.tanh, lambda z: 1.0 - np.tanh(z) ** 2),
    "relu": (relu, lambda z: (z > 0).astype(z.dtype)),
    "elu": (elu, elu_prime),
    "gelu": (gelu, _gelu_prime),
}


def baseline_eval(kind: str, z):
    """Evaluate a fixed (parameter-free) activation elementwise."""
    if kind not in _BASELINES:
        raise ActivationKindError(f"{kind!r} is not a fixed activation")
    return _BASELINES[kind][0](_arr(z))


def baseline_grad(kind: str, z):
    if kind not in _BASELINES:
        raise ActivationKindError(f"{kind!r} is not a fixed activation")
    return _BASELINES[kind][1](_arr(z))


def _check_beta(beta):
    if np.any(np.asarray(beta) < BETA_MIN):
        raise ParameterRangeError(f"ramp slope must be >= {BETA_MIN}, got min {np.min(beta)}")


def ramp01(z, beta):
    """Two-sided ramp: 0 below ``-1/(2 beta)``, 1 above ``1/(2 beta)``, linear between."""
    _check_beta(beta)
    return np.clip(beta * _arr(z) + 0.5, 0.0, 1.0)


def _ramp_middle(z, beta):
    half = 0.5 / beta
    return (z >= -half) & (z <= half)


# -- trainable families -----------------------------------------------------


def psig_ramp_eval(z, alpha, beta):
    return alpha * sigmoid(z) + (1.0 - alpha) * ramp01(z, beta)


def psig_ramp_grad(z, alpha, beta):
    z = _arr(z)
    s = sigmoid(z)
    mid = _ramp_middle(z, beta)
    r = ramp01(z, beta)
    dz = alpha * s * (1.0 - s) + (1.0 - alpha) * np.where(mid, beta, 0.0)
    da = s - r
    db = (1.0 - alpha) * np.where(mid, z, 0.0)
    return np.broadcast_arrays(dz, da, db)


def ptanh_ramp_eval(z, alpha, beta):
    return alpha * np.tanh(_arr(z)) + (1.0 - alpha) * (2.0 * ramp01(z, beta) - 1.0)


def ptanh_ramp_grad(z, alpha, beta):
    z = _arr(z)
    t = np.tanh(z)
    mid = _ramp_middle(z, beta)
    r = 2.0 * ramp01(z, beta) - 1.0
    dz = alpha * (1.0 - t * t) + (1.0 - alpha) * np.where(mid, 2.0 * beta, 0.0)
    da = t - r
    db = (1.0 - alpha) * np.where(mid, 2.0 * z, 0.0)
    return np.broadcast_arrays(dz, da, db)


def pe2_relu_eval(z, alpha, beta):
    z = _arr(z)
    return alpha * relu(z) + beta * elu(z) - (1.0 - alpha - beta) * elu(-z)


def pe2_relu_grad(z, alpha, beta):
    z = _arr(z)
    dz = alpha * (z > 0) + beta * elu_prime(z) + (1.0 - alpha - beta) * elu_prime(-z)
    da = relu(z) + elu(-z)
    db = elu(z) + elu(-z)
    return np.broadcast_arrays(dz, da, db)


def pe2_relu1_eval(z, alpha):
    z = _arr(z)
    return alpha * relu(z) + 0.5 * (1.0 - alpha) * (elu(z) - elu(-z))


def pe2_relu1_grad(z, alpha):
    z = _arr(z)
    dz = alpha * (z > 0) + 0.5 * (1.0 - alpha) * (elu_prime(z) + elu_prime(-z))
    da = relu(z) - 0.5 * (elu(z) - elu(-z))
    return np.broadcast_arrays(dz, da)


def pe2_id_eval(z, alpha):
    z = _arr(z)
    return alpha * z + (1.0 - alpha) * (elu(z) - elu(-z))


def pe2_id_grad(z, alpha):
    z = _arr(z)
    dz = alpha + (1.0 - alpha) * (elu_prime(z) + elu_prime(-z))
    da = z - (elu(z) - elu(-z))
    return np.broadcast_arrays(dz, da)


def prelu_eval(z, a):
    z = _arr(z)
    return np.where(z > 0, z, a * z)


def prelu_grad(z, a):
    z = _arr(z)
    dz = np.where(z > 0, 1.0, a)
    da = np.minimum(z, 0.0)
    return np.broadcast_arrays(dz, da)


@dataclass(frozen=True)
class Family:
    """Static description of one trainable activation family.

    ``weight_map`` and ``weight_offset`` express the full list of component
    weights as an affine function of the stored parameters, so implied
    weights such as ``1 - alpha - beta`` can be regularized too.
    """

    name: str
    evaluate: Callable
    gradient: Callable
    init: tuple[float, ...]
    combination: tuple[int, ...]
    defaults: tuple[float, ...]
    weight_map: tuple[tuple[float, ...], ...]
    weight_offset: tuple[float, ...]
    baseline: str | None = None
    inner_min: dict[int, float] | None = None

    @property
    def n_params(self) -> int:
        return len(self.init)


FAMILIES: dict[str, Family] = {
    "p-sig-ramp": Family(
        "p-sig-ramp", psig_ramp_eval, psig_ramp_grad, (1.0, 0.1), (0,), (1.0,),
        ((1.0, 0.0), (-1.0, 0.0)), (0.0, 1.0), "sigmoid", {1: BETA_MIN},
    ),
    "p-tanh-ramp": Family(
        "p-tanh-ramp", ptanh_ramp_eval, ptanh_ramp_grad, (1.0, 0.1), (0,), (1.0,),
        ((1.0, 0.0), (-1.0, 0.0)), (0.0, 1.0), "tanh", {1: BETA_MIN},
    ),
    "p-e2-relu": Family(
        "p-e2-relu", pe2_relu_eval, pe2_relu_grad, (0.4, 0.3), (0, 1), (1.0, 0.0),
        ((1.0, 0.0), (0.0, 1.0), (-1.0, -1.0)), (0.0, 0.0, 1.0), "relu",
    ),
    "p-e2-relu-1": Family(
        "p-e2-relu-1", pe2_relu1_eval, pe2_relu1_grad, (0.5,), (0,), (1.0,),
        ((1.0,), (-0.5,), (-0.5,)), (0.0, 0.5, 0.5), "relu",
    ),
    "p-e2-id": Family(
        "p-e2-id", pe2_id_eval, pe2_id_grad, (0.5,), (0,), (1.0,),
        ((1.0,), (-1.0,)), (0.0, 1.0), None,
    ),
    "prelu": Family("prelu", prelu_eval, prelu_grad, (0.25,), (), (), (), (), None),
}

FIXED_KINDS = tuple(_BASELINES)
KINDS = FIXED_KINDS + tuple(FAMILIES)


def is_trainable(kind: str) -> bool:
    return kind in FAMILIES


def init_params(kind: str) -> np.ndarray:
    """Default parameter block for a trainable family (baseline-like start)."""
    if kind not in FAMILIES:
        raise ActivationKindError(f"{kind!r} has no trainable parameters")
    return np.array(FAMILIES[kind].init, dtype=DTYPE)


def check_kind(kind: str) -> str:
    if kind not in KINDS:
        raise ActivationKindError(f"unknown activation {kind!r}; expected one of {', '.join(KINDS)}")
    return kind


class Activation:
    """Elementwise activation layer with optional per-unit trainable parameters.

    Parameters are stored as an ``(n_units, n_params)`` array. ``axis``
    names the input axis that indexes the units: ``-1`` for dense and LSTM
    layers, ``1`` for channel-shared convolutional activations. A block with
    ``n_units == 1`` is shared by the whole layer.
    """

    def __init__(self, kind: str, n_units: int = 1, axis: int = -1, params=None, name: str = ""):
        self.kind = check_kind(kind)
        self.n_units = n_units
        self.axis = axis
        self.name = name or kind
        self.family = FAMILIES.get(kind)
        if self.family is None:
            self.param = None
        else:
            if params is None:
                params = np.tile(init_params(kind), (n_units, 1))
            params = np.asarray(params, dtype=DTYPE)
            if params.shape != (n_units, self.family.n_params):
                raise ParameterRangeError(
                    f"{kind} expects parameters of shape {(n_units, self.family.n_params)}, got {params.shape}"
                )
            self.param = Parameter(params, name=f"{self.name}.params")

    @property
    def trainable(self) -> bool:
        return self.param is not None

    def parameters(self) -> list[Parameter]:
        return [self.param] if self.param is not None else []

    def _columns(self, z: np.ndarray) -> list[np.ndarray]:
        p = self.param.value
        if self.n_units == 1:
            return [p[0, k] for k in range(p.shape[1])]
        axis = self.axis % z.ndim
        if z.shape[axis] != self.n_units:
            raise ParameterRangeError(
                f"{self.name}: input axis {self.axis} has size {z.shape[axis]}, expected {self.n_units} units"
            )
        shape = [1] * z.ndim
        shape[axis] = self.n_units
        return [p[:, k].reshape(shape) for k in range(p.shape[1])]

    def __call__(self, z) -> np.ndarray:
        return self.forward(z)

    def forward(self, z) -> np.ndarray:
        z = _arr(z)
        if self.family is None:
            return baseline_eval(self.kind, z)
        return self.family.evaluate(z, *self._columns(z))

    def backward(self, z, grad_out):
        """Return ``(grad_z, grad_params)``; ``grad_params`` is ``None`` for fixed kinds."""
        z = _arr(z)
        if self.family is None:
            return grad_out * baseline_grad(self.kind, z), None
        dz, *dparams = self.family.gradient(z, *self._columns(z))
        if self.n_units == 1:
            gp = np.array([[np.sum(g * grad_out) for g in dparams]])
        else:
            axis = self.axis % z.ndim
            other = tuple(i for i in range(z.ndim) if i != axis)
            gp = np.stack([np.sum(g * grad_out, axis=other) for g in dparams], axis=1)
        return dz * grad_out, gp

    def project(self) -> None:
        """Clamp inner parameters back into their valid range after an update."""
        if self.family is not None and self.family.inner_min:
            for col, lo in self.family.inner_min.items():
                np.maximum(self.param.value[:, col], lo, out=self.param.value[:, col])

    def __repr__(self) -> str:
        return f"Activation({self.kind!r}, n_units={self.n_units})"

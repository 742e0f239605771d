"""Penalties on trainable activation parameters.

Three terms are combined with the predictive loss:

* towards-mean: pulls every parameter toward the mean of the same
  parameter across its layer,
* towards-default: pulls combination weights toward the coefficients of
  the fixed activation the family generalizes,
* bound barrier: squared hinge keeping every component weight (stored or
  implied, e.g. ``1 - alpha - beta``) inside ``[-Delta, 1 - Delta]``.

Each function returns ``(penalty, gradient)`` with the gradient shaped like
its input.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .activations import FAMILIES, Activation
from .tensor import DTYPE, Parameter


class RegularizationError(ValueError):
    pass


@dataclass
class RegConfig:
    delta1: float = 0.0
    delta2: float = 0.0
    delta3: float = 1.0
    Delta: float = 0.01
    lambdas: dict[int, float] = field(default_factory=dict)
    defaults: dict[str, tuple[float, ...]] = field(default_factory=dict)
    n_units: int | None = None
    weight_decay: float = 0.0

    def __post_init__(self):
        for name in ("delta1", "delta2", "delta3", "weight_decay"):
            if getattr(self, name) < 0:
                raise RegularizationError(f"{name} must be non-negative")
        if not 0.0 < self.Delta < 0.5:
            raise RegularizationError(f"Delta must lie in (0, 0.5), got {self.Delta}")
        if any(v < 0 for v in self.lambdas.values()):
            raise RegularizationError("layer coefficients must be non-negative")
        if self.n_units is not None and self.n_units < 1:
            raise RegularizationError("n_units must be >= 1")
        self.lambdas = {int(k): float(v) for k, v in self.lambdas.items()}

    def lam(self, layer: int) -> float:
        return self.lambdas.get(layer, 1.0)

    def default_for(self, kind: str) -> np.ndarray:
        if kind in self.defaults:
            return np.asarray(self.defaults[kind], dtype=DTYPE)
        if kind not in FAMILIES:
            raise RegularizationError(f"no default combination weights for {kind!r}")
        return np.asarray(FAMILIES[kind].defaults, dtype=DTYPE)


def towards_mean(values, lam: float = 1.0):
    """Penalty ``(lam / m) * sum_i sum_k (a_ik - mean_k)^2`` over an ``m x K`` block."""
    values = np.asarray(values, dtype=DTYPE)
    if values.ndim == 1:
        values = values[:, None]
    m = values.shape[0]
    if m == 0:
        raise RegularizationError("towards-mean needs at least one unit in the layer")
    dev = values - values.mean(axis=0, keepdims=True)
    # the mean-coupling terms cancel because each column of dev sums to zero
    return lam / m * float(np.sum(dev * dev)), 2.0 * lam / m * dev


def towards_default(weights, defaults, n: int):
    weights = np.asarray(weights, dtype=DTYPE)
    diff = weights - np.asarray(defaults, dtype=DTYPE)
    return float(np.sum(diff * diff)) / n, 2.0 / n * diff


def bound_barrier(weights, Delta: float, n: int):
    weights = np.asarray(weights, dtype=DTYPE)
    upper = np.maximum(weights - (1.0 - Delta), 0.0)
    lower = np.maximum(-Delta - weights, 0.0)
    penalty = float(np.sum(upper * upper) + np.sum(lower * lower)) / n
    return penalty, 2.0 / n * (upper - lower)


def component_weights(block: Activation) -> np.ndarray:
    """All component weights of a block, ``n_units x K`` (may be empty)."""
    fam = block.family
    if fam is None or not fam.weight_map:
        return np.zeros((block.n_units, 0))
    m = np.asarray(fam.weight_map, dtype=DTYPE)
    return block.param.value @ m.T + np.asarray(fam.weight_offset, dtype=DTYPE)


def total_cost(loss: float, blocks: Sequence[Activation], config: RegConfig, weights: Sequence[Parameter] = ()):
    """Predictive loss plus all configured penalties.

    ``blocks`` are the activation layers in model order; block ``j`` uses the
    layer coefficient ``config.lam(j)``. Returns ``(total, grads)`` where
    ``grads`` is a list of ``(Parameter, array)`` pairs to be added to the
    predictive-loss gradients.
    """
    blocks = [b for b in blocks if b.trainable]
    n = config.n_units or sum(b.n_units for b in blocks) or 1
    total = float(loss)
    grads: list[tuple[Parameter, np.ndarray]] = []

    for j, block in enumerate(blocks):
        fam = block.family
        p = block.param.value
        g = np.zeros_like(p)
        if config.delta1:
            pen, dg = towards_mean(p, config.lam(j))
            total += config.delta1 * pen
            g += config.delta1 * dg
        if config.delta2 and fam.combination:
            cols = list(fam.combination)
            pen, dg = towards_default(p[:, cols], config.default_for(block.kind), n)
            total += config.delta2 * pen
            g[:, cols] += config.delta2 * dg
        if config.delta3 and fam.weight_map:
            pen, dw = bound_barrier(component_weights(block), config.Delta, n)
            total += config.delta3 * pen
            g += config.delta3 * (dw @ np.asarray(fam.weight_map, dtype=DTYPE))
        if config.delta1 or config.delta2 or config.delta3:
            grads.append((block.param, g))

    if config.weight_decay:
        for w in weights:
            total += config.weight_decay * float(np.sum(w.value * w.value))
            grads.append((w, 2.0 * config.weight_decay * w.value))
    return total, grads

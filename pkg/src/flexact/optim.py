"""SGD and Adam over named parameter groups with per-group learning rates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Parameter


class OptimizerError(RuntimeError):
    pass


@dataclass
class ParamGroup:
    id: str
    params: list[Parameter]
    lr: float = 0.001
    step_count: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


def _check(group: ParamGroup) -> None:
    for p in group.params:
        if p.grad.shape != p.value.shape:
            raise OptimizerError(f"group {group.id!r}: gradient shape {p.grad.shape} != value shape {p.value.shape}")


def sgd_step(group: ParamGroup) -> ParamGroup:
    _check(group)
    for p in group.params:
        p.value -= group.lr * p.grad
    group.step_count += 1
    group.zero_grad()
    return group


def adam_step(group: ParamGroup, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> ParamGroup:
    """Bias-corrected Adam update; the gradients are cleared afterwards."""
    _check(group)
    for p in group.params:
        if not np.all(np.isfinite(p.grad)):
            raise OptimizerError(f"group {group.id!r}: non-finite gradient in {p.name or 'parameter'}")
    if not group.m:
        group.m = [np.zeros_like(p.value) for p in group.params]
        group.v = [np.zeros_like(p.value) for p in group.params]
    group.step_count += 1
    t = group.step_count
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for p, m, v in zip(group.params, group.m, group.v):
        g = p.grad
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p.value -= group.lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    group.zero_grad()
    return group


class Optimizer:
    """Applies one update rule to several groups."""

    def __init__(self, groups: list[ParamGroup], kind: str = "adam", betas=(0.9, 0.999), eps: float = 1e-8):
        if kind not in ("adam", "sgd"):
            raise OptimizerError(f"unknown optimizer {kind!r}")
        self.groups = groups
        self.kind = kind
        self.betas = betas
        self.eps = eps

    def zero_grad(self) -> None:
        for g in self.groups:
            g.zero_grad()

    def step(self) -> None:
        for g in self.groups:
            if self.kind == "adam":
                adam_step(g, *self.betas, self.eps)
            else:
                sgd_step(g)


def model_groups(model, lr: float = 0.001, lr_activation: float | None = None) -> list[ParamGroup]:
    """Split a model's parameters into ``weights`` and ``activation`` groups."""
    act_ids = {id(b.param) for b in model.activation_blocks() if b.trainable}
    weights = [p for p in model.parameters() if id(p) not in act_ids]
    acts = [p for p in model.parameters() if id(p) in act_ids]
    groups = [ParamGroup("weights", weights, lr)]
    if acts:
        groups.append(ParamGroup("activation", acts, lr if lr_activation is None else lr_activation))
    return groups

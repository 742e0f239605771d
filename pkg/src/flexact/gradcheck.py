"""Central finite-difference checks for activations and whole models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activations import FAMILIES
from .nn import ModelSpec, mse
from .regularization import RegConfig, total_cost

H = 1e-6
# Denominator floor for relative errors: below it the comparison is absolute.
REL_FLOOR = 1e-6


@dataclass(frozen=True)
class CheckResult:
    name: str
    probes: int
    max_rel_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def rel_error(analytic, numeric, floor: float = REL_FLOOR):
    analytic = np.asarray(analytic, dtype=np.longdouble)
    numeric = np.asarray(numeric, dtype=np.longdouble)
    return np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)


def _family_sample(kind: str, rng: np.random.Generator, n: int):
    """Random inputs and parameters, rejecting points near kinks."""
    z = rng.uniform(-4.0, 4.0, n)
    if kind in ("p-sig-ramp", "p-tanh-ramp"):
        params = [rng.uniform(0.0, 1.0, n), rng.uniform(0.05, 2.0, n)]
        half = 0.5 / params[1]
        bad = (np.abs(z - half) < 1e-3) | (np.abs(z + half) < 1e-3)
    elif kind == "p-e2-relu":
        a = rng.uniform(0.0, 1.0, n)
        params = [a, rng.uniform(0.0, 1.0, n) * (1.0 - a)]
        bad = np.abs(z) < 1e-3
    else:
        params = [rng.uniform(-0.5, 1.5, n) if kind == "prelu" else rng.uniform(0.0, 1.0, n)]
        bad = np.abs(z) < 1e-3
    z = np.where(bad, z + 0.1, z)
    return z, params


def check_family(kind: str, probes: int = 100, seed: int = 0, h: float = H, tol: float = 1e-6) -> CheckResult:
    fam = FAMILIES[kind]
    rng = np.random.default_rng(seed)
    z, params = _family_sample(kind, rng, probes)
    analytic = fam.gradient(z, *params)
    # differences are taken in extended precision so roundoff stays far below h^2
    base = [np.asarray(a, dtype=np.longdouble) for a in (z, *params)]
    worst = 0.0
    for k in range(1 + len(params)):
        args_hi = list(base)
        args_lo = list(base)
        args_hi[k] = args_hi[k] + h
        args_lo[k] = args_lo[k] - h
        numeric = (fam.evaluate(*args_hi) - fam.evaluate(*args_lo)) / (2 * np.longdouble(h))
        worst = max(worst, float(np.max(rel_error(analytic[k], numeric))))
    return CheckResult(kind, probes, worst, tol)


def _randomize_activations(model, rng: np.random.Generator) -> None:
    for block in model.activation_blocks():
        if not block.trainable:
            continue
        p = block.param.value
        if block.kind in ("p-sig-ramp", "p-tanh-ramp"):
            p[:, 0] = rng.uniform(0.2, 0.8, p.shape[0])
            p[:, 1] = rng.uniform(0.3, 1.5, p.shape[0])
        elif block.kind == "p-e2-relu":
            p[:, 0] = rng.uniform(0.2, 0.6, p.shape[0])
            p[:, 1] = rng.uniform(0.1, 0.3, p.shape[0])
        else:
            p[:, 0] = rng.uniform(0.2, 0.8, p.shape[0])


def check_model(model, x, y, probes: int = 100, seed: int = 0, reg: RegConfig | None = None, h: float = H, tol: float = 1e-5, name: str = "model") -> CheckResult:
    """Compare backprop gradients of ``mse + penalties`` with central differences.

    Probes are random coordinates drawn across every parameter array, so
    activation parameters are always included.
    """
    rng = np.random.default_rng(seed)
    reg = reg or RegConfig(delta1=0.0, delta2=0.0, delta3=0.0)
    blocks = model.activation_blocks()
    weights = model.weight_parameters()

    def loss_value():
        loss, _ = mse(model.forward(x), y)
        return total_cost(loss, blocks, reg, weights)[0]

    params = model.parameters()
    for p in params:
        p.zero_grad()
    loss, grad = mse(model.forward(x), y)
    model.backward(grad)
    for p, g in total_cost(loss, blocks, reg, weights)[1]:
        p.grad += g

    act_ids = {id(b.param) for b in blocks if b.trainable}
    act_params = [p for p in params if id(p) in act_ids]
    picks = []
    # at least a third of the probes land on activation parameters
    for k in range(probes):
        pool = act_params if act_params and k % 3 == 0 else params
        p = pool[rng.integers(len(pool))]
        picks.append((p, int(rng.integers(p.size))))

    worst = 0.0
    for p, i in picks:
        flat = p.value.reshape(-1)
        old = flat[i]
        flat[i] = old + h
        hi = loss_value()
        flat[i] = old - h
        lo = loss_value()
        flat[i] = old
        numeric = (hi - lo) / (2 * h)
        worst = max(worst, float(rel_error(p.grad.reshape(-1)[i], numeric)))
    return CheckResult(name, probes, worst, tol)


def lstm_check(probes: int = 100, seed: int = 0, tol: float = 1e-5) -> CheckResult:
    rng = np.random.default_rng(seed)
    spec = ModelSpec(kind="lstm", layer_sizes=[3, 4], gate_activation="p-sig-ramp",
                     cell_activation="p-tanh-ramp", squash_activation="p-tanh-ramp")
    model = spec.build(rng)
    _randomize_activations(model, rng)
    x = rng.standard_normal((4, 6, 3))
    y = rng.standard_normal((4, 3))
    reg = RegConfig(delta1=0.1, delta2=0.05, delta3=1.0)
    return check_model(model, x, y, probes, seed, reg, tol=tol, name="lstm[3,4]")


def cae_check(probes: int = 100, seed: int = 0, tol: float = 1e-5, activation: str = "p-e2-relu") -> CheckResult:
    rng = np.random.default_rng(seed)
    model = ModelSpec(kind="cae", preset="toy", activation=activation).build(rng)
    _randomize_activations(model, rng)
    x = rng.uniform(0.0, 1.0, (2, 1, 10, 10))
    reg = RegConfig(delta1=0.1, delta2=0.05, delta3=1.0)
    return check_model(model, x, x, probes, seed, reg, tol=tol, name=f"toy-cae[{activation}]")


def run_suite(probes: int = 100, seed: int = 0, tol: float = 1e-5) -> list[CheckResult]:
    results = [check_family(kind, probes, seed, tol=tol) for kind in FAMILIES]
    results.append(lstm_check(probes, seed, tol))
    for act in ("p-e2-relu", "p-e2-relu-1", "p-e2-id", "prelu"):
        results.append(cae_check(probes, seed, tol, act))
    return results

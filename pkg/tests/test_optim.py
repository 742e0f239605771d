import math

import numpy as np
import pytest

from flexact.nn import StackedLstm
from flexact.optim import Optimizer, OptimizerError, ParamGroup, adam_step, model_groups, sgd_step
from flexact.tensor import Parameter


def _scalar(value=1.0):
    return Parameter(np.array([value]))


def test_sgd_example():
    p = _scalar()
    p.grad[:] = 0.5
    sgd_step(ParamGroup("g", [p], lr=0.1))
    assert p.value[0] == 0.95
    assert p.grad[0] == 0.0
    sgd_step(ParamGroup("g", [p], lr=0.1))
    assert p.value[0] == 0.95


def test_sgd_linearity(rng):
    # dyadic values keep every product and sum exact
    v = rng.integers(-64, 64, 5) / 8.0
    g1, g2 = rng.integers(-64, 64, 5) / 16.0, rng.integers(-64, 64, 5) / 16.0
    a = Parameter(v.copy())
    group = ParamGroup("a", [a], lr=0.25)
    a.grad[:] = g1
    sgd_step(group)
    a.grad[:] = g2
    sgd_step(group)
    b = Parameter(v.copy())
    b.grad[:] = g1 + g2
    sgd_step(ParamGroup("b", [b], lr=0.25))
    assert np.array_equal(a.value, b.value)


def _adam_by_hand(x, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        x -= lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
    return x


def test_adam_first_step():
    p = _scalar()
    p.grad[:] = 1.0
    adam_step(ParamGroup("g", [p], lr=0.001))
    assert p.value[0] == pytest.approx(1.0 - 0.001 / (1 + 1e-8), abs=1e-15)


def test_adam_two_steps():
    p = _scalar(0.5)
    group = ParamGroup("g", [p], lr=0.01)
    for g in (1.0, -1.0):
        p.grad[:] = g
        adam_step(group)
    assert abs(p.value[0] - _adam_by_hand(0.5, [1.0, -1.0], 0.01)) <= 1e-12
    assert group.step_count == 2


def test_adam_zero_grad_fresh():
    p = _scalar(0.3)
    adam_step(ParamGroup("g", [p]))
    assert p.value[0] == 0.3


def test_adam_rejects_nonfinite():
    p = _scalar()
    p.grad[:] = np.nan
    with pytest.raises(OptimizerError):
        adam_step(ParamGroup("g", [p]))


def test_shape_mismatch():
    p = _scalar()
    p.grad = np.zeros(2)
    with pytest.raises(OptimizerError):
        sgd_step(ParamGroup("g", [p]))


def test_groups_have_independent_rates():
    model = StackedLstm([3, 4], np.random.default_rng(0), gate="p-sig-ramp")
    groups = model_groups(model, lr=0.01, lr_activation=0.5)
    assert [g.id for g in groups] == ["weights", "activation"]
    before = [p.value.copy() for g in groups for p in g.params]
    for g in groups:
        for p in g.params:
            p.grad[...] = 1.0
    Optimizer(groups, "sgd").step()
    after = [p.value for g in groups for p in g.params]
    deltas = [float(np.max(b - a)) for b, a in zip(before, after)]
    n_weights = len(groups[0].params)
    assert all(d == pytest.approx(0.01) for d in deltas[:n_weights])
    assert all(d == pytest.approx(0.5) for d in deltas[n_weights:])
    with pytest.raises(OptimizerError):
        Optimizer(groups, "rmsprop")

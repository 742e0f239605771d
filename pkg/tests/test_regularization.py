import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import central_diff
from flexact.activations import Activation
from flexact.regularization import (
    RegConfig,
    RegularizationError,
    bound_barrier,
    component_weights,
    total_cost,
    towards_default,
    towards_mean,
)


def test_towards_mean_examples():
    pen, g = towards_mean([0.5, 0.5])
    assert pen == 0.0 and not np.any(g)
    pen, g = towards_mean([0.4, 0.6])
    assert pen == pytest.approx(0.01, abs=1e-15)
    np.testing.assert_allclose(g.ravel(), [-0.1, 0.1], atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 20), k=st.integers(1, 3), lam=st.floats(0, 10))
def test_towards_mean_gradient_sums_to_zero(seed, m, k, lam):
    vals = np.random.default_rng(seed).uniform(-2, 2, (m, k))
    _, g = towards_mean(vals, lam)
    assert np.all(np.abs(g.sum(axis=0)) <= 1e-12)


def test_towards_default_examples():
    assert towards_default([1.0, 0.0], [1.0, 0.0], 3) == (0.0, pytest.approx([0.0, 0.0]))
    pen, g = towards_default([0.8], [1.0], 1)
    assert pen == pytest.approx(0.04, abs=1e-15)
    assert g[0] == pytest.approx(-0.4, abs=1e-15)
    assert towards_default([0.8], [1.0], 10)[0] == pytest.approx(0.004, abs=1e-15)


def test_bound_barrier_examples():
    assert bound_barrier([0.5], 0.01, 1)[0] == 0.0
    assert bound_barrier([1.2], 0.01, 1)[0] == pytest.approx(0.0441, abs=1e-14)
    assert bound_barrier([-0.05], 0.01, 1)[0] == pytest.approx(0.0016, abs=1e-15)
    # flat inside the band
    assert bound_barrier(np.linspace(-0.01, 0.99, 11), 0.01, 1)[0] == 0.0


@pytest.mark.parametrize("fn,args", [
    (towards_mean, (1.7,)),
    (towards_default, (np.array([[1.0, 0.0]]).repeat(4, 0), 6)),
    (bound_barrier, (0.01, 6)),
])
def test_penalty_gradients_finite_difference(rng, fn, args):
    x = rng.uniform(-0.5, 1.5, (4, 2))
    analytic = fn(x, *args)[1]
    numeric = central_diff(lambda: fn(x, *args)[0], x, h=1e-6)
    np.testing.assert_allclose(analytic, numeric, rtol=1e-8, atol=1e-10)


def _blocks(rng):
    blocks = [Activation("p-e2-relu", 3), Activation("p-sig-ramp", 2), Activation("tanh"), Activation("p-e2-id", 4)]
    for b in blocks:
        if b.trainable:
            b.param.value[...] = rng.uniform(-0.3, 1.3, b.param.shape)
    blocks[1].param.value[:, 1] = rng.uniform(0.1, 2, 2)
    return blocks


def test_total_cost_gradient_finite_difference(rng):
    blocks = _blocks(rng)
    cfg = RegConfig(delta1=0.3, delta2=0.2, delta3=1.0, lambdas={0: 2.0})
    _, grads = total_cost(0.0, blocks, cfg)
    for p, g in grads:
        numeric = central_diff(lambda: total_cost(0.0, blocks, cfg)[0], p.value)
        np.testing.assert_allclose(g, numeric, rtol=1e-8, atol=1e-10)


def test_total_cost_zero_coefficients(rng):
    blocks = _blocks(rng)
    total, grads = total_cost(1.25, blocks, RegConfig(delta1=0, delta2=0, delta3=0))
    assert total == 1.25 and grads == []


def test_total_cost_two_unit_example():
    block = Activation("p-e2-id", 2, params=[[0.4], [0.6]])
    total, _ = total_cost(2.0, [block], RegConfig(delta1=1.0, delta2=0.0, delta3=0.0))
    assert total == pytest.approx(2.01, abs=1e-15)


def test_total_cost_at_defaults_is_loss():
    blocks = [Activation(k, 3, params=np.tile(p, (3, 1))) for k, p in
              (("p-sig-ramp", [1.0, 0.1]), ("p-e2-relu", [1.0, 0.0]), ("p-e2-id", [1.0]))]
    # towards-mean and towards-default vanish; alpha=1 sits Delta outside the band
    cfg = RegConfig(delta1=5.0, delta2=5.0, delta3=0.0)
    assert total_cost(0.5, blocks, cfg)[0] == 0.5
    interior = [Activation("p-e2-relu", 3, params=np.tile([0.4, 0.3], (3, 1)))]
    cfg = RegConfig(delta1=5.0, delta2=0.0, delta3=5.0, defaults={"p-e2-relu": (0.4, 0.3)})
    assert total_cost(0.5, interior, cfg)[0] == 0.5


def test_penalties_are_additive(rng):
    blocks = _blocks(rng)
    parts = [total_cost(0.0, blocks, RegConfig(delta1=d1, delta2=d2, delta3=d3))[0]
             for d1, d2, d3 in ((0.3, 0, 0), (0, 0.2, 0), (0, 0, 0.7))]
    whole = total_cost(0.0, blocks, RegConfig(delta1=0.3, delta2=0.2, delta3=0.7))[0]
    assert whole == pytest.approx(sum(parts), rel=1e-14)


def test_implied_weights_are_barriered():
    block = Activation("p-e2-relu", 1, params=[[0.8, 0.5]])
    np.testing.assert_allclose(component_weights(block), [[0.8, 0.5, -0.3]])
    total, _ = total_cost(0.0, [block], RegConfig(delta3=1.0))
    assert total == pytest.approx(0.29**2, rel=1e-12)


@pytest.mark.parametrize("kw", [{"delta1": -1}, {"Delta": 0.0}, {"Delta": 0.6}, {"n_units": 0}, {"lambdas": {0: -1}}])
def test_config_validation(kw):
    with pytest.raises(RegularizationError):
        RegConfig(**kw)

"""Recompute the frozen reference constants with mpmath at 40 digits."""

import mpmath as mp
import pytest

import test_activations as ta
import test_nn as tn
import test_stats as ts

mp.mp.dps = 40


def elu(z):
    return z if z > 0 else mp.e**z - 1


def test_activation_constants():
    sig = 1 / (1 + mp.e ** -2)
    assert float(elu(mp.mpf(-1))) == pytest.approx(ta.ELU_M1, abs=1e-15)
    assert float(sig / 2 + mp.mpf("0.7") / 2) == pytest.approx(ta.PSIG_2, abs=1e-15)
    assert float(mp.tanh(2) / 2 + mp.mpf("0.4") / 2) == pytest.approx(ta.PTANH_2, abs=1e-15)
    a, b = mp.mpf("0.4"), mp.mpf("0.3")
    for z, ref in ((1, ta.PE2RELU_P1), (-1, ta.PE2RELU_M1)):
        z = mp.mpf(z)
        val = a * max(z, 0) + b * elu(z) - (1 - a - b) * elu(-z)
        assert float(val) == pytest.approx(ref, abs=1e-15)
    z = mp.mpf(-2)
    assert float(mp.mpf("0.5") * max(z, 0) + mp.mpf("0.25") * (elu(z) - elu(-z))) == pytest.approx(ta.PE2RELU1_M2, abs=1e-15)
    z = mp.mpf(1)
    assert float(z / 2 + (elu(z) - elu(-z)) / 2) == pytest.approx(ta.PE2ID_1, abs=1e-14)


def test_lstm_constant():
    assert float(mp.tanh(mp.mpf("0.5")) / 2) == pytest.approx(tn.H_REF, abs=1e-15)


def _welch_p(a, b):
    a = [mp.mpf(str(v)) for v in a]
    b = [mp.mpf(str(v)) for v in b]
    ma, mb = sum(a) / len(a), sum(b) / len(b)
    va = sum((x - ma) ** 2 for x in a) / (len(a) - 1) / len(a)
    vb = sum((x - mb) ** 2 for x in b) / (len(b) - 1) / len(b)
    t = (ma - mb) / mp.sqrt(va + vb)
    df = (va + vb) ** 2 / (va**2 / (len(a) - 1) + vb**2 / (len(b) - 1))
    # Student-t CDF through the regularized incomplete beta function
    x = df / (df + t * t)
    tail = mp.betainc(df / 2, mp.mpf(1) / 2, 0, x, regularized=True) / 2
    return t, df, (tail if t < 0 else 1 - tail)


def test_welch_constants():
    t, df, p = _welch_p(ts.A, ts.B)
    assert float(t) == pytest.approx(ts.T_REF, abs=1e-15)
    assert float(df) == pytest.approx(ts.DF_REF, abs=1e-14)
    assert float(p) == pytest.approx(ts.P_REF, abs=1e-17)
    assert float(_welch_p([1, 2, 3], [11, 12, 13])[2]) == pytest.approx(0.000127608374720963, rel=1e-12)

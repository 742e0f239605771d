"""Summary statistics for multi-trial experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as _st


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: float
    p: float
    degenerate: bool = False


def welch_ttest_onetail(a, b) -> TTestResult:
    """One-tailed Welch test of H0: mean(a) >= mean(b).

    Small p-values favour mean(a) < mean(b). When both samples have zero
    variance the statistic is undefined; the result is flagged and p is 0.5
    for equal means, otherwise 0 or 1.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise ValueError("each sample needs at least two observations")
    va = a.var(ddof=1) / a.size
    vb = b.var(ddof=1) / b.size
    diff = a.mean() - b.mean()
    se2 = va + vb
    if se2 == 0.0:
        if diff == 0.0:
            return TTestResult(0.0, math.nan, 0.5, True)
        return TTestResult(math.copysign(math.inf, diff), math.nan, 1.0 if diff > 0 else 0.0, True)
    t = diff / math.sqrt(se2)
    df = se2**2 / (va**2 / (a.size - 1) + vb**2 / (b.size - 1))
    return TTestResult(float(t), float(df), float(_st.t.cdf(t, df)))


def mean_stderr(values, axis=0):
    """Mean and standard error of the mean (sample sd / sqrt(n))."""
    values = np.asarray(values, dtype=float)
    n = values.shape[axis]
    mean = values.mean(axis=axis)
    if n < 2:
        return mean, np.full_like(mean, np.nan)
    return mean, values.std(axis=axis, ddof=1) / np.sqrt(n)


def pooled_stderr(a, b) -> float:
    """Standard error of the difference of two sample means."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size))

"""Digamma and trigamma for positive real arguments.

Arguments below ``SHIFT_TO`` are pushed up with the recurrences
psi(x) = psi(x+1) - 1/x and psi1(x) = psi1(x+1) + 1/x^2, then the asymptotic
expansions in Bernoulli numbers are summed. At x >= 10 the truncated tails
are below 1e-17, so the error is dominated by the recurrence sum.
"""
from __future__ import annotations

import numpy as np

SHIFT_TO = 10.0

# B_{2k} / (2k) for k = 1..7
_PSI_COEF = (1 / 12, -1 / 120, 1 / 252, -1 / 240, 1 / 132, -691 / 32760, 1 / 12)
# B_{2k} for k = 1..7
_PSI1_COEF = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6)


def _prepare(x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("argument must be positive")
    return x


def _shift_count(x):
    return np.maximum(0, np.ceil(SHIFT_TO - x)).astype(np.int64)


def digamma(x):
    """Psi0(x) = Gamma'(x)/Gamma(x) for x > 0 (scalar or array)."""
    x = _prepare(x)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    k = _shift_count(x)
    acc = np.zeros_like(x)
    y = x.copy()
    for i in range(int(k.max(initial=0))):
        live = k > i
        acc[live] -= 1.0 / y[live]
        y[live] += 1.0
    inv2 = 1.0 / (y * y)
    series = np.zeros_like(y)
    for c in reversed(_PSI_COEF):
        series = (series + c) * inv2
    out = acc + np.log(y) - 0.5 / y - series
    return float(out[0]) if scalar else out


def trigamma(x):
    """Psi1(x) = d/dx Psi0(x) for x > 0 (scalar or array)."""
    x = _prepare(x)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    k = _shift_count(x)
    acc = np.zeros_like(x)
    y = x.copy()
    for i in range(int(k.max(initial=0))):
        live = k > i
        acc[live] += 1.0 / (y[live] * y[live])
        y[live] += 1.0
    inv2 = 1.0 / (y * y)
    series = np.zeros_like(y)
    for c in reversed(_PSI1_COEF):
        series = (series + c) * inv2
    out = acc + 1.0 / y + 0.5 * inv2 + series / y
    return float(out[0]) if scalar else out

"""Closed-form free energies of the two solvable 1+1 dimensional models.

Log-gamma polymer (beta = 1, weights Gamma(rho), potential -log w + log 2)
and exponential corner growth (beta = inf, rate-1 weights), plus the
annealed upper bound for product environments. Velocities are written
xi = (s, 1 - s).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, log_ndtr

from .errors import UnsupportedDistribution
from .special import digamma, trigamma
from .steps import StepSet

# theta is searched in [rho*_EDGE, rho*(1-_EDGE)]
_EDGE = 1e-15


@dataclass(frozen=True)
class LogGammaModel:
    """Gamma(rho) weights at beta = 1."""

    rho: float = 1.0

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")


@dataclass(frozen=True)
class ExpCGModel:
    """Rate-1 exponential last-passage percolation; no parameters."""


def _s_of(v) -> float:
    """Accept a bare s, an xi vector or a Velocity."""
    xi = getattr(v, "xi", v)
    arr = np.atleast_1d(np.asarray(xi, dtype=float))
    if arr.size == 1:
        return float(arr[0])
    if arr.size != 2 or abs(arr.sum() - 1.0) > 1e-12:
        raise ValueError("velocity must be (s, 1-s)")
    return float(arr[0])


def _open_unit(s):
    s = np.asarray(s, dtype=float)
    if np.any(~((s > 0) & (s < 1))):
        raise ValueError("s must lie in (0, 1)")
    return s


def _bisect_increasing(fun, lo, hi, iters=200):
    """Vectorized root of an increasing function on (lo, hi)."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if np.all((mid == lo) | (mid == hi)):
            break
        pos = fun(mid) > 0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
    return 0.5 * (lo + hi)


def loggamma_theta(model: LogGammaModel, s):
    """theta in (0, rho) with s Psi1(theta) = (1-s) Psi1(rho-theta).

    The left minus right side is strictly decreasing in theta, so plain
    bisection to machine resolution finds the unique root.
    """
    s = _open_unit(s)
    rho = model.rho

    def neg(t):
        return (1 - s) * trigamma(rho - t) - s * trigamma(t)

    lo = np.full(np.shape(s), rho * _EDGE)
    hi = np.full(np.shape(s), rho * (1 - _EDGE))
    th = _bisect_increasing(neg, lo, hi)
    return float(th) if th.ndim == 0 else th


def loggamma_theta_residual(model: LogGammaModel, s, theta):
    s = np.asarray(s, dtype=float)
    return s * trigamma(theta) - (1 - s) * trigamma(model.rho - theta)


def loggamma_bracket(model: LogGammaModel, s, theta):
    """-s Psi0(theta) - (1-s) Psi0(rho-theta); its inf over theta is g_pp."""
    return -s * digamma(theta) - (1 - s) * digamma(model.rho - theta)


def loggamma_gpp(model: LogGammaModel, v):
    """g_pp at a Velocity, or at s (scalar or array of s values)."""
    s = _open_unit(_s_of(v) if hasattr(v, "xi") else v)
    th = loggamma_theta(model, s)
    out = loggamma_bracket(model, s, th)
    return float(out) if np.ndim(out) == 0 else out


def loggamma_duality(model: LogGammaModel, v) -> dict:
    """Dual tilt (with h2 = 0) and g_pl for the velocity (s, 1-s).

    ``residual`` is |g_pl - g_pp - h.xi|.
    """
    s = float(_open_unit(_s_of(v)))
    th = loggamma_theta(model, s)
    h1 = digamma(th) - digamma(model.rho - th)
    g_pl = h1 - digamma(th)
    g_pp = loggamma_bracket(model, s, th)
    return {"h": np.array([h1, 0.0]), "g_pl": g_pl, "g_pp": g_pp, "theta": th,
            "residual": abs(g_pl - (g_pp + h1 * s))}


def loggamma_gpl(model: LogGammaModel, h):
    """g_pl(h) for any tilt: solve Psi0(theta) - Psi0(rho-theta) = h1 - h2, return h1 - Psi0(theta)."""
    h = np.asarray(h, dtype=float)
    d = h[..., 0] - h[..., 1]
    rho = model.rho

    def gap(t):
        return digamma(t) - digamma(rho - t) - d

    th = _bisect_increasing(gap, np.full(np.shape(d), rho * _EDGE),
                            np.full(np.shape(d), rho * (1 - _EDGE)))
    out = h[..., 0] - digamma(th)
    return float(out) if np.ndim(out) == 0 else out


def rost_gpp(s):
    """1 + 2 sqrt(s(1-s)) on [0, 1]."""
    s = np.asarray(s, dtype=float)
    if np.any((s < 0) | (s > 1)):
        raise ValueError("s must lie in [0, 1]")
    out = 1.0 + 2.0 * np.sqrt(s * (1 - s))
    return float(out) if out.ndim == 0 else out


def exp_alpha(s):
    """Mean-inverse of the e1 Busemann increment: sqrt(s) / (sqrt(s) + sqrt(1-s))."""
    s = _open_unit(s)
    out = np.sqrt(s) / (np.sqrt(s) + np.sqrt(1 - s))
    return float(out) if out.ndim == 0 else out


def exp_dual_tilt(s) -> np.ndarray:
    a = exp_alpha(float(_s_of(s)))
    return -np.array([1.0 / a, 1.0 / (1.0 - a)])


def log_mgf(dist, beta: float) -> float:
    """lambda(beta) = log E exp(beta V0) for the potential of ``dist``.

    ``dist`` is a :class:`polyvar.mc.DistributionSpec`.
    """
    kind, tr = dist.kind, dist.transform
    if tr == "identity":
        if kind == "exponential":
            if beta >= 1:
                raise UnsupportedDistribution("exponential MGF diverges for beta >= 1")
            return -math.log1p(-beta)
        if kind == "gamma":
            if beta >= 1:
                raise UnsupportedDistribution("gamma MGF diverges for beta >= 1")
            return -dist.shape * math.log1p(-beta)
        if kind == "bernoulli":
            p = dist.p
            return float(np.logaddexp(math.log1p(-p) if p < 1 else -np.inf,
                                      math.log(p) + beta if p > 0 else -np.inf))
        if kind == "normal":
            a, b = dist.low, dist.high
            num = _log_ndtr_diff(a - beta, b - beta)
            den = _log_ndtr_diff(a, b)
            return 0.5 * beta * beta + num - den
    elif tr == "neglog2" and kind in ("gamma", "exponential"):
        rho = dist.shape if kind == "gamma" else 1.0
        if beta >= rho:
            raise UnsupportedDistribution("E w^-beta diverges for beta >= rho")
        # E exp(beta(-log w + log 2)) = 2^beta Gamma(rho - beta) / Gamma(rho)
        return beta * math.log(2.0) + float(gammaln(rho - beta) - gammaln(rho))
    raise UnsupportedDistribution(f"no closed-form MGF for {kind} with {tr} transform")


def _log_ndtr_diff(a, b):
    # log(Phi(b) - Phi(a)) for a < b
    la, lb = log_ndtr(a), log_ndtr(b)
    if np.isinf(la):
        return float(lb)
    return float(lb + np.log1p(-np.exp(la - lb)))


def kappa(steps: StepSet, h) -> float:
    """log sum_z |R|^-1 exp(h.z)."""
    x = steps.array @ np.asarray(h, dtype=float)
    top = x.max()
    return float(top + math.log(np.mean(np.exp(x - top))))


def annealed_formulas(dist, beta: float, h, steps: StepSet | None = None) -> dict:
    """Annealed free energy beta^-1 (lambda(beta) + kappa(beta h)), an upper bound for g_pl."""
    steps = steps or StepSet.unit(2)
    lam = log_mgf(dist, beta)
    k = kappa(steps, beta * np.asarray(h, dtype=float))
    return {"lambda_beta": lam, "kappa": k, "g_weak": (lam + k) / beta}


@dataclass
class FreeEnergyCurve:
    """Values of a free energy on a one-parameter grid.

    ``variable`` is ``"s"`` for g_pp(s, 1-s) or ``"h1"`` for g_pl(h1, 0).
    """

    grid: np.ndarray
    values: np.ndarray
    variable: str = "s"
    provenance: str = "oracle"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.shape != self.values.shape or self.grid.ndim != 1:
            raise ValueError("grid and values must be matching 1-d arrays")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if self.variable not in ("s", "h1"):
            raise ValueError("variable must be 's' or 'h1'")

    def second_differences(self) -> np.ndarray:
        x, y = self.grid, self.values
        d1 = np.diff(y) / np.diff(x)
        return np.diff(d1) / (0.5 * (x[2:] - x[:-2]))

    def is_concave(self, slack: float = 1e-9) -> bool:
        return bool(np.all(self.second_differences() <= slack))

    def is_convex(self, slack: float = 1e-9) -> bool:
        return bool(np.all(self.second_differences() >= -slack))


def rost_curve(n: int = 2001) -> FreeEnergyCurve:
    s = np.linspace(0.0, 1.0, n)
    return FreeEnergyCurve(s, rost_gpp(s), "s")


def loggamma_curve(model: LogGammaModel, s) -> FreeEnergyCurve:
    s = np.asarray(s, dtype=float)
    th = loggamma_theta(model, s)
    h1 = digamma(th) - digamma(model.rho - th)
    return FreeEnergyCurve(s, loggamma_bracket(model, s, th), "s",
                           extra={"theta": th, "h1": h1, "h2": np.zeros_like(s)})


def oracle_rows(model, s) -> list[tuple]:
    """Rows (s, g_pp, theta_or_alpha, h1, h2) for CSV export."""
    s = np.asarray(s, dtype=float)
    rows = []
    for si in s:
        if isinstance(model, ExpCGModel):
            a = exp_alpha(si)
            h = exp_dual_tilt(si)
            rows.append((si, rost_gpp(si), a, h[0], h[1]))
        else:
            d = loggamma_duality(model, si)
            rows.append((si, d["g_pp"], d["theta"], d["h"][0], d["h"][1]))
    return rows

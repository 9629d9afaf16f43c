"""Monte-Carlo for i.i.d. environments on Z^2 with steps {e1, e2}.

Fields live on a box [0, a] x [0, b]; ``values[i, j]`` is the potential V0 at
site (i, j). Path sums run over the first n sites of a path and exclude the
endpoint, so G_{x,y} counts V0(x) but not V0(y).

Randomness: replica r of seed s draws from PCG64(SeedSequence([s, r])).
Exponentials use the inverse CDF, normals use Box-Muller on uniform pairs,
gammas use Marsaglia-Tsang acceptance with Box-Muller normals (and the
U^(1/rho) boost for rho < 1), truncated normals use the inverse CDF. Every
draw is a function of the uniform stream only, so fields are bit-exact
across numpy versions that keep PCG64 and ``Generator.random``.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import CapExceeded, InvalidVelocity
from .steps import StepSet, Velocity, in_relative_interior, xhat

BOX_CAP = 20000
LOG2 = math.log(2.0)
KINDS = ("exponential", "gamma", "bernoulli", "normal")
TRANSFORMS = ("identity", "neglog2")


@dataclass(frozen=True)
class DistributionSpec:
    """Law of the weight w at a site, and the map from w to the potential.

    ``transform="neglog2"`` gives V0 = -log w + log 2 (log-gamma polymer).
    """

    kind: str
    shape: float = 1.0
    p: float = 0.5
    low: float = -math.inf
    high: float = math.inf
    transform: str = "identity"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown distribution {self.kind!r}")
        if self.transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}")
        if self.kind == "gamma" and not self.shape > 0:
            raise ValueError("gamma shape must be positive")
        if self.kind == "bernoulli" and not 0 <= self.p <= 1:
            raise ValueError("bernoulli p must lie in [0, 1]")
        if self.kind == "normal" and not self.low < self.high:
            raise ValueError("normal range must be nonempty")
        if self.transform == "neglog2" and self.kind not in ("gamma", "exponential"):
            raise ValueError("the -log w + log 2 transform needs positive weights")

    @classmethod
    def exponential(cls):
        return cls("exponential")

    @classmethod
    def loggamma(cls, rho: float = 1.0):
        return cls("gamma", shape=rho, transform="neglog2")

    def label(self) -> str:
        if self.kind == "gamma":
            base = f"gamma({self.shape:g})"
        elif self.kind == "bernoulli":
            base = f"bernoulli({self.p:g})"
        elif self.kind == "normal":
            base = f"normal[{self.low:g},{self.high:g}]"
        else:
            base = "exponential"
        return base if self.transform == "identity" else f"{base}:neglog2"


def replica_generator(seed: int, replica: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(replica)])))


def _box_muller(rng, n):
    k = (n + 1) // 2
    u1 = 1.0 - rng.random(k)
    u2 = rng.random(k)
    r = np.sqrt(-2.0 * np.log(u1))
    t = 2.0 * np.pi * u2
    return np.concatenate([r * np.cos(t), r * np.sin(t)])[:n]


def _gamma(rng, shape, n):
    """Marsaglia-Tsang: d = a - 1/3, c = 1/sqrt(9d), accept d v with v = (1 + c x)^3 when
    log u < x^2/2 + d - d v + d log v."""
    a = shape + 1.0 if shape < 1 else shape
    d = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(n)
    filled = 0
    while filled < n:
        m = int((n - filled) * 1.05) + 16
        x = _box_muller(rng, m)
        u = rng.random(m)
        v = (1.0 + c * x) ** 3
        with np.errstate(invalid="ignore", divide="ignore"):
            ok = (v > 0) & (np.log(u) < 0.5 * x * x + d - d * v + d * np.log(v))
        acc = d * v[ok]
        take = min(len(acc), n - filled)
        out[filled:filled + take] = acc[:take]
        filled += take
    if shape < 1:
        out *= rng.random(n) ** (1.0 / shape)
    return out


def draw_weights(dist: DistributionSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    if dist.kind == "exponential":
        w = -np.log1p(-rng.random(n))
    elif dist.kind == "gamma":
        w = _gamma(rng, dist.shape, n)
    elif dist.kind == "bernoulli":
        w = (rng.random(n) < dist.p).astype(float)
    else:
        lo, hi = ndtr(dist.low), ndtr(dist.high)
        w = ndtri(lo + rng.random(n) * (hi - lo))
    if dist.transform == "neglog2":
        w = LOG2 - np.log(w)
    return w


@dataclass(frozen=True)
class SampledField:
    dist: DistributionSpec
    values: np.ndarray = field(repr=False)
    seed: int = 0
    replica: int = 0

    @property
    def box(self) -> tuple[int, int]:
        return self.values.shape[0] - 1, self.values.shape[1] - 1


def sample_field(dist: DistributionSpec, L, seed: int, replica: int = 0,
                 cap: int = BOX_CAP) -> SampledField:
    """I.i.d. potentials on [0, La] x [0, Lb]; ``L`` is an int or a pair."""
    La, Lb = (int(L), int(L)) if np.isscalar(L) else (int(L[0]), int(L[1]))
    if min(La, Lb) < 0:
        raise ValueError("box sides must be nonnegative")
    if max(La, Lb) > cap:
        raise CapExceeded(f"box side {max(La, Lb)} exceeds the cap {cap}")
    rng = replica_generator(seed, replica)
    vals = draw_weights(dist, rng, (La + 1) * (Lb + 1)).reshape(La + 1, Lb + 1)
    vals.setflags(write=False)
    return SampledField(dist, vals, int(seed), int(replica))


# -- dynamic programming over antidiagonals ---------------------------------
#
# A diagonal d of an (a+1) x (b+1) box is stored as a vector over i = 0..a;
# entry i stands for site (i, d - i) and is -inf when that site is outside.

def _ops(beta):
    if np.isinf(beta):
        return np.maximum, 0.0, 1.0
    return np.logaddexp, LOG2, float(beta)


def _diag_index(a, b, d):
    i = np.arange(a + 1)
    j = d - i
    ok = (j >= 0) & (j <= b)
    return i, np.clip(j, 0, b), ok


def _forward(W, beta, d_max, keep=False):
    """Diagonals of K(x) = log sum_{paths 0->x} |R|^-|x| exp(sum W) (max-plus at beta=inf)."""
    comb, c, _ = _ops(beta)
    a, b = W.shape[0] - 1, W.shape[1] - 1
    cur = np.full(a + 1, -np.inf)
    cur[0] = 0.0
    table = np.full(W.shape, -np.inf) if keep else None
    if keep:
        table[0, 0] = 0.0
    for d in range(1, d_max + 1):
        i, j, ok = _diag_index(a, b, d - 1)
        x = np.where(ok, cur + W[i, j], -np.inf)
        via_e1 = np.concatenate(([-np.inf], x[:-1]))
        nxt = comb(via_e1, x) - c
        _, j2, ok2 = _diag_index(a, b, d)
        cur = np.where(ok2, nxt, -np.inf)
        if keep:
            table[i[ok2], j2[ok2]] = cur[ok2]
    return cur, table


def _backward(W, beta, d_top, top):
    """Table of log partition functions from every x with |x| <= d_top to the data on diagonal d_top."""
    comb, c, _ = _ops(beta)
    a, b = W.shape[0] - 1, W.shape[1] - 1
    table = np.full(W.shape, -np.inf)
    cur = top
    i, j, ok = _diag_index(a, b, d_top)
    table[i[ok], j[ok]] = cur[ok]
    for d in range(d_top - 1, -1, -1):
        i, j, ok = _diag_index(a, b, d)
        shifted = np.concatenate((cur[1:], [-np.inf]))
        nxt = W[i, j] - c + comb(shifted, cur)
        cur = np.where(ok, nxt, -np.inf)
        table[i[ok], j[ok]] = cur[ok]
    return table


def _scaled(values, beta):
    return values if np.isinf(beta) else beta * values


def _check_beta(beta):
    if not beta > 0:
        raise ValueError("beta must be positive or inf")


def dp_point_to_point(fld, beta: float, x, y) -> float:
    """G^beta_{x,y}: beta^-1 log of the |R|^-n averaged partition function (max at beta=inf)."""
    _check_beta(beta)
    V = fld.values if isinstance(fld, SampledField) else np.asarray(fld, dtype=float)
    x = np.asarray(x, dtype=int)
    y = np.asarray(y, dtype=int)
    dxy = y - x
    if np.any(dxy < 0):
        raise ValueError("endpoint is not reachable with steps e1, e2")
    if np.any(x < 0) or y[0] >= V.shape[0] or y[1] >= V.shape[1]:
        raise ValueError("points must lie in the box")
    W = _scaled(V[x[0]:y[0] + 1, x[1]:y[1] + 1], beta)
    cur, _ = _forward(W, beta, int(dxy.sum()))
    _, _, s = _ops(beta)
    return float(cur[dxy[0]] / s)


def point_to_point_table(fld, beta: float, box=None) -> np.ndarray:
    """G^beta_{0,x} for every x in the box (or the given sub-box [0, box])."""
    _check_beta(beta)
    V = fld.values if isinstance(fld, SampledField) else np.asarray(fld, dtype=float)
    if box is not None:
        V = V[:box[0] + 1, :box[1] + 1]
    _, table = _forward(_scaled(V, beta), beta, V.shape[0] + V.shape[1] - 2, keep=True)
    _, _, s = _ops(beta)
    return table / s


def backward_point_table(fld, beta: float, y) -> np.ndarray:
    """G^beta_{x,y} for every x in [0, y]."""
    _check_beta(beta)
    V = fld.values if isinstance(fld, SampledField) else np.asarray(fld, dtype=float)
    y = (int(y[0]), int(y[1]))
    if y[0] >= V.shape[0] or y[1] >= V.shape[1] or min(y) < 0:
        raise ValueError("target outside the box")
    W = _scaled(V[:y[0] + 1, :y[1] + 1], beta)
    top = np.full(y[0] + 1, -np.inf)
    top[y[0]] = 0.0
    _, _, s = _ops(beta)
    return _backward(W, beta, y[0] + y[1], top) / s


def dp_point_to_level(fld, beta: float, h, n: int) -> float:
    """G^beta_{0,(n)}(h) with terminal reward h.x_n."""
    _check_beta(beta)
    V = fld.values if isinstance(fld, SampledField) else np.asarray(fld, dtype=float)
    if n < 0 or n >= min(V.shape):
        raise ValueError("level n must satisfy n <= box side")
    h = np.asarray(h, dtype=float)
    W = _scaled(V[:n + 1, :n + 1], beta)
    cur, _ = _forward(W, beta, n)
    i = np.arange(n + 1)
    reward = h[0] * i + h[1] * (n - i)
    comb, _, s = _ops(beta)
    return float(comb.reduce(cur + s * reward) / s)


def level_table(fld, beta: float, h, N: int) -> np.ndarray:
    """G^beta_{x,(N-|x|)}(h) for every x with |x| <= N, with the tilt measured from x."""
    _check_beta(beta)
    V = fld.values if isinstance(fld, SampledField) else np.asarray(fld, dtype=float)
    if N >= min(V.shape):
        raise ValueError("level exceeds the box")
    h = np.asarray(h, dtype=float)
    W = _scaled(V[:N + 1, :N + 1], beta)
    _, _, s = _ops(beta)
    i = np.arange(N + 1)
    top = s * (h[0] * i + h[1] * (N - i))
    T = _backward(W, beta, N, top) / s
    I, J = np.indices(T.shape)
    return T - (h[0] * I + h[1] * J)


# -- estimators --------------------------------------------------------------

@dataclass
class Estimate:
    mean: float
    stderr: float
    samples: np.ndarray = field(repr=False)

    @classmethod
    def from_samples(cls, x):
        x = np.asarray(x, dtype=float)
        se = float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else math.nan
        return cls(float(np.mean(x)), se, x)


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        threads = int(os.environ.get("POLYVAR_THREADS", "1") or 1)
    return max(1, int(threads))


def _map_replicas(fn, replicas, threads):
    threads = resolve_threads(threads)
    if threads == 1:
        return [fn(r) for r in range(replicas)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, range(replicas)))


def _velocity(v) -> Velocity:
    if isinstance(v, Velocity):
        return v
    return Velocity.from_xi(StepSet.unit(2), v)


def estimate_gpp(dist: DistributionSpec, beta: float, v, n: int, replicas: int, seed: int,
                 threads: int | None = None, rounding_policy: str = "largest-remainder") -> Estimate:
    """Replica average of n^-1 G^beta_{0, xhat_n(xi)}."""
    v = _velocity(v)
    if not in_relative_interior(v):
        import warnings
        warnings.warn("velocity on the boundary of U", stacklevel=2)
    y = xhat(v, n, rounding_policy)

    def one(r):
        fld = sample_field(dist, tuple(y), seed, r)
        return dp_point_to_point(fld, beta, (0, 0), y) / n

    return Estimate.from_samples(_map_replicas(one, replicas, threads))


def staircase_pairs(k: int, step=(1, 0)) -> list:
    """Pairs (x, x + step) for x = (i, k - i), i = 0..k-1: a down-right line of starting points."""
    step = tuple(int(c) for c in step)
    return [((i, k - i), (i + step[0], k - i + step[1])) for i in range(k)]


@dataclass
class BusemannEstimate:
    """Per-pair, per-perturbation replica means; ``pooled[z]`` averages over pairs first."""

    pairs: list
    perturbations: list
    per_pair: dict
    pooled: dict


def estimate_busemann_pp(dist: DistributionSpec, beta: float, v, pairs, n: int, replicas: int,
                         seed: int, perturbations=None, threads: int | None = None) -> BusemannEstimate:
    """G_{x, xhat_n + z} - G_{y, xhat_n + z} for each pair (x, y) and each z in R and 0."""
    v = _velocity(v)
    if min(v.alphas) <= 0:
        raise InvalidVelocity("point-to-point Busemann estimates need every alpha_z > 0")
    if perturbations is None:
        perturbations = [(0, 0), (1, 0), (0, 1)]
    perturbations = [tuple(int(c) for c in z) for z in perturbations]
    pairs = [(tuple(int(c) for c in x), tuple(int(c) for c in y)) for x, y in pairs]
    base = xhat(v, n)
    for x, y in pairs:
        for p in (x, y):
            if min(p) < 0 or p[0] > base[0] or p[1] > base[1]:
                raise ValueError(f"pair point {p} outside [0, xhat_n]")
    box = (int(base[0]) + 1, int(base[1]) + 1)

    def one(r):
        fld = sample_field(dist, box, seed, r)
        out = np.empty((len(perturbations), len(pairs)))
        for k, z in enumerate(perturbations):
            T = backward_point_table(fld, beta, (base[0] + z[0], base[1] + z[1]))
            for m, (x, y) in enumerate(pairs):
                out[k, m] = T[x] - T[y]
        return out

    res = np.array(_map_replicas(one, replicas, threads))
    per_pair = {}
    pooled = {}
    for k, z in enumerate(perturbations):
        for m, pr in enumerate(pairs):
            per_pair[(pr, z)] = Estimate.from_samples(res[:, k, m])
        pooled[z] = Estimate.from_samples(res[:, k, :].mean(axis=1))
    return BusemannEstimate(pairs, perturbations, per_pair, pooled)


@dataclass
class LevelBusemannEstimate:
    per_step: dict
    sandwich_violations: int


def estimate_busemann_pl(dist: DistributionSpec, beta: float, h, n: int, replicas: int, seed: int,
                         starts: int = 1, threads: int | None = None) -> LevelBusemannEstimate:
    """G_{x,(n)}(h) - G_{x+z,(n-1)}(h) averaged over x = (i, starts-1-i), per step z.

    Every sample is checked against the lower bound V0(x) + h.z - beta^-1 log 2.
    """
    h = np.asarray(h, dtype=float)
    k0 = int(starts) - 1
    N = k0 + n
    steps = [(1, 0), (0, 1)]
    slack = 0.0 if np.isinf(beta) else LOG2 / beta

    def one(r):
        fld = sample_field(dist, N, seed, r)
        T = level_table(fld, beta, h, N)
        xs = np.arange(k0 + 1)
        ys = k0 - xs
        vals = []
        bad = 0
        for z in steps:
            b = T[xs, ys] - T[xs + z[0], ys + z[1]]
            lower = fld.values[xs, ys] + h @ np.array(z) - slack
            bad += int(np.sum(b < lower - 1e-9 * (1 + np.abs(lower))))
            vals.append(b.mean())
        return vals, bad

    out = _map_replicas(one, replicas, threads)
    arr = np.array([o[0] for o in out])
    viol = sum(o[1] for o in out)
    per_step = {z: Estimate.from_samples(arr[:, k]) for k, z in enumerate(steps)}
    return LevelBusemannEstimate(per_step, viol)


def sublinearity_check(potential, n: int) -> float:
    """max over |x|_1 = n, x >= 0 of |phi(x) - phi(0)| / n for a lattice potential phi.

    ``potential`` is a callable on an (k, 2) integer array or a 2-d array
    indexed by site.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    i = np.arange(n + 1)
    sites = np.stack([i, n - i], axis=1)
    if callable(potential):
        vals = np.asarray(potential(sites), dtype=float)
        zero = float(np.asarray(potential(np.zeros((1, 2), dtype=int)))[0])
    else:
        P = np.asarray(potential, dtype=float)
        vals = P[sites[:, 0], sites[:, 1]]
        zero = float(P[0, 0])
    return float(np.max(np.abs(vals - zero)) / n)


def lift_periodic(quotient, f):
    """The lattice potential x -> f(state at x) of a periodic corrector."""
    pot = np.asarray(getattr(f, "potential", f), dtype=float)

    def phi(sites):
        return pot[quotient.states_at(np.asarray(sites))]

    return phi


MC_HEADER = ("model", "beta", "param", "n", "replicas", "seed", "estimate", "stderr", "oracle", "abs_err")


def mc_row(model: str, beta, param, n, replicas, seed, est: Estimate, oracle=None) -> tuple:
    err = math.nan if oracle is None else abs(est.mean - oracle)
    return (model, beta, param, n, replicas, seed, est.mean, est.stderr,
            math.nan if oracle is None else oracle, err)


__all__ = [
    "BOX_CAP", "DistributionSpec", "SampledField", "sample_field", "draw_weights",
    "replica_generator", "dp_point_to_point", "dp_point_to_level", "point_to_point_table",
    "backward_point_table", "level_table", "Estimate", "estimate_gpp", "estimate_busemann_pp",
    "estimate_busemann_pl", "staircase_pairs", "sublinearity_check", "lift_periodic",
    "BusemannEstimate", "LevelBusemannEstimate", "MC_HEADER", "mc_row", "resolve_threads",
]

"""Admissible step sets, velocities, lattice approximants and brute-force paths.

The brute-force path enumerator is the verification oracle for every dynamic
program in the package, so it is deliberately the dumbest possible thing.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import CapExceeded, InvalidVelocity

PATH_CAP = 12
INTERIOR_TOL = 1e-10
_VEL_TOL = 1e-12


@dataclass(frozen=True)
class StepSet:
    """A finite step set R in Z^d.

    ``directed`` is computed: it is true when some u satisfies u.z = 1 for
    every step, which forces all paths between two points to have the same
    number of steps.
    """

    steps: tuple
    dimension: int = field(init=False)
    directed: bool = field(init=False)

    def __post_init__(self):
        steps = tuple(tuple(int(c) for c in z) for z in self.steps)
        if not steps:
            raise ValueError("step set must be nonempty")
        dims = {len(z) for z in steps}
        if len(dims) != 1:
            raise ValueError("all steps must have the same dimension")
        if len(set(steps)) != len(steps):
            raise ValueError("duplicate steps")
        if all(not any(z) for z in steps):
            raise ValueError("step set needs at least one nonzero step")
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "dimension", dims.pop())
        object.__setattr__(self, "directed", _has_unit_functional(self.array))

    @classmethod
    def unit(cls, d: int) -> "StepSet":
        """R = {e_1, ..., e_d}."""
        return cls(tuple(tuple(int(i == j) for j in range(d)) for i in range(d)))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.steps, dtype=float).reshape(len(self.steps), -1)

    @property
    def int_array(self) -> np.ndarray:
        return np.array(self.steps, dtype=np.int64).reshape(len(self.steps), -1)

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def index(self, z) -> int:
        try:
            return self.steps.index(tuple(int(c) for c in z))
        except ValueError:
            raise KeyError(f"{tuple(z)} is not an admissible step") from None


def _has_unit_functional(Z: np.ndarray) -> bool:
    # u.z = 1 for all z is a linear system; least squares decides feasibility exactly
    u, *_ = np.linalg.lstsq(Z, np.ones(len(Z)), rcond=None)
    return bool(np.max(np.abs(Z @ u - 1.0)) < 1e-9)


@dataclass(frozen=True)
class Velocity:
    """A point xi of the convex hull U together with convex weights alpha_z."""

    steps: StepSet
    alphas: tuple
    xi: np.ndarray = field(init=False, compare=False)

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=float)
        if a.shape != (len(self.steps),):
            raise InvalidVelocity("need one weight per step")
        if np.any(a < -_VEL_TOL) or abs(a.sum() - 1.0) > _VEL_TOL:
            raise InvalidVelocity(f"weights {a} are not a probability vector")
        a = np.clip(a, 0.0, None)
        object.__setattr__(self, "alphas", tuple(a))
        object.__setattr__(self, "xi", a @ self.steps.array)

    @classmethod
    def from_xi(cls, steps: StepSet, xi, interior: bool = True) -> "Velocity":
        """Find convex weights representing ``xi``.

        With ``interior=True`` the weights maximize the smallest alpha_z, so all
        of them are positive whenever xi lies in ri U.
        """
        a, t = _max_min_weights(steps, xi)
        if a is None:
            raise InvalidVelocity(f"{list(xi)} is not in the convex hull of the steps")
        if not interior:
            a = np.where(a < INTERIOR_TOL, 0.0, a)
            a /= a.sum()
        return cls(steps, tuple(a))

    def check(self, xi, tol: float = _VEL_TOL) -> None:
        if np.max(np.abs(self.xi - np.asarray(xi, dtype=float))) > tol:
            raise InvalidVelocity("weights do not reproduce xi")


def _max_min_weights(steps: StepSet, xi):
    """LP: maximize t subject to alpha >= t, sum alpha = 1, sum alpha z = xi."""
    Z = steps.array
    k, d = Z.shape
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (d,):
        raise InvalidVelocity("xi has the wrong dimension")
    # variables (alpha_1..alpha_k, t)
    c = np.zeros(k + 1)
    c[-1] = -1.0
    A_eq = np.zeros((d + 1, k + 1))
    A_eq[:d, :k] = Z.T
    A_eq[d, :k] = 1.0
    b_eq = np.append(xi, 1.0)
    A_ub = np.hstack([-np.eye(k), np.ones((k, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(k), A_eq=A_eq, b_eq=b_eq,
                  bounds=[(0, None)] * k + [(None, 1.0)], method="highs")
    if res.status != 0:
        return None, None
    a = np.clip(res.x[:k], 0.0, None)
    return a / a.sum(), float(res.x[-1])


def in_relative_interior(v, steps: StepSet | None = None) -> bool:
    """True iff xi has a convex representation with every alpha_z > 1e-10.

    ``v`` may be a Velocity or a bare xi vector (then ``steps`` is required).
    """
    if isinstance(v, Velocity):
        steps, xi = v.steps, v.xi
    else:
        xi = v
    _, t = _max_min_weights(steps, xi)
    return t is not None and t > INTERIOR_TOL


def xhat(v: Velocity, n: int, rounding_policy: str = "largest-remainder") -> np.ndarray:
    """Lattice point reachable in n steps that approximates n*xi.

    Each step z is used floor(n alpha_z) + b_z times with b_z in {0, 1}; the
    leftover units go to the largest fractional parts (ties by step order)
    or, under ``"lexicographic"``, to the first steps with a fractional part.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    return v.steps.int_array.T @ step_counts(v, n, rounding_policy)


def step_counts(v: Velocity, n: int, rounding_policy: str = "largest-remainder") -> np.ndarray:
    a = np.asarray(v.alphas)
    na = n * a
    near = np.round(na)
    na = np.where(np.abs(na - near) < 1e-9, near, na)
    base = np.floor(na).astype(np.int64)
    frac = na - base
    left = n - int(base.sum())
    eligible = [i for i in range(len(a)) if a[i] > 0 and frac[i] > 0]
    if rounding_policy == "largest-remainder":
        # fractional parts within 1e-9 count as tied so float noise cannot reorder them
        eligible.sort(key=lambda i: (-round(frac[i], 9), i))
    elif rounding_policy != "lexicographic":
        raise ValueError(f"unknown rounding policy {rounding_policy!r}")
    b = np.zeros_like(base)
    b[eligible[:left]] = 1
    return base + b


def enumerate_paths(steps: StepSet, n: int, endpoint=None, cap: int = PATH_CAP) -> list:
    """All step sequences of length n (lexicographic in step order).

    With ``endpoint`` only the sequences summing to it are returned.
    """
    if n > cap:
        raise CapExceeded(f"n={n} exceeds the enumeration cap {cap}")
    target = None if endpoint is None else tuple(int(c) for c in endpoint)
    out = []
    for seq in itertools.product(steps.steps, repeat=n):
        if target is not None:
            end = tuple(map(sum, zip(*seq))) if seq else (0,) * steps.dimension
            if end != target:
                continue
        out.append(seq)
    return out

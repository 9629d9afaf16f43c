"""Finite environment spaces built from periodic weight fields.

A periodic field on Z^d is reduced to the finite set of its distinct shifts.
States are indexed 0..m-1 with state 0 the unshifted field, and the shift
action of each admissible step is stored as an integer table.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from math import gcd
from pathlib import Path

import numpy as np

from .errors import NotIrreducible
from .steps import StepSet


@dataclass(frozen=True)
class PeriodicEnvironment:
    """Weights on the fundamental rectangle, extended periodically.

    ``weights`` has shape ``period`` and is indexed by the residue of a site.
    """

    period: tuple
    weights: np.ndarray

    def __post_init__(self):
        period = tuple(int(p) for p in self.period)
        if not period or min(period) < 1:
            raise ValueError("period entries must be >= 1")
        w = np.asarray(self.weights, dtype=float)
        if w.size != int(np.prod(period)):
            raise ValueError(f"expected {int(np.prod(period))} weights, got {w.size}")
        w = w.reshape(period)
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "period", period)
        object.__setattr__(self, "weights", w)

    @property
    def dimension(self) -> int:
        return len(self.period)

    def value(self, x) -> float:
        return float(self.weights[tuple(np.mod(np.asarray(x), self.period))])


class QuotientSpace:
    """Finite state space with the shift action of the steps.

    Parameters
    ----------
    steps : StepSet
    shift_table : (m, |R|) int array
        ``shift_table[w, k]`` is the state T_z w for the k-th step z.
    base_weights : (m,) array
        The potential V0 at each state.
    residues : optional dict
        Maps a residue (tuple) of the periodic lattice to its state, when the
        space comes from a periodic field.
    """

    def __init__(self, steps: StepSet, shift_table, base_weights, residues=None, period=None):
        self.steps = steps
        self.shift_table = np.asarray(shift_table, dtype=np.int64)
        self.base_weights = np.asarray(base_weights, dtype=float)
        self.residues = residues
        self.period = period
        m = len(self.base_weights)
        if self.shift_table.shape != (m, len(steps)):
            raise ValueError("shift table must have shape (m, |R|)")
        if self.shift_table.min() < 0 or self.shift_table.max() >= m:
            raise ValueError("shift table refers to unknown states")
        self._check_action()
        self._check_irreducible()
        self.shift_table.setflags(write=False)
        self.base_weights.setflags(write=False)

    @property
    def m(self) -> int:
        return len(self.base_weights)

    def __len__(self):
        return self.m

    def __repr__(self):
        return f"QuotientSpace(m={self.m}, steps={self.steps.steps})"

    def shift(self, state: int, z) -> int:
        """T_z applied to ``state``; ``z`` is a step vector or a step index."""
        k = z if isinstance(z, (int, np.integer)) else self.steps.index(z)
        return int(self.shift_table[state, k])

    def state_at(self, x) -> int:
        """State of the lattice site x (periodic spaces only)."""
        if self.residues is None:
            raise ValueError("quotient has no lattice coordinates")
        return self.residues[tuple(int(c) for c in np.mod(np.asarray(x), self.period))]

    def states_at(self, sites: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`state_at` over an (..., d) integer array."""
        r = np.mod(np.asarray(sites, dtype=np.int64), self.period)
        lookup = np.full(self.period, -1, dtype=np.int64)
        for res, s in self.residues.items():
            lookup[res] = s
        return lookup[tuple(np.moveaxis(r, -1, 0))]

    def successor_sets(self):
        return [set(int(t) for t in row) for row in self.shift_table]

    def _check_action(self):
        T = self.shift_table
        for k in range(T.shape[1]):
            if len(set(T[:, k].tolist())) != self.m:
                raise ValueError(f"shift by step {self.steps.steps[k]} is not a bijection")
        for a in range(T.shape[1]):
            for b in range(a + 1, T.shape[1]):
                if not np.array_equal(T[T[:, a], b], T[T[:, b], a]):
                    raise ValueError("shifts do not commute")

    def _check_irreducible(self):
        succ = self.successor_sets()
        for s in range(self.m):
            seen = _reach(succ, s)
            if len(seen) < self.m:
                t = min(set(range(self.m)) - seen)
                raise NotIrreducible(f"state {t} is unreachable from state {s}", pair=(s, t))


def _reach(succ, s):
    seen = {s}
    todo = [s]
    while todo:
        u = todo.pop()
        for v in succ[u]:
            if v not in seen:
                seen.add(v)
                todo.append(v)
    return seen


def build_quotient(env: PeriodicEnvironment, steps: StepSet, merge: bool = True) -> QuotientSpace:
    """Orbit of the unshifted field under the steps, modulo the period.

    With ``merge`` (default) residues whose shifted fields coincide are
    identified by partition refinement, giving the minimal state space.
    """
    if steps.dimension != env.dimension:
        raise ValueError("step dimension does not match the environment")
    p = np.array(env.period)
    origin = (0,) * env.dimension
    order = [origin]
    index = {origin: 0}
    queue = deque([origin])
    while queue:
        r = queue.popleft()
        for z in steps.steps:
            t = tuple(int(c) for c in np.mod(np.add(r, z), p))
            if t not in index:
                index[t] = len(order)
                order.append(t)
                queue.append(t)
    table = np.array([[index[tuple(int(c) for c in np.mod(np.add(r, z), p))] for z in steps.steps]
                      for r in order], dtype=np.int64)
    weights = np.array([env.weights[r] for r in order])
    if not merge:
        return QuotientSpace(steps, table, weights, residues=dict(index), period=env.period)

    block = _refine(table, weights)
    nb = int(block.max()) + 1
    reps = [int(np.flatnonzero(block == b)[0]) for b in range(nb)]
    merged_table = block[table[reps]]
    residues = {r: int(block[i]) for r, i in index.items()}
    return QuotientSpace(steps, merged_table, weights[reps], residues=residues, period=env.period)


def _refine(table: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Coarsest partition compatible with the weights and the shift table.

    Blocks are numbered by first appearance so state 0 stays block 0.
    """
    _, block = np.unique(weights, return_inverse=True)
    block = _renumber(block)
    while True:
        keys = [(int(block[i]),) + tuple(int(block[j]) for j in table[i]) for i in range(len(block))]
        ids = {}
        new = np.array([ids.setdefault(k, len(ids)) for k in keys], dtype=np.int64)
        if new.max() == block.max():
            return new
        block = new


def _renumber(labels):
    ids = {}
    return np.array([ids.setdefault(int(b), len(ids)) for b in labels], dtype=np.int64)


def period_of_pattern(succ) -> int:
    """Period (gcd of cycle lengths) of a strongly connected digraph."""
    level = {0: 0}
    queue = deque([0])
    g = 0
    while queue:
        u = queue.popleft()
        for v in succ[u]:
            if v not in level:
                level[v] = level[u] + 1
                queue.append(v)
            else:
                g = gcd(g, level[u] + 1 - level[v])
    return abs(g) if g else 0


@dataclass(frozen=True)
class GradientCocycle:
    """F(w, 0, z) = f(T_z w) - f(w) for a potential f on the states."""

    quotient: QuotientSpace
    potential: np.ndarray

    def increments(self) -> np.ndarray:
        """(m, |R|) array of F(w, 0, z)."""
        f = np.asarray(self.potential, dtype=float)
        return f[self.quotient.shift_table] - f[:, None]

    def __call__(self, state: int, z) -> float:
        return float(self.potential[self.quotient.shift(state, z)] - self.potential[state])

    def shifted(self, c: float) -> "GradientCocycle":
        return GradientCocycle(self.quotient, np.asarray(self.potential) + c)


def stripes(height: int = 1) -> tuple[PeriodicEnvironment, StepSet]:
    """Vertical stripes of ones and zeros with a one at the origin."""
    w = np.zeros((2, height))
    w[0, :] = 1.0
    return PeriodicEnvironment((2, height), w), StepSet.unit(2)


def load_environment(source) -> tuple[PeriodicEnvironment, StepSet]:
    """Read ``{dimension, period, weights, steps}`` from a JSON path or dict.

    ``weights`` is a flat row-major array over the fundamental rectangle.
    """
    if isinstance(source, dict):
        doc = source
    else:
        doc = json.loads(Path(source).read_text())
    d = int(doc["dimension"])
    period = tuple(int(p) for p in doc["period"])
    if len(period) != d:
        raise ValueError("period length must equal dimension")
    env = PeriodicEnvironment(period, np.asarray(doc["weights"], dtype=float).reshape(period))
    steps = StepSet(tuple(tuple(z) for z in doc["steps"]))
    if steps.dimension != d:
        raise ValueError("steps must have the environment dimension")
    return env, steps


def random_periodic_environment(rng: np.random.Generator, max_cells: int = 8, low=-1.0, high=1.0):
    """A random periodic field on Z^2 with at most ``max_cells`` cells, and a step set.

    Step sets are drawn from a few directed and undirected choices so that
    loops, parallel edges and periodic patterns all show up.
    """
    choices = [
        ((1, 0), (0, 1)),
        ((1, 0), (0, 1), (1, 1)),
        ((1, 0), (0, 1), (0, 0)),
        ((1, 1), (-1, 1)),
        ((1, 1), (-1, 1), (0, 1)),
    ]
    steps = StepSet(choices[rng.integers(len(choices))])
    while True:
        p = (int(rng.integers(1, max_cells + 1)), int(rng.integers(1, max_cells + 1)))
        if p[0] * p[1] <= max_cells:
            break
    w = rng.uniform(low, high, size=p)
    return PeriodicEnvironment(p, w), steps


def random_quotient(rng: np.random.Generator, max_states: int = 8) -> QuotientSpace:
    env, steps = random_periodic_environment(rng, max_cells=max_states)
    return build_quotient(env, steps)

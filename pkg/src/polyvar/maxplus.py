"""Zero-temperature periodic theory: max-plus eigenproblems on a finite quotient.

The point-to-level last-passage constant at tilt h is the max-plus eigenvalue
of ``A(w, w') = V0(w) + max_{z: T_z w = w'} h.z``. It is computed three
independent ways (Karp's dynamic program, elementary-circuit enumeration,
and a min-max search over difference constraints) so they can be played
against each other.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm

import numpy as np
from scipy.optimize import linprog

from .errors import CapExceeded, DegeneracyWarning, InvalidVelocity
from .periodic import GradientCocycle, QuotientSpace, period_of_pattern
from .steps import Velocity

NEG = -np.inf
CRITICAL_TOL = 1e-9


@dataclass(frozen=True)
class Edge:
    source: int
    step: int
    target: int
    weight: float


@dataclass
class MaxPlusMatrix:
    """Max-plus matrix of a quotient at tilt h plus the underlying multigraph.

    ``edge_labels[(w, w')]`` lists the step indices attaining the entry;
    ``edges`` keeps every (w, z) pair, including non-maximal parallel edges.
    """

    quotient: QuotientSpace
    h: np.ndarray
    entries: np.ndarray
    edge_labels: dict
    edges: list

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    def finite_entries(self) -> np.ndarray:
        return self.entries[np.isfinite(self.entries)]


def build_maxplus_matrix(q: QuotientSpace, h) -> MaxPlusMatrix:
    h = np.asarray(h, dtype=float)
    hz = q.steps.array @ h
    m = q.m
    A = np.full((m, m), NEG)
    labels: dict = {}
    edges = []
    for w in range(m):
        for k, t in enumerate(q.shift_table[w]):
            t = int(t)
            wt = q.base_weights[w] + hz[k]
            edges.append(Edge(w, k, t, float(wt)))
            if wt > A[w, t] + 1e-12:
                A[w, t] = wt
                labels[(w, t)] = [k]
            elif abs(wt - A[w, t]) <= 1e-12:
                labels[(w, t)].append(k)
    return MaxPlusMatrix(q, h, A, labels, edges)


def _entries(A) -> np.ndarray:
    return A.entries if isinstance(A, MaxPlusMatrix) else np.asarray(A, dtype=float)


def karp_eigenvalue(A, exact: bool = True) -> float:
    """Maximum cycle mean by Karp's dynamic program.

    D_k(v) is the best weight of a k-edge walk ending at v (any start);
    lambda = max_v min_{k<m} (D_m(v) - D_k(v)) / (m - k). With ``exact`` the
    recursion runs on Fractions, which is exact for float inputs.
    """
    W = _entries(A)
    m = W.shape[0]
    fin = np.isfinite(W)
    conv = Fraction if exact else float
    w = [[conv(float(W[i, j])) if fin[i, j] else None for j in range(m)] for i in range(m)]
    D = [[conv(0)] * m]
    for _ in range(m):
        prev = D[-1]
        cur = []
        for v in range(m):
            best = None
            for u in range(m):
                if w[u][v] is None or prev[u] is None:
                    continue
                c = prev[u] + w[u][v]
                if best is None or c > best:
                    best = c
            cur.append(best)
        D.append(cur)
    lam = None
    for v in range(m):
        if D[m][v] is None:
            continue
        worst = None
        for k in range(m):
            if D[k][v] is None:
                continue
            r = (D[m][v] - D[k][v]) / (m - k)
            if worst is None or r < worst:
                worst = r
        if worst is not None and (lam is None or worst > lam):
            lam = worst
    if lam is None:
        raise ValueError("matrix has no cycles")
    return float(lam)


@dataclass(frozen=True)
class Circuit:
    nodes: tuple
    steps: tuple
    weight: float
    mean_step: np.ndarray = field(compare=False)
    potential_mean: float = 0.0

    @property
    def length(self) -> int:
        return len(self.nodes)

    @property
    def mean(self) -> float:
        return self.weight / len(self.nodes)


@dataclass
class CircuitSet:
    circuits: list
    h: np.ndarray
    complete: bool = True

    def __len__(self):
        return len(self.circuits)

    def __iter__(self):
        return iter(self.circuits)

    def means(self) -> np.ndarray:
        return np.array([c.mean for c in self.circuits])


def _node_cycles(succ, m, cap):
    """Elementary cycles of a digraph, each rooted at its smallest node."""
    out = []
    for s in range(m):
        path = [s]
        on_path = {s}
        stack = [iter(sorted(v for v in succ[s] if v >= s))]
        while stack:
            nxt = next(stack[-1], None)
            if nxt is None:
                stack.pop()
                on_path.discard(path.pop())
                continue
            if nxt == s:
                out.append(tuple(path))
                if len(out) > cap:
                    return out, False
            elif nxt not in on_path:
                path.append(nxt)
                on_path.add(nxt)
                stack.append(iter(sorted(v for v in succ[nxt] if v >= s)))
    return out, True


def enumerate_circuits(A: MaxPlusMatrix, cap: int = 10**6) -> CircuitSet:
    """All elementary circuits of the multigraph (Omega, E).

    Node cycles are found by depth-first search rooted at each cycle's
    smallest node; each node cycle is then expanded over every choice of
    parallel edge, so circuits differ by step labels as well as nodes.
    """
    q = A.quotient
    m = q.m
    par: dict = {}
    for e in A.edges:
        par.setdefault((e.source, e.target), []).append(e)
    succ = [sorted({t for (s, t) in par if s == u}) for u in range(m)]
    cycles, complete = _node_cycles(succ, m, cap)
    Z = q.steps.array
    out = []
    for nodes in cycles:
        hops = [par[(nodes[i], nodes[(i + 1) % len(nodes)])] for i in range(len(nodes))]
        for choice in itertools.product(*hops):
            wt = sum(e.weight for e in choice)
            ks = tuple(e.step for e in choice)
            out.append(Circuit(nodes, ks, float(wt), Z[list(ks)].mean(axis=0),
                               float(np.mean(q.base_weights[list(nodes)]))))
            if len(out) > cap:
                return CircuitSet(out, A.h, complete=False)
    return CircuitSet(out, A.h, complete=complete)


def measure_variational_value(circuits: CircuitSet) -> float:
    """Best average weight over circuits, i.e. over extreme shift-invariant measures."""
    if not circuits.complete:
        raise CapExceeded("circuit enumeration is partial")
    return float(circuits.means().max())


def _bellman_ford(m, arcs, slack=1e-13):
    """Potentials f with f[v] <= f[u] + c for every arc (u, v, c), or None on a negative cycle."""
    f = np.zeros(m)
    for _ in range(m + 1):
        changed = False
        for u, v, c in arcs:
            if f[u] + c < f[v] - slack:
                f[v] = f[u] + c
                changed = True
        if not changed:
            return f
    return None


def minmax_via_difference_constraints(A: MaxPlusMatrix, tol: float = 1e-10):
    """Smallest t with a potential f such that A(w,w') + f(w') - f(w) <= t on every edge.

    Feasibility at t is a system of difference constraints decided by
    Bellman-Ford; t is found by bisection on [min entry, max entry].
    Returns ``(t, GradientCocycle)``.
    """
    W = A.entries
    pairs = [(i, j, W[i, j]) for i, j in zip(*np.nonzero(np.isfinite(W)))]
    lo, hi = float(A.finite_entries().min()), float(A.finite_entries().max())

    def feasible(t):
        return _bellman_ford(A.m, [(i, j, t - a) for i, j, a in pairs])

    f = feasible(hi)
    if lo == hi:
        return hi, GradientCocycle(A.quotient, f - f[0])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        g = feasible(mid)
        if g is None:
            lo = mid
        else:
            hi, f = mid, g
    return hi, GradientCocycle(A.quotient, f - f[0])


def cocycle_value(A: MaxPlusMatrix, F: GradientCocycle) -> np.ndarray:
    """max_z {V0(w) + h.z + F(w,0,z)} for every state w."""
    q = A.quotient
    vals = q.base_weights[:, None] + (q.steps.array @ A.h)[None, :] + F.increments()
    return vals.max(axis=1)


def _kleene_star(W: np.ndarray) -> np.ndarray:
    """Max-plus closure I + W + W^2 + ... by Floyd-Warshall (no positive cycles assumed)."""
    m = W.shape[0]
    S = W.copy()
    for k in range(m):
        S = np.maximum(S, S[:, [k]] + S[[k], :])
    S_plus = S
    star = S_plus.copy()
    np.fill_diagonal(star, np.maximum(np.diag(star), 0.0))
    return star, S_plus


def _sccs(succ, nodes):
    """Strongly connected components (Tarjan) of the subgraph on ``nodes``."""
    index, low, on, stack, comps = {}, {}, set(), [], []
    counter = [0]

    def visit(v):
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on.add(v)
        for w in succ[v]:
            if w not in nodes:
                continue
            if w not in index:
                visit(w)
                low[v] = min(low[v], low[w])
            elif w in on:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = []
            while True:
                w = stack.pop()
                on.discard(w)
                comp.append(w)
                if w == v:
                    break
            comps.append(sorted(comp))

    for v in sorted(nodes):
        if v not in index:
            visit(v)
    return sorted(comps)


@dataclass
class MaxPlusEigen:
    lam: float
    sigma: np.ndarray
    critical_nodes: list
    critical_edges: list
    components: list
    cyclicities: list
    primitive: bool
    residual: float

    @property
    def cyclicity(self) -> int:
        return lcm(*self.cyclicities) if self.cyclicities else 1


def eigenvector_and_critical_graph(A: MaxPlusMatrix, lam: float | None = None,
                                   tol: float = CRITICAL_TOL) -> MaxPlusEigen:
    """Eigenvector from the Kleene star of A - lambda, and the critical graph.

    sigma is the star column at the smallest critical node, shifted so that
    sigma[0] = 0. Critical edges are those lying on a zero-weight cycle of
    A - lambda; cyclicity of a critical component is the gcd of its cycle
    lengths.
    """
    if lam is None:
        lam = karp_eigenvalue(A)
    W = A.entries - lam
    star, plus = _kleene_star(W)
    diag = np.diag(plus)
    crit = [i for i in range(A.m) if diag[i] >= -tol]
    near = [i for i in range(A.m) if -tol <= diag[i] < -1e-12]
    if near:
        warnings.warn(f"near-critical cycles through states {near} (|mean - lambda| <= {tol})",
                      DegeneracyWarning, stacklevel=2)
    c = crit[0]
    sigma = star[:, c] - star[0, c]
    cset = set(crit)
    edges = [(i, j) for i in crit for j in crit
             if np.isfinite(W[i, j]) and W[i, j] + star[j, i] >= -tol]
    succ = {i: [j for (a, j) in edges if a == i] for i in crit}
    comps = _sccs(succ, cset)
    cycl = []
    for comp in comps:
        local = {v: k for k, v in enumerate(comp)}
        s = [[local[j] for j in succ[v] if j in local] for v in comp]
        cycl.append(period_of_pattern(s))
    resid = float(np.max(np.abs(np.max(W + sigma[None, :], axis=1) - sigma)))
    return MaxPlusEigen(lam, sigma, crit, edges, comps, cycl,
                        len(comps) == 1 and cycl[0] == 1, resid)


@dataclass
class BusemannReport:
    state: int
    step: int
    limit: float | None
    period: int | None
    values: tuple
    formula: float | None
    trace: np.ndarray = field(repr=False)

    @property
    def converged(self) -> bool:
        return self.limit is not None


def busemann_maxplus(A: MaxPlusMatrix, n_max: int = 400, eig: MaxPlusEigen | None = None,
                     tol: float = 1e-9) -> dict:
    """Finite-n point-to-level gradients (A^n 0)(w) - (A^(n-1) 0)(T_z w).

    Returns ``{(w, k): BusemannReport}``. A report carries ``limit`` when the
    tail of the trace is constant, otherwise the detected period and the
    repeating values (``period`` is None if no period was found).
    """
    q = A.quotient
    if n_max < 2 * A.m:
        raise ValueError("n_max must be at least 2m")
    if eig is None:
        eig = eigenvector_and_critical_graph(A)
    lam = eig.lam
    W = A.entries
    # centered iterates v_n = A^n 0 - n*lambda keep magnitudes bounded
    v = np.zeros(A.m)
    T = q.shift_table
    trace = np.empty((n_max, A.m, T.shape[1]))
    for n in range(1, n_max + 1):
        v_new = np.max(W + v[None, :], axis=1) - lam
        trace[n - 1] = v_new[:, None] - v[T] + lam
        v = v_new
    L = eig.cyclicity
    window = max(2 * L, 4)
    out = {}
    for w in range(A.m):
        for k in range(T.shape[1]):
            tr = trace[:, w, k]
            tail = tr[-window:]
            formula = lam + eig.sigma[w] - eig.sigma[T[w, k]] if eig.primitive else None
            if np.ptp(tail) <= tol:
                out[(w, k)] = BusemannReport(w, k, float(tail[-1]), None, (float(tail[-1]),),
                                             formula, tr)
                continue
            per = _detect_period(tr, max_period=max(2 * L, 8), tol=tol)
            vals = tuple(float(x) for x in tr[-per:]) if per else ()
            out[(w, k)] = BusemannReport(w, k, None, per, vals, formula, tr)
    return out


def _detect_period(tr, max_period, tol):
    for p in range(2, max_period + 1):
        if len(tr) < 3 * p:
            break
        tail = tr[-3 * p:]
        if np.max(np.abs(tail[p:] - tail[:-p])) <= tol:
            return p
    return None


def last_passage_levels(A: MaxPlusMatrix, n: int) -> np.ndarray:
    """(A^n 0)(w) for every state: best n-step point-to-level value from w."""
    v = np.zeros(A.m)
    for _ in range(n):
        v = np.max(A.entries + v[None, :], axis=1)
    return v


def gpp_periodic(circuits: CircuitSet, v) -> float:
    """Point-to-point constant at velocity xi from the circuit hull.

    Maximizes sum_c w_c (mean potential)_c over probability weights with
    sum_c w_c (mean step)_c = xi; the mean potential excludes the tilt, so
    the circuits may have been enumerated at any h.
    """
    if not circuits.complete:
        raise CapExceeded("circuit enumeration is partial")
    xi = v.xi if isinstance(v, Velocity) else np.asarray(v, dtype=float)
    S = np.array([c.mean_step for c in circuits])
    P = np.array([c.potential_mean for c in circuits])
    k = len(P)
    A_eq = np.vstack([S.T, np.ones(k)])
    b_eq = np.append(xi, 1.0)
    res = linprog(-P, A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * k, method="highs")
    if res.status != 0:
        raise InvalidVelocity(f"xi={xi.tolist()} is outside the hull of circuit mean steps")
    return float(-res.fun)


def lambda_of_tilt(q: QuotientSpace, h) -> float:
    return karp_eigenvalue(build_maxplus_matrix(q, h))


__all__ = [
    "MaxPlusMatrix", "Circuit", "CircuitSet", "MaxPlusEigen", "BusemannReport",
    "build_maxplus_matrix", "karp_eigenvalue", "enumerate_circuits",
    "measure_variational_value", "minmax_via_difference_constraints", "cocycle_value",
    "eigenvector_and_critical_graph", "busemann_maxplus", "last_passage_levels",
    "gpp_periodic", "lambda_of_tilt",
]

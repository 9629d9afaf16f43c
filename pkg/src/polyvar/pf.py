"""Positive-temperature periodic theory via Perron-Frobenius.

At inverse temperature beta and tilt h the transfer matrix is

    A[w, w'] = |R|^-1 sum_{z: T_z w = w'} exp(beta (V0(w) + h.z))

and the point-to-level free energy is beta^-1 log rho(A). Matrices and
eigenvectors are kept in the log domain, so large beta does not overflow.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import ConvergenceError, NotPrimitive, OverflowGuardError
from .maxplus import karp_eigenvalue
from .periodic import GradientCocycle, QuotientSpace, period_of_pattern

OVERFLOW_EXPONENT = 700.0
LOG_DOMAIN_BETA = 50.0


@dataclass
class TransferMatrix:
    quotient: QuotientSpace
    h: np.ndarray
    beta: float
    log_entries: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return self.quotient.m

    @property
    def entries(self) -> np.ndarray:
        with np.errstate(over="raise"):
            return np.exp(self.log_entries)


def _step_exponents(q: QuotientSpace, h, beta):
    hz = q.steps.array @ np.asarray(h, dtype=float)
    return beta * (q.base_weights[:, None] + hz[None, :])


def build_transfer_matrix(q: QuotientSpace, h, beta: float = 1.0,
                          log_domain: bool | None = None) -> TransferMatrix:
    """Transfer matrix of the quotient at tilt h and inverse temperature beta.

    Without ``log_domain`` the exponents must satisfy
    beta (max|V0| + max|h.z|) <= 700 so that ``entries`` is representable;
    ``log_domain=None`` turns the log-domain path on automatically for
    beta >= 50.
    """
    if not beta > 0 or not np.isfinite(beta):
        raise ValueError("beta must be a positive finite number")
    h = np.asarray(h, dtype=float)
    if log_domain is None:
        log_domain = beta >= LOG_DOMAIN_BETA
    span = beta * (np.max(np.abs(q.base_weights)) + np.max(np.abs(q.steps.array @ h)))
    if not log_domain and span > OVERFLOW_EXPONENT:
        raise OverflowGuardError(
            f"beta*(max|V0| + max|h.z|) = {span:.1f} > {OVERFLOW_EXPONENT}; "
            "pass log_domain=True")
    expo = _step_exponents(q, h, beta) - np.log(len(q.steps))
    m = q.m
    L = np.full((m, m), -np.inf)
    for w in range(m):
        for k, t in enumerate(q.shift_table[w]):
            L[w, t] = np.logaddexp(L[w, t], expo[w, k])
    return TransferMatrix(q, h, float(beta), L)


@dataclass
class PFSolution:
    """Perron root and eigenvectors; the vectors are held as logarithms.

    At large beta the eigenvector entries span more than the double range,
    so ``rev`` and ``lev`` are derived views that may under- or overflow.
    """

    matrix: TransferMatrix
    log_rho: float
    log_lev: np.ndarray
    log_rev: np.ndarray
    residual: float
    iterations: int

    @property
    def rho(self) -> float:
        return float(np.exp(self.log_rho))

    @property
    def g_pl(self) -> float:
        return self.log_rho / self.matrix.beta

    @property
    def rev(self) -> np.ndarray:
        return np.exp(self.log_rev)

    @property
    def lev(self) -> np.ndarray:
        return np.exp(self.log_lev)

    @property
    def mu0(self) -> np.ndarray:
        return np.exp(self.log_lev + self.log_rev)


def _log_matmul(X, Y):
    return logsumexp(X[:, :, None] + Y[None, :, :], axis=1)


def _log_residual(L, log_rho, lr, ll):
    """Componentwise relative residuals of A r = rho r and l A = rho l, from logs."""
    ar = logsumexp(L + lr[None, :], axis=1)
    la = logsumexp(L + ll[:, None], axis=0)
    return max(np.max(np.abs(np.expm1(ar - log_rho - lr))),
               np.max(np.abs(np.expm1(la - log_rho - ll))))


def solve_pf(T: TransferMatrix, tol: float = 1e-12, max_squarings: int = 256,
             floor: float = 1e-9) -> PFSolution:
    """Perron root and left/right eigenvectors by power iteration in the log domain.

    The iteration runs on B = A + eps*I, where eps is the geometric mean weight of
    the best cycle of A (so it is within a factor |R| of rho), which kills any
    periodicity. Powers of B are formed by repeated squaring: k squarings
    apply 2^k power-iteration steps, which still converges when the second
    eigenvalue is extremely close to rho in modulus, as happens at large beta.
    All products are log-sum-exp, so nothing over- or underflows.

    Stops when the componentwise residual reaches ``tol``, or when it has
    stopped improving at a level below ``floor`` (rounding in the logs).
    rev is normalized to sum m and lev so that sum(lev * rev) = 1.
    """
    L = T.log_entries
    m = L.shape[0]
    finite = np.where(np.isfinite(L), L, -np.inf)
    log_eps = karp_eigenvalue(finite, exact=False)
    P = L.copy()
    P[np.diag_indices(m)] = np.logaddexp(np.diag(L), log_eps)
    res = np.inf
    best, stall = np.inf, 0
    for k in range(1, max_squarings + 1):
        P = _log_matmul(P, P)
        P -= P.max()
        lr = logsumexp(P, axis=1)
        ll = logsumexp(P, axis=0)
        if not (np.all(np.isfinite(lr)) and np.all(np.isfinite(ll))):
            continue
        ar = logsumexp(L + lr[None, :], axis=1)
        log_rho = float(logsumexp(ll + ar) - logsumexp(ll + lr))
        res = float(_log_residual(L, log_rho, lr, ll))
        if res <= tol:
            break
        if res < best * 0.5:
            best, stall = res, 0
        else:
            stall += 1
            if stall >= 3 and best <= floor:
                break
    else:
        raise ConvergenceError(f"power iteration stalled, residual {res:.3g}", residual=res)
    lr = lr - (logsumexp(lr) - np.log(m))
    ll = ll - logsumexp(ll + lr)
    return PFSolution(T, log_rho, ll, lr, res, 2 ** k)


def corrector_from_rev(sol: PFSolution) -> GradientCocycle:
    """Gradient of f = beta^-1 log rev; it makes the cocycle bracket constant in w."""
    return GradientCocycle(sol.matrix.quotient, sol.log_rev / sol.matrix.beta)


def cocycle_bracket(q: QuotientSpace, h, beta: float, f) -> np.ndarray:
    """Per-state value of the cocycle variational bracket for the gradient of f.

    For finite beta: beta^-1 log sum_z |R|^-1 exp(beta (V0 + h.z + f(T_z w) - f(w))).
    For beta = inf: max_z (V0 + h.z + f(T_z w) - f(w)).
    """
    pot = f.potential if isinstance(f, GradientCocycle) else np.asarray(f, dtype=float)
    inc = pot[q.shift_table] - pot[:, None]
    hz = q.steps.array @ np.asarray(h, dtype=float)
    inner = q.base_weights[:, None] + hz[None, :] + inc
    if np.isinf(beta):
        return inner.max(axis=1)
    return (logsumexp(beta * inner, axis=1) - np.log(len(q.steps))) / beta


def evaluate_cocycle_formula(q: QuotientSpace, h, beta: float, f) -> float:
    """max over states of :func:`cocycle_bracket`; always >= g_pl, with equality at a corrector."""
    return float(cocycle_bracket(q, h, beta, f).max())


@dataclass
class EntropyReport:
    mu0: np.ndarray
    q0: np.ndarray
    step_kernel: np.ndarray
    entropy: float
    energy: float
    identity_gap: float
    stationarity_gap: float


def invariant_measure_and_entropy(sol: PFSolution) -> EntropyReport:
    """Invariant measure, tilted kernel and the energy-entropy identity.

    The kernel over (state, step) is
    q(w, z) = |R|^-1 exp(beta (V0(w) + h.z + F(w,0,z) - g_pl)) with F the
    corrector; ``q0`` collapses it onto target states. ``entropy`` is the
    relative entropy of q against the uniform step kernel, averaged over mu0,
    and ``identity_gap`` is |E[V0 + h.Z1] - entropy/beta - g_pl|.
    """
    T = sol.matrix
    q = T.quotient
    beta = T.beta
    F = corrector_from_rev(sol).increments()
    hz = q.steps.array @ T.h
    nR = len(q.steps)
    log_k = beta * (q.base_weights[:, None] + hz[None, :] + F - sol.g_pl) - np.log(nR)
    K = np.exp(log_k)
    K /= K.sum(axis=1, keepdims=True)
    mu0 = sol.mu0
    q0 = np.zeros((q.m, q.m))
    for w in range(q.m):
        for k, t in enumerate(q.shift_table[w]):
            q0[w, t] += K[w, k]
    stat_gap = float(np.max(np.abs(mu0 @ q0 - mu0)))
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(K > 0, K * np.log(K * nR), 0.0)
    H = float(mu0 @ terms.sum(axis=1))
    energy = float(mu0 @ (K * (q.base_weights[:, None] + hz[None, :])).sum(axis=1))
    gap = abs(energy - H / beta - sol.g_pl)
    return EntropyReport(mu0, q0, K, H, energy, gap, stat_gap)


@dataclass
class PFBusemann:
    limit: np.ndarray
    trace: np.ndarray = field(repr=False)
    error: float = 0.0

    def recovery_residual(self, q: QuotientSpace, h, beta: float) -> float:
        """max_w |V0(w) + beta^-1 log sum_z |R|^-1 exp(-beta (B(w,0,z) - h.z))|."""
        hz = q.steps.array @ np.asarray(h, dtype=float)
        Bt = self.limit - hz[None, :]
        rec = -(logsumexp(-beta * Bt, axis=1) - np.log(len(q.steps))) / beta
        return float(np.max(np.abs(rec - q.base_weights)))


def busemann_pf(q: QuotientSpace, h, beta: float, n_max: int = 400,
                sol: PFSolution | None = None) -> PFBusemann:
    """Point-to-level Busemann function of a periodic polymer.

    The finite-n gradients beta^-1 [log (A^n 1)(w) - log (A^(n-1) 1)(T_z w)]
    are computed in the log domain and compared to the limit
    beta^-1 (log rho + log rev(w) - log rev(T_z w)). ``error`` is the
    distance between the last trace entry and that limit.
    """
    succ = q.successor_sets()
    per = period_of_pattern(succ)
    if per != 1:
        raise NotPrimitive(f"positivity pattern has period {per}", period=per)
    T = build_transfer_matrix(q, h, beta, log_domain=True)
    if sol is None:
        sol = solve_pf(T)
    L = T.log_entries
    u = np.zeros(q.m)
    S = q.shift_table
    trace = np.empty((n_max, q.m, S.shape[1]))
    for n in range(1, n_max + 1):
        # centered by log rho to keep the iterates bounded
        u_new = logsumexp(L + u[None, :], axis=1) - sol.log_rho
        trace[n - 1] = (u_new[:, None] - u[S] + sol.log_rho) / beta
        u = u_new
    lr = sol.log_rev
    limit = (sol.log_rho + lr[:, None] - lr[S]) / beta
    err = float(np.max(np.abs(trace[-1] - limit)))
    return PFBusemann(limit, trace, err)


def collatz_wielandt(T: TransferMatrix, phi) -> tuple[float, float]:
    """(min, max) over states of (A phi)/phi, in units of the true entries.

    For positive phi the Perron root lies between the two.
    """
    lphi = np.log(np.asarray(phi, dtype=float))
    ratio = logsumexp(T.log_entries + lphi[None, :], axis=1) - lphi
    return float(np.exp(ratio.min())), float(np.exp(ratio.max()))


def solve_pf_grid(q: QuotientSpace, hs, betas, threads: int = 1) -> list[PFSolution]:
    """Solve on every (h, beta) pair of the product grid, in input order."""
    jobs = [(np.asarray(h, dtype=float), float(b)) for h in hs for b in betas]

    def run(job):
        h, b = job
        return solve_pf(build_transfer_matrix(q, h, b, log_domain=True))

    if threads <= 1:
        return [run(j) for j in jobs]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(run, jobs))

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import logsumexp

from polyvar.errors import CapExceeded, InvalidVelocity
from polyvar.maxplus import build_maxplus_matrix, eigenvector_and_critical_graph
from polyvar.mc import (DistributionSpec, Estimate, backward_point_table, draw_weights,
                        dp_point_to_level, dp_point_to_point, estimate_busemann_pl,
                        estimate_busemann_pp, estimate_gpp, level_table, lift_periodic, mc_row,
                        point_to_point_table, replica_generator, resolve_threads, sample_field,
                        staircase_pairs, sublinearity_check)
from polyvar.oracles import annealed_formulas
from polyvar.steps import StepSet, enumerate_paths

E2 = StepSet.unit(2)
LOG2 = math.log(2)
ONES = DistributionSpec("bernoulli", p=1.0)


def path_sums(V, x, n, endpoint=None):
    """Sums of V over the first n sites of every n-step path from x, with endpoints."""
    out = []
    for seq in enumerate_paths(E2, n, None if endpoint is None else np.subtract(endpoint, x)):
        pos = np.array(x)
        tot = 0.0
        for z in seq:
            tot += V[tuple(pos)]
            pos = pos + z
        out.append((tot, pos))
    return out


def brute_p2p(V, beta, x, y):
    n = int(np.sum(np.subtract(y, x)))
    sums = np.array([t for t, _ in path_sums(V, x, n, y)])
    if np.isinf(beta):
        return sums.max()
    return (logsumexp(beta * sums) - n * LOG2) / beta


def brute_p2l(V, beta, h, n):
    rows = path_sums(V, (0, 0), n)
    vals = np.array([t + np.dot(h, end) for t, end in rows])
    if np.isinf(beta):
        return vals.max()
    return (logsumexp(beta * vals) - n * LOG2) / beta


# --- samplers ---

def test_bernoulli_one_field():
    assert np.all(sample_field(ONES, 7, seed=3).values == 1.0)


def test_exponential_mean():
    w = draw_weights(DistributionSpec.exponential(), replica_generator(1, 0), 10**6)
    assert abs(w.mean() - 1) <= 0.01
    assert w.min() >= 0


@pytest.mark.parametrize("shape", [2.0, 0.5, 5.3])
def test_gamma_mean_and_variance(shape):
    w = draw_weights(DistributionSpec("gamma", shape=shape), replica_generator(2, 0), 10**6)
    # 3 sigma for the mean of 1e6 draws
    assert abs(w.mean() - shape) <= 3 * math.sqrt(shape / 1e6) + 1e-12
    assert w.var() == pytest.approx(shape, rel=0.02)


def test_gamma_two_mean_band():
    w = draw_weights(DistributionSpec("gamma", shape=2.0), replica_generator(5, 0), 10**6)
    assert abs(w.mean() - 2) <= 0.02


def test_truncated_normal_range_and_mean():
    from scipy import stats
    d = DistributionSpec("normal", low=-0.5, high=1.5)
    w = draw_weights(d, replica_generator(4, 0), 200000)
    assert w.min() >= -0.5 and w.max() <= 1.5
    assert w.mean() == pytest.approx(stats.truncnorm(-0.5, 1.5).mean(), abs=0.01)


def test_loggamma_transform():
    w = draw_weights(DistributionSpec.loggamma(1.0), replica_generator(6, 0), 200000)
    # E[-log w] = -Psi0(1) = Euler gamma for Exp(1)
    assert w.mean() == pytest.approx(LOG2 + np.euler_gamma, abs=0.01)


def test_bit_exact_reproducibility():
    for dist in (DistributionSpec.exponential(), DistributionSpec.loggamma(0.7), ONES):
        a = sample_field(dist, (30, 20), seed=11, replica=4).values
        b = sample_field(dist, (30, 20), seed=11, replica=4).values
        assert a.tobytes() == b.tobytes()
    a = sample_field(DistributionSpec.exponential(), 10, seed=11, replica=0).values
    b = sample_field(DistributionSpec.exponential(), 10, seed=11, replica=1).values
    assert not np.array_equal(a, b)


def test_field_is_immutable():
    fld = sample_field(DistributionSpec.exponential(), 3, seed=0)
    with pytest.raises(ValueError):
        fld.values[0, 0] = 1.0


def test_cap():
    with pytest.raises(CapExceeded):
        sample_field(ONES, 20001, seed=0)
    with pytest.raises(CapExceeded):
        sample_field(ONES, 50, seed=0, cap=10)


def test_distribution_validation():
    with pytest.raises(ValueError):
        DistributionSpec("cauchy")
    with pytest.raises(ValueError):
        DistributionSpec("normal", transform="neglog2")
    assert DistributionSpec.loggamma(2.0).label() == "gamma(2):neglog2"


# --- dynamic programs ---

def test_constant_field_values():
    V = np.ones((8, 8))
    assert dp_point_to_point(V, math.inf, (0, 0), (3, 4)) == 7
    assert dp_point_to_point(V, math.inf, (2, 2), (2, 2)) == 0
    assert dp_point_to_level(V, math.inf, (0, 0), 6) == 6
    assert dp_point_to_level(V, math.inf, (1, 0), 6) == 12
    # beta < inf: all 35 paths sum to 7, weighted by 2^-7 each
    assert dp_point_to_point(V, 2.0, (0, 0), (3, 4)) == pytest.approx(7 + math.log(35 / 2**7) / 2)


def test_four_by_four_against_twenty_paths():
    V = sample_field(DistributionSpec.exponential(), 3, seed=7).values
    assert len(enumerate_paths(E2, 6, (3, 3))) == 20
    assert dp_point_to_point(V, 1.0, (0, 0), (3, 3)) == pytest.approx(brute_p2p(V, 1.0, (0, 0), (3, 3)),
                                                                       abs=1e-10)


@given(st.integers(0, 10**6), st.sampled_from([math.inf, 0.3, 1.0, 4.0]),
       st.integers(0, 5), st.integers(0, 5), st.integers(0, 2), st.integers(0, 2))
def test_p2p_matches_brute_force(seed, beta, a, b, x0, x1):
    V = sample_field(DistributionSpec("normal"), 8, seed=seed).values
    x, y = (x0, x1), (x0 + a, x1 + b)
    assert dp_point_to_point(V, beta, x, y) == pytest.approx(brute_p2p(V, beta, x, y), abs=1e-10)


@given(st.integers(0, 10**6), st.sampled_from([math.inf, 0.5, 2.0]), st.integers(0, 8),
       st.floats(-2, 2), st.floats(-2, 2))
def test_p2l_matches_brute_force(seed, beta, n, h1, h2):
    V = sample_field(DistributionSpec.loggamma(1.0), 9, seed=seed).values
    assert dp_point_to_level(V, beta, (h1, h2), n) == pytest.approx(brute_p2l(V, beta, (h1, h2), n),
                                                                    abs=1e-10)


def test_tables_agree_with_single_queries():
    fld = sample_field(DistributionSpec.exponential(), 6, seed=2)
    for beta in (math.inf, 1.5):
        T = point_to_point_table(fld, beta)
        B = backward_point_table(fld, beta, (5, 4))
        for x in [(0, 0), (2, 3), (5, 0), (1, 4)]:
            assert T[x] == pytest.approx(dp_point_to_point(fld, beta, (0, 0), x), abs=1e-12)
            if x[0] <= 5 and x[1] <= 4:
                assert B[x] == pytest.approx(dp_point_to_point(fld, beta, x, (5, 4)), abs=1e-12)
        L = level_table(fld, beta, (0.3, -0.1), 6)
        assert L[0, 0] == pytest.approx(dp_point_to_level(fld, beta, (0.3, -0.1), 6), abs=1e-12)


def test_dp_errors():
    V = np.zeros((4, 4))
    with pytest.raises(ValueError):
        dp_point_to_point(V, 1.0, (2, 2), (1, 3))
    with pytest.raises(ValueError):
        dp_point_to_point(V, 1.0, (0, 0), (4, 0))
    with pytest.raises(ValueError):
        dp_point_to_level(V, 1.0, (0, 0), 4)
    with pytest.raises(ValueError):
        dp_point_to_point(V, 0.0, (0, 0), (1, 1))


@given(st.integers(0, 10**6), st.floats(0.05, 50), st.floats(-1, 1), st.floats(-1, 1))
def test_sandwich(seed, beta, h1, h2):
    V = sample_field(DistributionSpec.exponential(), 30, seed=seed).values
    n = 25
    hot = dp_point_to_level(V, beta, (h1, h2), n)
    cold = dp_point_to_level(V, math.inf, (h1, h2), n)
    assert cold - n * LOG2 / beta - 1e-9 <= hot <= cold + 1e-9


@given(st.integers(0, 10**6), st.integers(0, 6), st.integers(0, 6), st.integers(0, 6), st.integers(0, 6))
def test_superadditivity(seed, a, b, c, d):
    V = sample_field(DistributionSpec("normal"), 12, seed=seed).values
    x, y = (a, b), (a + c, b + d)
    lhs = dp_point_to_point(V, math.inf, (0, 0), x) + dp_point_to_point(V, math.inf, x, y)
    assert lhs <= dp_point_to_point(V, math.inf, (0, 0), y) + 1e-12


@given(st.integers(0, 10**6), st.floats(-2, 2), st.floats(-2, 2))
def test_level_is_max_over_endpoints(seed, h1, h2):
    V = sample_field(DistributionSpec.exponential(), 20, seed=seed).values
    n = 17
    best = max(dp_point_to_point(V, math.inf, (0, 0), (i, n - i)) + h1 * i + h2 * (n - i)
               for i in range(n + 1))
    assert dp_point_to_level(V, math.inf, (h1, h2), n) == pytest.approx(best, abs=1e-12)


# --- estimators ---

def test_estimate_gpp_deterministic():
    est = estimate_gpp(ONES, math.inf, (0.3, 0.7), 50, 3, seed=0)
    assert est.mean == 1.0 and est.stderr == 0.0


def test_estimate_gpp_boundary_warns():
    with pytest.warns(UserWarning):
        estimate_gpp(ONES, math.inf, (1.0, 0.0), 10, 2, seed=0)


def test_estimate_threads_do_not_change_result():
    a = estimate_gpp(DistributionSpec.exponential(), math.inf, (0.5, 0.5), 60, 6, seed=9, threads=1)
    b = estimate_gpp(DistributionSpec.exponential(), math.inf, (0.5, 0.5), 60, 6, seed=9, threads=3)
    assert a.samples.tobytes() == b.samples.tobytes()


def test_resolve_threads_env(monkeypatch):
    monkeypatch.setenv("POLYVAR_THREADS", "5")
    assert resolve_threads() == 5
    assert resolve_threads(2) == 2
    monkeypatch.delenv("POLYVAR_THREADS")
    assert resolve_threads() == 1


def test_busemann_pp_deterministic():
    est = estimate_busemann_pp(ONES, math.inf, (0.5, 0.5), staircase_pairs(4), 20, 2, seed=0)
    for z in est.perturbations:
        assert est.pooled[z].mean == 1.0


def test_busemann_pp_additivity():
    pairs = [((0, 0), (1, 0)), ((1, 0), (1, 1)), ((0, 0), (1, 1))]
    est = estimate_busemann_pp(DistributionSpec.exponential(), math.inf, (0.5, 0.5), pairs, 40, 4,
                               seed=3)
    for z in est.perturbations:
        a, b, c = (est.per_pair[(p, z)].samples for p in pairs)
        assert np.allclose(a + b, c, atol=1e-12)


def test_busemann_pp_needs_interior():
    with pytest.raises(InvalidVelocity):
        estimate_busemann_pp(ONES, math.inf, (1.0, 0.0), [((0, 0), (1, 0))], 10, 1, seed=0)


def test_busemann_pl_deterministic():
    est = estimate_busemann_pl(ONES, math.inf, (0, 0), 30, 2, seed=0, starts=5)
    assert est.per_step[(1, 0)].mean == 1.0 and est.per_step[(0, 1)].mean == 1.0
    assert est.sandwich_violations == 0


def test_busemann_pl_sandwich_holds():
    for beta in (math.inf, 1.0, 3.0):
        est = estimate_busemann_pl(DistributionSpec.exponential(), beta, (-0.4, 0.1), 60, 3, seed=1,
                                   starts=10)
        assert est.sandwich_violations == 0


# --- sublinearity ---

def test_sublinearity_zero_and_linear():
    assert sublinearity_check(lambda s: np.zeros(len(s)), 50) == 0.0
    c = 0.7
    lin = lambda s: c * (s[:, 0] - s[:, 1])
    for n in (10, 100, 1000):
        assert sublinearity_check(lin, n) == pytest.approx(c)


def test_sublinearity_stripes_corrector(stripes_q):
    eig = eigenvector_and_critical_graph(build_maxplus_matrix(stripes_q, (0, 0)))
    sigma = np.asarray(eig.sigma, dtype=float)
    spread = sigma.max() - sigma.min()
    phi = lift_periodic(stripes_q, sigma)
    for n in (1, 7, 50, 400):
        assert sublinearity_check(phi, n) <= spread / n + 1e-15


def test_sublinearity_array_input():
    P = np.arange(36, dtype=float).reshape(6, 6)
    # P[i, 5 - i] - P[0, 0] = 5 i + 5, largest at i = 5
    assert sublinearity_check(P, 5) == pytest.approx(30 / 5)


# --- annealed bound and rows ---

@pytest.mark.parametrize("dist,beta,h", [
    (DistributionSpec.exponential(), 0.5, (0.0, 0.0)),
    (DistributionSpec.exponential(), 0.9, (0.3, -0.3)),
    (DistributionSpec("normal"), 2.0, (0.0, 0.5)),
    (DistributionSpec.loggamma(1.0), 0.6, (0.0, 0.0)),
])
def test_annealed_upper_bound(dist, beta, h):
    n, reps = 300, 8
    vals = [dp_point_to_level(sample_field(dist, n, seed=21, replica=r), beta, h, n) / n
            for r in range(reps)]
    est = Estimate.from_samples(vals)
    assert est.mean <= annealed_formulas(dist, beta, h)["g_weak"] + 3 * est.stderr


def test_mc_row():
    est = Estimate.from_samples([1.0, 3.0])
    row = mc_row("x", 1.0, "p", 10, 2, 0, est, oracle=1.5)
    assert row[6] == 2.0 and row[9] == 0.5
    assert math.isnan(mc_row("x", 1.0, "p", 10, 2, 0, est)[8])


# --- desk-scale shape checks (slow) ---

@pytest.mark.slow
def test_rost_symmetric_point():
    est = estimate_gpp(DistributionSpec.exponential(), math.inf, (0.5, 0.5), 2000, 20, seed=1)
    # 2% tolerance; finite-n bias is about -0.01 here
    assert abs(est.mean - 2) <= 0.04


@pytest.mark.slow
def test_loggamma_symmetric_point():
    est = estimate_gpp(DistributionSpec.loggamma(1.0), 1.0, (0.5, 0.5), 1000, 20, seed=1)
    assert abs(est.mean / (np.euler_gamma + 2 * LOG2) - 1) <= 0.03

"""Positive temperature on a periodic field, and its approach to the max-plus limit."""
import math

import numpy as np

from polyvar.errors import NotPrimitive
from polyvar.maxplus import lambda_of_tilt
from polyvar.periodic import build_quotient, random_periodic_environment
from polyvar.pf import (build_transfer_matrix, busemann_pf, corrector_from_rev, cocycle_bracket,
                        invariant_measure_and_entropy, solve_pf)

rng = np.random.default_rng(11)
env, steps = random_periodic_environment(rng, max_cells=6)
q = build_quotient(env, steps)
h = np.array([0.2, -0.1])
print("states:", q.m, "steps:", steps.steps)

lam = lambda_of_tilt(q, h)
print(f"zero temperature lambda = {lam:.6f}")
print(" beta     g_pl       lower bound   entropy   identity gap")
for beta in 2.0 ** np.arange(-1, 9):
    sol = solve_pf(build_transfer_matrix(q, h, beta))
    ent = invariant_measure_and_entropy(sol)
    lo = lam - math.log(len(steps)) / beta
    print(f"{beta:6g}  {sol.g_pl:.6f}  {lo:.6f}     {ent.entropy:.4f}   {ent.identity_gap:.1e}")

beta = 2.0
sol = solve_pf(build_transfer_matrix(q, h, beta))
f = corrector_from_rev(sol)
print("\ncorrector bracket at every state:", cocycle_bracket(q, h, beta, f))
try:
    bp = busemann_pf(q, h, beta, n_max=100, sol=sol)
    print("Busemann limits B(w, z):\n", bp.limit)
    print("recovery residual:", bp.recovery_residual(q, h, beta))
except NotPrimitive as exc:
    print("no Busemann limit:", exc)

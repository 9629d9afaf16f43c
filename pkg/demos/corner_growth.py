"""Exponential corner growth: Monte-Carlo shape and Busemann means against the Rost formulas."""
import math

from polyvar.mc import DistributionSpec, estimate_busemann_pp, estimate_gpp, staircase_pairs
from polyvar.oracles import exp_alpha, rost_gpp

dist = DistributionSpec.exponential()
n, reps = 1000, 10
print(" s     estimate  stderr   1+2sqrt(s(1-s))")
for s in (0.1, 0.25, 0.5, 0.75, 0.9):
    est = estimate_gpp(dist, math.inf, (s, 1 - s), n, reps, seed=1)
    print(f"{s:4.2f}  {est.mean:.4f}    {est.stderr:.4f}   {rost_gpp(s):.4f}")

bus = estimate_busemann_pp(dist, math.inf, (0.5, 0.5), staircase_pairs(100), n, reps, seed=2)
print("\nmean B(x, x+e1) by target perturbation, expected", 1 / exp_alpha(0.5))
for z, e in bus.pooled.items():
    print(f"  z={z}: {e.mean:.4f} +- {e.stderr:.4f}")

"""Zero temperature on the stripes field: eigenvalue, corrector, Busemann traces."""
import numpy as np

from polyvar.maxplus import (build_maxplus_matrix, busemann_maxplus, eigenvector_and_critical_graph,
                             enumerate_circuits, gpp_periodic, karp_eigenvalue,
                             minmax_via_difference_constraints)
from polyvar.periodic import build_quotient, stripes

q = build_quotient(*stripes())
print("states:", q.m, "potential:", q.base_weights)

for h in [(0.0, 0.0), (1.0, 0.0)]:
    A = build_maxplus_matrix(q, h)
    lam = karp_eigenvalue(A)
    eig = eigenvector_and_critical_graph(A, lam)
    t, f = minmax_via_difference_constraints(A)
    print(f"\nh = {h}")
    print("  lambda (Karp)      :", lam)
    print("  lambda (min-max)   :", t)
    print("  sigma              :", eig.sigma)
    print("  cyclicity          :", eig.cyclicity, "primitive:", eig.primitive)
    for (w, k), rep in sorted(busemann_maxplus(A, eig=eig).items()):
        z = q.steps.steps[k]
        if rep.converged:
            print(f"  B(w={w}, z={z}) -> {rep.limit:g}")
        else:
            print(f"  B(w={w}, z={z}) oscillates with period {rep.period}: {rep.values}")

# point-to-point shape from circuit means
circ = enumerate_circuits(build_maxplus_matrix(q, (0, 0)))
for s in np.linspace(0, 1, 5):
    print(f"g_pp({s:.2f}, {1 - s:.2f}) = {gpp_periodic(circ, (s, 1 - s)):.4f}")

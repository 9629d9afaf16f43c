"""Variational free energies of directed polymers and last-passage percolation.

Submodules: ``steps`` (step sets, velocities, brute-force paths), ``periodic``
(finite quotients of periodic fields), ``maxplus`` and ``pf`` (zero and
positive temperature periodic solvers), ``mc`` (i.i.d. fields and dynamic
programs), ``oracles``, ``special`` and ``legendre`` (solvable models and
dualities), ``cli``.
"""
from .errors import (CapExceeded, ConvergenceError, DegeneracyWarning, InvalidVelocity,
                     NotIrreducible, NotPrimitive, OverflowGuardError, PolyvarError,
                     UnsupportedDistribution)
from .maxplus import (build_maxplus_matrix, busemann_maxplus, eigenvector_and_critical_graph,
                      enumerate_circuits, gpp_periodic, karp_eigenvalue,
                      minmax_via_difference_constraints)
from .periodic import (GradientCocycle, PeriodicEnvironment, QuotientSpace, build_quotient,
                       load_environment, stripes)
from .pf import (build_transfer_matrix, busemann_pf, corrector_from_rev, evaluate_cocycle_formula,
                 invariant_measure_and_entropy, solve_pf)
from .steps import StepSet, Velocity, enumerate_paths, in_relative_interior, xhat

__version__ = "0.1.0"

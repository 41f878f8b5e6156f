"""
Moment matrices, exact and sampled
==================================

The three ell x ell matrices are pairwise overlaps of the states U_j|i>
under the identity, the infeasible projector and the objective. The
sampled estimator only uses computational-basis shots, from the states
themselves on the diagonal and from one-ancilla pair circuits off it.
"""

import numpy as np

from genqcp import ccop, moments, simulator

inst = ccop.max_independent_set(3, [(0, 1), (1, 2)])
view = simulator.subspace_view(inst)
iota = view.uniform_state()
family = simulator.build_search_family(view, ["mixer", "phase", "identity"], seed=7)

exact = moments.exact_moments(iota, family, view)
np.set_printoptions(precision=3, suppress=True)
print("F =\n", exact.F)
print("min eigenvalues:", exact.min_eigenvalues())

# the pair circuit encodes Re <U_j i|U_k i> in its ancilla-0 probability
u, v = family[0], family[1]
p0 = moments.lambda_re_state(iota, u, v).ancilla_probabilities()[0]
print("p(0) =", p0, " 1/2 (1 + Re F_01) =", 0.5 * (1 + exact.F[0, 1].real))

# sampling error shrinks like 1/sqrt(m)
for m in (10**2, 10**3, 10**4, 10**5):
    est = moments.sampled_moments(iota, family, view, m, seed=1)
    err = max(np.abs(a - b).max() for a, b in zip(est.as_tuple(), exact.as_tuple()))
    print(f"m = {m:>6}: max entry error {err:.4f}   sqrt(m) * err = {np.sqrt(m) * err:.2f}")

# sampled matrices can be slightly indefinite; repair before solving
est = moments.sampled_moments(iota, family, view, 1000, seed=2)
fixed = moments.psd_repair(est, ridge=moments.default_ridge(1000))
print("before repair:", est.min_eigenvalues())
print("after repair: ", fixed.min_eigenvalues())

"""
Mixed inputs and rank-one optimality
====================================

A feasible ensemble gives moment matrices that are weighted sums of the
pure ones. The coefficient vector from the eigenproblem is compared against
random feasible PSD matrices of higher rank: none does better.
"""

import numpy as np

from genqcp import ccop, gep, sdp, simulator
from genqcp.moments import MixedState, mixed_exact_moments

inst = ccop.rescale_for_prop1(ccop.knapsack([4, 2, 3, 5, 1, 3], [3, 1, 2, 4, 1, 2], capacity=6))
view = simulator.subspace_view(inst)
rng = np.random.default_rng(4)


def random_feasible_state():
    v = np.zeros(2**view.n, dtype=complex)
    v[view.labels] = rng.standard_normal(view.size) + 1j * rng.standard_normal(view.size)
    return simulator.StateVector(v / np.linalg.norm(v))


rho = MixedState.from_lists([0.5, 0.3, 0.2], [random_feasible_state() for _ in range(3)])
family = simulator.build_search_family(view, ["mixer", "phase", "grover", "identity"], seed=9)

sol = sdp.mixed_pipeline(rho, family, view)
print("tr[rho C] =", rho.expectation_diagonal(view.cost), " lambda0 =", sol.lambda0)

M = mixed_exact_moments(rho, family, view)
report = sdp.dominance_check(M, sol.lambda0, trials=1000, seed=0)
print("dominance:", report.to_dict())

check = sdp.prop1_precondition(M)
print("0 <= H <= F:", check.holds, f"(min eig H {check.min_eig_H:.3g}, F - H {check.min_eig_gap:.3g})")

# the same family on the unscaled instance breaks H <= F
raw = ccop.knapsack([4, 2, 3, 5, 1, 3], [3, 1, 2, 4, 1, 2], capacity=6)
M_raw = mixed_exact_moments(rho, family, simulator.subspace_view(raw))
print("unscaled instance:", sdp.prop1_precondition(M_raw).holds)
print("rank-one optimum from the pencil:", gep.solve_gep(M).lambda0)

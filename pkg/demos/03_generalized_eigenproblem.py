"""
Solving for the coefficients
============================

Minimizing a^+ H a under a^+ F a = 1 and a^+ G a = 0 reduces to the
smallest eigenpair of a real pencil restricted to the kernel of G. The
Lagrangian dual, computed by bisection, gives the same value.
"""

import numpy as np

from genqcp import ccop, gep, moments, simulator

inst = ccop.knapsack([4, 2, 3, 5, 1, 3], [3, 1, 2, 4, 1, 2], capacity=6)
view = simulator.subspace_view(inst)
iota = simulator.prepare_initial(view, "basis", 0)
family = simulator.build_search_family(view, ["mixer", "phase", "grover", "local", "identity"], seed=3)
M = moments.exact_moments(iota, family, view)

E = gep.realify(M)
K = gep.kernel_projection(E)
print(f"2l = {2 * M.ell}, kernel of G: {K.kernel_dim}, after dropping null F: {K.dim}")

lam, vecs = gep.solve_pencil(K)
print("pencil minimum:", lam)
print("dual bisection:", gep.dual_bisection(K))

sol = gep.solve_gep(M)
print("alpha0 =", np.round(sol.alpha0, 4))
print("||alpha0||_1 =", sol.l1_norm)
print("residuals:", {k: sol.diagnostics[k] for k in ("norm_residual", "feasibility_residual",
                                                     "energy_residual")})
print("input energy", simulator.energy(iota, view), "-> lambda0", sol.lambda0)

# a purely infeasible direction gets no weight
bad = {"kind": "local", "gates": [["x", 0], ["x", 1], ["x", 2], ["x", 3]]}
fam2 = simulator.build_search_family(view, [bad, "mixer", "identity"], seed=3)
sol2 = gep.solve_gep(moments.exact_moments(iota, fam2, view))
print("weight on the infeasible direction:", abs(sol2.alpha0[0]))

"""
Applying the update with an ancilla
===================================

M_a = sum_j a_j U_j is not unitary. It is applied probabilistically: prepare
sqrt(a)/sqrt(||a||_1) on ceil(log2 l) ancilla qubits, apply U_j controlled on
label j, and post-select the ancilla along the conjugate direction.
"""

import numpy as np

from genqcp import ccop, gep, lcu, moments, simulator

inst = ccop.max_independent_set(3, [(0, 1), (1, 2)])
view = simulator.subspace_view(inst)
iota = view.uniform_state()
family = simulator.build_search_family(view, ["mixer", "phase", "grover", "identity"], seed=5)
sol = gep.solve_gep(moments.exact_moments(iota, family, view))

prep = lcu.ancilla_prep(sol.alpha0)
print("ancilla qubits:", prep.n_qubits, "amplitudes:", np.round(prep.amplitudes, 3))

joint = lcu.compound_apply(iota, prep, family)
p = lcu.analytic_success_probability(iota, family, sol.alpha0)
print(f"success probability {p:.4f} = 1/||a||_1^2 = {sol.l1_norm ** -2:.4f}")

rng = np.random.default_rng(0)
hits = sum(lcu.postselect(joint, sol.alpha0, rng).success for _ in range(10_000))
print("empirical success rate:", hits / 10_000)

out = lcu.lcu_update(iota, family, sol.alpha0, seed=1)
exact = lcu.apply_lcu_exact(iota, family, sol.alpha0)
print("attempts:", out.attempts, "fidelity with exact path:",
      abs(np.vdot(out.post_state.amplitudes, exact.amplitudes)))
print("post-state energy:", simulator.energy(out.post_state, view), "lambda0:", sol.lambda0)
print("infeasible weight:", simulator.infeasible_weight(out.post_state, view))

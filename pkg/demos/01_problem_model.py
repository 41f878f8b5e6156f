"""
Problem instances and the classical baseline
============================================

Builds the built-in instances, shows the LSB-first bit order and the
positivity shift, and compares hard and soft constraints.
"""

from genqcp import ccop

# qubit 0 is the least-significant bit of the integer label
print("bits of label 5:", ccop.label_to_bits(5, 3).tolist())

# maximum independent set on the path 0-1-2; objective = offset - |set|
mis = ccop.max_independent_set(3, [(0, 1), (1, 2)])
res = ccop.brute_force_optimum(mis)
print(f"MIS offset {mis.c_offset}, c_upper {mis.c_upper}")
print("optimizers:", res.optimizers, "optimum:", res.optimum, "raw:", mis.unscale(res.optimum))
print("feasible strings:", res.feasible_count, "of", 2**mis.n)

# 6-item knapsack; the empty selection sits exactly at the offset
kp = ccop.knapsack([4, 2, 3, 5, 1, 3], [3, 1, 2, 4, 1, 2], capacity=6)
print("empty knapsack objective:", ccop.evaluate_objective(kp, [0] * 6))
best = ccop.brute_force_optimum(kp)
print("knapsack optimum:", best.optimum, "profit:", -kp.unscale(best.optimum), best.optimizers)

# a penalty larger than the objective spread keeps the argmin feasible
soft = ccop.soft_constrained(kp, penalty=kp.c_upper)
print("soft argmin:", ccop.brute_force_optimum(soft).optimizers)

# rescaling puts every objective value in (0, 1]
r = ccop.rescale_for_prop1(kp)
print("rescaled range:", r.objective_table.min(), r.objective_table.max())

# three-city TSP: 9 qubits, the 6 permutation matrices are feasible
tour = ccop.tsp([[0, 1, 2], [1, 0, 3], [2, 3, 0]])
print("TSP tours:", ccop.brute_force_optimum(tour).feasible_count)

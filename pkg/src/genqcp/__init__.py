"""Hard-constrained quantum conic programming on a dense statevector simulator."""

__version__ = "0.1.0"

from .ccop import (
    BruteForceResult,
    CcopInstance,
    InstanceError,
    brute_force_optimum,
    custom_table,
    evaluate_objective,
    is_feasible,
    knapsack,
    load_instance,
    max_independent_set,
    rescale_for_prop1,
    soft_constrained,
    tsp,
)
from .gep import GepSolution, NoFeasibleDirection, dual_bisection, solve_gep
from .lcu import apply_lcu_exact, lcu_update, postselect
from .moments import MixedState, MomentMatrices, exact_moments, psd_repair, sampled_moments
from .sdp import dominance_check, mixed_pipeline, prop1_precondition
from .simulator import (
    StateVector,
    build_search_family,
    energy,
    infeasible_weight,
    prepare_initial,
    subspace_view,
)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genqcp.ccop import rescale_for_prop1
from genqcp.gep import GepError, solve_gep
from genqcp.lcu import apply_lcu_exact, lcu_image
from genqcp.moments import MixedState, MomentMatrices, exact_moments
from genqcp.sdp import (
    dominance_check,
    mixed_pipeline,
    prop1_precondition,
    random_feasible_psd,
    realified_outer,
)
from genqcp.simulator import StateError, StateVector, build_search_family, energy, prepare_initial, subspace_view

from conftest import random_family, random_feasible_unit, random_instance, random_setup


def block(M):
    return np.block([[M.real, -M.imag], [M.imag, M.real]])


def random_ensemble(view, k, rng):
    w = rng.dirichlet(np.ones(k))
    w[-1] = 1.0 - w[:-1].sum()
    return MixedState.from_lists(w, [random_feasible_unit(view, rng) for _ in range(k)])


def test_single_component_matches_pure_pipeline(mis3_view):
    rng = np.random.default_rng(0)
    psi = random_feasible_unit(mis3_view, rng)
    fam = build_search_family(mis3_view, ["mixer", "phase", "grover", "identity"], seed=0)
    a = mixed_pipeline(MixedState.from_lists([1.0], [psi]), fam, mis3_view)
    b = solve_gep(exact_moments(psi, fam, mis3_view))
    assert a.lambda0 == b.lambda0
    assert np.array_equal(a.alpha0, b.alpha0)


def test_identity_family_gives_weighted_mean(mis3):
    view = subspace_view(mis3)
    fam = build_search_family(view, ["identity"], seed=0)
    rho = MixedState.from_lists([0.25, 0.75], [prepare_initial(mis3, "basis", [0, 0, 0]),
                                                prepare_initial(mis3, "basis", [1, 0, 1])])
    assert mixed_pipeline(rho, fam, view).lambda0 == pytest.approx(0.25 * 4 + 0.75 * 2)


def test_infeasible_ensemble_rejected(mis3_view):
    fam = build_search_family(mis3_view, ["identity"], seed=0)
    bad = StateVector(np.eye(8, dtype=complex)[3])
    with pytest.raises(StateError):
        mixed_pipeline(MixedState.from_lists([1.0], [bad]), fam, mis3_view)


def test_random_feasible_psd_examples(mis3_view):
    rng = np.random.default_rng(1)
    psi = random_feasible_unit(mis3_view, rng)
    fam = build_search_family(mis3_view, ["mixer", "local", "identity"], seed=1)
    M = exact_moments(psi, fam, mis3_view)
    Fr, Gr = block(M.F), block(M.G)
    for rank in (1, 2, 3):
        X = random_feasible_psd(M, rank, seed=rank)
        assert abs(np.trace(Fr @ X) - 1) <= 1e-12
        assert abs(np.trace(Gr @ X)) <= 1e-12
        assert np.linalg.eigvalsh(X)[0] >= -1e-12
        assert np.linalg.matrix_rank(X, tol=1e-10) <= rank
    with pytest.raises(ValueError):
        random_feasible_psd(M, 0)
    with pytest.raises(GepError):
        random_feasible_psd(MomentMatrices(np.eye(1, dtype=complex), np.eye(1, dtype=complex),
                                           np.eye(1, dtype=complex), "exact"), 1)


def test_optimizer_has_zero_gap(knapsack6):
    view = subspace_view(knapsack6)
    psi = random_feasible_unit(view, np.random.default_rng(2))
    fam = build_search_family(view, ["mixer", "phase", "grover", "identity"], seed=2)
    M = exact_moments(psi, fam, view)
    sol = solve_gep(M)
    X = realified_outer(sol.alpha0)
    assert abs(np.trace(block(M.H) @ X) - sol.lambda0) <= 1e-8
    assert abs(np.trace(block(M.F) @ X) - 1) <= 1e-8


def test_proportional_pencil_is_flat():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    F = A.conj().T @ A + np.eye(3)
    M = MomentMatrices(F, np.zeros((3, 3), complex), 0.7 * F, "exact")
    rep = dominance_check(M, 0.7, trials=50, seed=0)
    assert rep.violations == 0 and abs(rep.min_gap) <= 1e-12


def test_dominance_on_random_instances():
    rng = np.random.default_rng(4)
    for _ in range(10):
        inst, view, fam, iota = random_setup(rng)
        M = exact_moments(iota, fam, view)
        sol = solve_gep(M)
        rep = dominance_check(M, sol.lambda0, trials=200, seed=1)
        assert rep.violations == 0
        assert rep.min_gap >= -1e-8


def test_prop1_examples(knapsack6):
    r = rescale_for_prop1(knapsack6)
    view = subspace_view(r)
    fam = build_search_family(view, ["mixer", "phase", "local", "identity"], seed=5)
    chk = prop1_precondition(exact_moments(random_feasible_unit(view, np.random.default_rng(5)), fam, view))
    assert chk.holds and chk.witness is None
    F = np.eye(2, dtype=complex)
    H = np.diag([0.5, 1.5]).astype(complex)
    bad = prop1_precondition(MomentMatrices(F, np.zeros((2, 2), complex), H, "exact"))
    assert not bad.holds
    assert np.allclose(np.abs(bad.witness), [0, 1])
    same = prop1_precondition(MomentMatrices(F, np.zeros((2, 2), complex), F.copy(), "exact"))
    assert same.holds and same.min_eig_gap == pytest.approx(0.0, abs=1e-15)


def test_unscaled_instance_can_violate_prop1(knapsack6):
    view = subspace_view(knapsack6)
    fam = build_search_family(view, ["identity"], seed=0)
    chk = prop1_precondition(exact_moments(view.uniform_state(), fam, view))
    assert not chk.holds  # H_11 = <C> > 1 = F_11


def test_no_worsening_for_mixed_input(knapsack6):
    view = subspace_view(knapsack6)
    rng = np.random.default_rng(6)
    for seed in range(5):
        rho = random_ensemble(view, 3, rng)
        fam = build_search_family(view, ["mixer", "phase", "grover", "identity"], seed=seed)
        sol = mixed_pipeline(rho, fam, view)
        assert sol.lambda0 <= rho.expectation_diagonal(view.cost) + 1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_purity_robustness(seed):
    """Post-selection reweights component i by q_i = p_i ||M|i>||^2; the reweighted
    ensemble of normalized outputs realizes the mixed optimum."""
    rng = np.random.default_rng(seed)
    view = subspace_view(random_instance(int(rng.integers(2, 5)), rng))
    fam = random_family(view, int(rng.integers(1, 5)), rng)
    rho = random_ensemble(view, int(rng.integers(1, 4)), rng)
    sol = mixed_pipeline(rho, fam, view)
    q, e = [], []
    for p, comp in rho.components:
        v = lcu_image(comp, fam, sol.alpha0)
        q.append(p * np.vdot(v, v).real)
        e.append(energy(apply_lcu_exact(comp, fam, sol.alpha0), view) if q[-1] > 1e-20 else 0.0)
    assert abs(sum(q) - 1) <= 1e-8
    assert abs(np.dot(q, e) - sol.lambda0) <= 1e-8

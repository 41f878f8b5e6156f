import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import eigh as scipy_eigh

from genqcp.gep import (
    GepError,
    KernelRestriction,
    NoFeasibleDirection,
    dual_bisection,
    embed,
    kernel_projection,
    normalize_and_backmap,
    realify,
    sampled_kernel_tol,
    solve_gep,
    solve_pencil,
    to_complex,
    to_real,
)
from genqcp.moments import MomentMatrices, exact_moments
from genqcp.simulator import build_search_family, energy, prepare_initial, subspace_view

from conftest import random_feasible_alphas, random_feasible_unit, random_setup


def restriction(F, H):
    m = F.shape[0]
    return KernelRestriction(np.eye(m), m, F, H, 1e-9, np.zeros(m))


def random_spd(m, rng, shift=0.1):
    A = rng.standard_normal((m, m))
    return A @ A.T + shift * np.eye(m)


def moments(F, G, H):
    return MomentMatrices(np.asarray(F, complex), np.asarray(G, complex), np.asarray(H, complex), "exact")


def test_realify_real_matrix_is_block_diagonal():
    H = np.array([[2.0, 0.5], [0.5, 1.0]])
    E = realify(moments(np.eye(2), np.zeros((2, 2)), H))
    assert np.array_equal(E.Hr, np.block([[H, np.zeros((2, 2))], [np.zeros((2, 2)), H]]))


def test_realify_rejects_non_hermitian():
    with pytest.raises(GepError):
        realify(moments([[1.0]], [[0.0]], [[1j]]))


def test_realify_quadratic_form_agreement():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    H = A.conj().T @ A
    Hr = realify(moments(np.eye(4), np.zeros((4, 4)), H)).Hr
    assert np.max(np.abs(Hr - Hr.T)) <= 1e-12
    for _ in range(100):
        a = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        x = to_real(a)
        assert abs(x @ Hr @ x - np.vdot(a, H @ a).real) <= 1e-12
        assert np.array_equal(to_complex(x), a)


def test_block_eigenvalues_come_in_pairs():
    rng = np.random.default_rng(1)
    for _ in range(10):
        A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        w = np.linalg.eigvalsh(embed(A.conj().T @ A))
        assert np.allclose(w[0::2], w[1::2], atol=1e-10)


def test_null_g_fast_path(knapsack6):
    view = subspace_view(knapsack6)
    fam = build_search_family(view, ["phase", "grover", "identity"], seed=0)
    # the uniform state is a Grover eigenvector; a generic feasible state keeps F definite
    iota = random_feasible_unit(view, np.random.default_rng(0))
    M = exact_moments(iota, fam, view)
    E = realify(M)
    K = kernel_projection(E)
    assert K.kernel_dim == 2 * fam.ell == K.dim
    assert np.array_equal(K.basis, np.eye(2 * fam.ell))
    assert np.array_equal(K.F_t, E.Fr) and np.array_equal(K.H_t, E.Hr)


def test_infeasible_direction_is_excluded(mis3):
    iota = prepare_initial(mis3, mode="basis", b=[0, 0, 0])
    bad = {"kind": "local", "gates": [["x", 0], ["x", 1]]}  # |000> -> |011>, infeasible
    mixer = {"kind": "mixer", "angle": 0.7}
    with_bad = build_search_family(mis3, [bad, mixer, "identity"], seed=0)
    without = build_search_family(mis3, [mixer, "identity"], seed=0)
    a = solve_gep(exact_moments(iota, with_bad, mis3))
    b = solve_gep(exact_moments(iota, without, mis3))
    assert a.lambda0 == pytest.approx(b.lambda0, abs=1e-9)
    assert abs(a.alpha0[0]) <= 1e-9


def test_kernel_dim_stable_across_tolerances():
    rng = np.random.default_rng(2)
    for _ in range(20):
        inst, view, fam, iota = random_setup(rng, n_max=5)
        E = realify(exact_moments(iota, fam, view))
        dims = {kernel_projection(E, tol).kernel_dim for tol in (1e-10, 1e-9, 1e-8, 1e-7)}
        assert len(dims) == 1


def test_no_feasible_direction():
    M = moments([[1.0]], [[1.0]], [[2.0]])
    with pytest.raises(NoFeasibleDirection):
        kernel_projection(realify(M))


def test_kernel_tolerance_rule():
    assert sampled_kernel_tol(4, 10**4) == pytest.approx(0.1)
    assert sampled_kernel_tol(1, 10**20) == 1e-9


def test_solve_pencil_trivial_cases():
    rng = np.random.default_rng(3)
    H = random_spd(4, rng)
    lam, _ = solve_pencil(restriction(np.eye(4), H))
    assert lam == pytest.approx(np.linalg.eigvalsh(H)[0], abs=1e-12)
    F = random_spd(4, rng)
    lam, X = solve_pencil(restriction(F, 2.5 * F))
    assert lam == pytest.approx(2.5, abs=1e-12)
    assert X.shape == (4, 4)
    assert np.allclose(X.T @ F @ X, np.eye(4), atol=1e-10)


def test_solve_pencil_rejects_singular_f():
    with pytest.raises(GepError):
        solve_pencil(restriction(np.diag([1.0, 0.0]), np.eye(2)))


def test_dual_bisection_trivial_cases():
    F = random_spd(3, np.random.default_rng(4))
    assert dual_bisection(restriction(F, F)) == pytest.approx(1.0, abs=1e-10)
    assert dual_bisection(restriction(np.eye(2), np.diag([1.0, 2.0]))) == pytest.approx(1.0, abs=1e-10)


def test_pencil_against_scipy_and_dual():
    rng = np.random.default_rng(5)
    for _ in range(100):
        m = int(rng.integers(1, 9))
        F, H = random_spd(m, rng), random_spd(m, rng, shift=0.0)
        K = restriction(F, H)
        lam, X = solve_pencil(K)
        assert abs(lam - scipy_eigh(H, F, eigvals_only=True)[0]) <= 1e-8
        assert abs(lam - dual_bisection(K)) <= 1e-7
        for x in X.T:
            assert np.max(np.abs(H @ x - lam * F @ x)) <= 1e-8 * max(1, np.abs(H).max())


def test_identity_family_solution(mis3_view):
    iota = mis3_view.uniform_state()
    fam = build_search_family(mis3_view, ["identity"], seed=0)
    sol = solve_gep(exact_moments(iota, fam, mis3_view))
    assert np.allclose(sol.alpha0, [1.0], atol=1e-12)
    assert sol.lambda0 == pytest.approx(energy(iota, mis3_view), abs=1e-12)


def test_complex_pair_partners_differ_by_phase(mis3_view):
    iota = mis3_view.uniform_state()
    fam = build_search_family(mis3_view, ["identity"], seed=0)
    K = kernel_projection(realify(exact_moments(iota, fam, mis3_view)))
    lam, X = solve_pencil(K)
    assert X.shape[1] == 2
    a, b = to_complex(X[:, 0]), to_complex(X[:, 1])
    assert abs(abs(np.vdot(a, b)) - np.linalg.norm(a) * np.linalg.norm(b)) <= 1e-12
    s0 = normalize_and_backmap(X[:, :1], K, lam)
    s1 = normalize_and_backmap(X[:, 1:], K, lam)
    assert np.allclose(s0.alpha0, s1.alpha0, atol=1e-12)


def test_degenerate_pencil_with_repeated_unitary(mis3_view):
    iota = mis3_view.uniform_state()
    fam = build_search_family(mis3_view, [{"kind": "grover", "angle": 0.0}, "identity"], seed=0)
    M = exact_moments(iota, fam, mis3_view)
    sol = solve_gep(M)
    F, G, H = M.as_tuple()
    a = sol.alpha0
    assert abs(np.vdot(a, F @ a) - 1) <= 1e-8
    assert abs(np.vdot(a, G @ a)) <= 1e-8
    assert abs(np.vdot(a, H @ a) - sol.lambda0) <= 1e-8
    assert sol.diagnostics["dropped_f_null"] == 2


def test_solution_invariants_and_primal_optimality():
    rng = np.random.default_rng(6)
    for _ in range(30):
        inst, view, fam, iota = random_setup(rng)
        M = exact_moments(iota, fam, view)
        sol = solve_gep(M)
        K = kernel_projection(realify(M))
        assert abs(sol.x0 @ K.F_t @ sol.x0 - 1) <= 1e-10
        F, G, H = M.as_tuple()
        a = sol.alpha0
        assert abs(np.vdot(a, F @ a).real - 1) <= 1e-8
        assert np.vdot(a, G @ a).real <= 1e-8
        assert abs(np.vdot(a, H @ a).real - sol.lambda0) <= 1e-8
        assert sol.diagnostics["dual_gap"] <= 1e-7
        assert sol.lambda0 <= energy(iota, view) + 1e-9
        alphas = random_feasible_alphas(M, 500, rng)
        vals = np.einsum("ij,jk,ik->i", alphas.conj(), H, alphas).real
        assert vals.min() >= sol.lambda0 - 1e-8


def test_generalized_eigenvalues_have_even_multiplicity(knapsack6):
    view = subspace_view(knapsack6)
    iota = random_feasible_unit(view, np.random.default_rng(1))
    for seed in range(5):
        fam = build_search_family(view, ["phase", "grover", "qaoa", "identity"], seed=seed)
        E = realify(exact_moments(iota, fam, view))
        w = scipy_eigh(E.Hr, E.Fr, eigvals_only=True)
        assert np.allclose(w[0::2], w[1::2], atol=1e-8 * max(1, w.max()))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 20.0))
def test_scale_covariance(seed, s):
    rng = np.random.default_rng(seed)
    inst, view, fam, iota = random_setup(rng, n_max=4, ell_max=4)
    M = exact_moments(iota, fam, view)
    a = solve_gep(M)
    b = solve_gep(M.replace(H=s * M.H))
    assert b.lambda0 == pytest.approx(s * a.lambda0, rel=1e-9, abs=1e-12)
    if a.diagnostics["eigenspace_dim"] == b.diagnostics["eigenspace_dim"] == 2:
        assert np.max(np.abs(a.alpha0 - b.alpha0)) <= 1e-7


def test_solution_json(mis3_view):
    fam = build_search_family(mis3_view, ["mixer", "phase", "identity"], seed=1)
    sol = solve_gep(exact_moments(mis3_view.uniform_state(), fam, mis3_view))
    d = json.loads(sol.to_json())
    assert d["lambda0"] == sol.lambda0
    assert len(d["alpha0"]) == 3 and len(d["alpha0"][0]) == 2
    for key in ("kernel_dim", "dual_gap", "eigenspace_dim", "norm_residual"):
        assert key in d["diagnostics"]

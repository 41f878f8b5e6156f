import numpy as np
import pytest

from genqcp.ccop import custom_table, knapsack, max_independent_set
from genqcp.simulator import StateVector, build_search_family, subspace_view

# lines collected by test_acceptance and echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []

KINDS = ["mixer", "phase", "grover", "local", "qaoa"]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def mis3():
    return max_independent_set(3, [(0, 1), (1, 2)])


@pytest.fixture
def mis3_view(mis3):
    return subspace_view(mis3)


@pytest.fixture
def knapsack6():
    return knapsack([4, 2, 3, 5, 1, 3], [3, 1, 2, 4, 1, 2], 6)


def random_unit(dim, rng):
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return StateVector(v / np.linalg.norm(v))


def random_feasible_unit(view, rng):
    v = np.zeros(2**view.n, dtype=complex)
    idx = view.labels
    v[idx] = rng.standard_normal(idx.size) + 1j * rng.standard_normal(idx.size)
    return StateVector(v / np.linalg.norm(v))


def random_instance(n, rng):
    """Random table instance with at least one feasible label."""
    obj = rng.uniform(-3, 3, size=2**n)
    feas = rng.random(2**n) < 0.4
    feas[rng.integers(2**n)] = True
    return custom_table(obj, feas.astype(int))


def random_family(view, ell, rng, kinds=KINDS):
    spec = [str(k) for k in rng.choice(kinds, size=ell - 1)] + ["identity"]
    return build_search_family(view, spec, seed=int(rng.integers(2**31)))


def random_setup(rng, n_max=6, ell_max=5, feasible_iota=True):
    n = int(rng.integers(2, n_max + 1))
    inst = random_instance(n, rng)
    view = subspace_view(inst)
    ell = int(rng.integers(1, ell_max + 1))
    fam = random_family(view, ell, rng)
    iota = random_feasible_unit(view, rng) if feasible_iota else random_unit(2**n, rng)
    return inst, view, fam, iota


def random_feasible_alphas(M, count, rng, kernel_tol=1e-9):
    """Random complex coefficient vectors in ker(G), F-normalized; rows of the result.

    Built from its own block embedding of G, not the library's.
    """
    G = M.G
    Gr = np.block([[G.real, -G.imag], [G.imag, G.real]])
    ell = G.shape[0]
    if np.any(Gr):
        w, v = np.linalg.eigh(Gr)
        basis = v[:, w < kernel_tol * max(1.0, w[-1])]
    else:
        basis = np.eye(2 * ell)
    x = rng.standard_normal((count, basis.shape[1])) @ basis.T
    alphas = x[:, :ell] + 1j * x[:, ell:]
    norms = np.einsum("ij,jk,ik->i", alphas.conj(), M.F, alphas).real
    keep = norms > 1e-12
    return alphas[keep] / np.sqrt(norms[keep])[:, None]

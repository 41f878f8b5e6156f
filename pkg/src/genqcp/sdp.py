"""Mixed feasible inputs and sampling-based checks of rank-one optimality.

For a feasible ensemble the moment matrices stay PSD, so the same GEP
pipeline applies and yields a single coefficient vector. Its optimality
over the whole PSD cone of the moment-matrix SDP
``min tr[HX] s.t. tr[FX] = 1, tr[GX] = 0, X >= 0`` is checked empirically
by comparing against random feasible ``X`` of higher rank.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ccop import CcopInstance
from .gep import EXACT_KERNEL_TOL, GepError, GepSolution, realify, solve_gep
from .moments import MixedState, MomentMatrices, mixed_exact_moments
from .simulator import FeasibleSubspaceView, SearchFamily, StateError, subspace_view

GAP_TOL = 1e-8


@dataclass(frozen=True)
class DominanceReport:
    trials: int
    min_gap: float
    violations: int
    max_rank: int

    def to_dict(self) -> dict:
        return {"trials": self.trials, "min_gap": self.min_gap,
                "violations": self.violations, "max_rank": self.max_rank}


@dataclass(frozen=True, eq=False)
class OrderingCheck:
    holds: bool
    min_eig_H: float
    min_eig_gap: float
    witness: np.ndarray | None
    f_kernel_dim: int
    max_kernel_leak: float

    def to_dict(self) -> dict:
        w = None if self.witness is None else [[float(z.real), float(z.imag)] for z in self.witness]
        return {"holds": self.holds, "min_eig_H": self.min_eig_H,
                "min_eig_F_minus_H": self.min_eig_gap, "witness": w,
                "f_kernel_dim": self.f_kernel_dim, "max_kernel_leak": self.max_kernel_leak}


def mixed_pipeline(rho: MixedState, family: SearchFamily,
                   instance: CcopInstance | FeasibleSubspaceView,
                   kernel_tol: float | None = None, require_feasible: bool = True) -> GepSolution:
    view = instance if isinstance(instance, FeasibleSubspaceView) else subspace_view(instance)
    if require_feasible and not rho.is_feasible(view):
        raise StateError("ensemble has support outside the feasible subspace")
    return solve_gep(mixed_exact_moments(rho, family, view), kernel_tol)


def _kernel_basis(M: MomentMatrices, kernel_tol: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    E = realify(M)
    if not np.any(E.Gr):
        return np.eye(E.Gr.shape[0]), E.Fr, E.Hr
    w, v = np.linalg.eigh(E.Gr)
    basis = v[:, w < kernel_tol * max(1.0, float(w[-1]))]
    return basis, E.Fr, E.Hr


def random_feasible_psd(M: MomentMatrices, rank: int, seed=None,
                        kernel_tol: float = EXACT_KERNEL_TOL) -> np.ndarray:
    """Random real-embedded ``X = sum_i c_i x_i x_i^T`` with ``x_i`` in ker G and ``tr[F X] = 1``."""
    basis, Fr, _ = _kernel_basis(M, kernel_tol)
    if basis.shape[1] == 0:
        raise GepError("kernel of G is trivial")
    if rank < 1:
        raise ValueError("rank must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    xs = basis @ rng.standard_normal((basis.shape[1], rank))
    c = rng.uniform(0.1, 1.0, size=rank)
    X = (xs * c) @ xs.T
    tr = float(np.trace(Fr @ X))
    if tr <= 1e-14:
        raise GepError("sampled directions lie in the kernel of F")
    return X / tr


def realified_outer(alpha) -> np.ndarray:
    """``x x^T`` for the real image ``x = (Re a, Im a)``; ``tr[H x x^T] = a^+ H a``."""
    alpha = np.asarray(alpha, dtype=complex)
    x = np.concatenate([alpha.real, alpha.imag])
    return np.outer(x, x)


def dominance_check(M: MomentMatrices, lambda0: float, trials: int = 1000,
                    max_rank: int | None = None, seed=None,
                    kernel_tol: float = EXACT_KERNEL_TOL, gap_tol: float = GAP_TOL
                    ) -> DominanceReport:
    """Minimum of ``tr[H X] - lambda0`` over random feasible ``X`` of rank <= ``max_rank``."""
    rng = np.random.default_rng(seed)
    max_rank = M.ell if max_rank is None else max_rank
    _, _, Hr = _kernel_basis(M, kernel_tol)
    min_gap = np.inf
    violations = 0
    for _ in range(trials):
        rank = int(rng.integers(1, max_rank + 1))
        X = random_feasible_psd(M, rank, rng, kernel_tol)
        gap = float(np.trace(Hr @ X)) - lambda0
        min_gap = min(min_gap, gap)
        violations += gap < -gap_tol
    return DominanceReport(trials, float(min_gap), violations, max_rank)


def prop1_precondition(M: MomentMatrices, tol: float = 1e-10, kernel_tol: float = 1e-9,
                       leak_tol: float = 1e-8) -> OrderingCheck:
    """Check ``0 <= H <= F`` and ``ker F`` contained in ``ker H`` numerically.

    On failure the witness is an eigenvector of ``H`` or ``F - H`` with a
    negative eigenvalue, or an ``F``-null vector that ``H`` does not annihilate.
    """
    F, _, H = M.as_tuple()
    wh, vh = np.linalg.eigh(H)
    wd, vd = np.linalg.eigh(F - H)
    wf, vf = np.linalg.eigh(F)
    null = vf[:, wf < kernel_tol]
    leaks = np.linalg.norm(H @ null, axis=0) if null.size else np.zeros(0)
    leak = float(leaks.max()) if leaks.size else 0.0

    witness = None
    if wh[0] < -tol:
        witness = vh[:, 0]
    elif wd[0] < -tol:
        witness = vd[:, 0]
    elif leak > leak_tol:
        witness = null[:, int(np.argmax(leaks))]
    return OrderingCheck(witness is None, float(wh[0]), float(wd[0]), witness,
                      int(null.shape[1]), leak)

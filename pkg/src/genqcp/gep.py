"""Constrained parameter problem as a symmetric-definite generalized eigenproblem.

Given hermitian moment matrices, minimize ``a^+ H a`` subject to
``a^+ F a = 1`` and ``a^+ G a = 0``. The problem is rewritten over the
reals, restricted to the kernel of the realified ``G`` and solved as the
smallest eigenpair of the pencil ``(H~, F~)``. :func:`dual_bisection`
recomputes the optimal value from the Lagrangian dual alone and serves as
an independent check.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import linalg as sla

from .moments import MomentMatrices

EXACT_KERNEL_TOL = 1e-9
RANK_TOL = 1e-10


class GepError(ValueError):
    pass


class NoFeasibleDirection(GepError):
    """The kernel of G is trivial; not even the identity direction is feasible."""


def sampled_kernel_tol(ell: int, m: int) -> float:
    return max(EXACT_KERNEL_TOL, 5.0 * math.sqrt(ell) / math.sqrt(m))


def default_kernel_tol(M: MomentMatrices) -> float:
    return sampled_kernel_tol(M.ell, M.m) if M.m else EXACT_KERNEL_TOL


# --------------------------------------------------------------------------
# realification
# --------------------------------------------------------------------------

def embed(mat: np.ndarray) -> np.ndarray:
    """``[[Re, -Im], [Im, Re]]``."""
    re, im = mat.real, mat.imag
    return np.block([[re, -im], [im, re]])


def to_real(alpha: np.ndarray) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=complex)
    return np.concatenate([alpha.real, alpha.imag])


def to_complex(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    ell = x.shape[0] // 2
    return x[:ell] + 1j * x[ell:]


@dataclass(frozen=True, eq=False)
class RealEmbedding:
    Fr: np.ndarray
    Gr: np.ndarray
    Hr: np.ndarray

    @property
    def ell(self) -> int:
        return self.Fr.shape[0] // 2


def realify(M: MomentMatrices, tol: float = 1e-10) -> RealEmbedding:
    mats = []
    for name, mat in zip("FGH", M.as_tuple()):
        scale = max(1.0, float(np.abs(mat).max()))
        if np.abs(mat - mat.conj().T).max() > tol * scale:
            raise GepError(f"moment matrix {name} is not hermitian")
        mats.append(embed(0.5 * (mat + mat.conj().T)))
    return RealEmbedding(*mats)


# --------------------------------------------------------------------------
# kernel restriction
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KernelRestriction:
    """The pencil restricted to ``ker(G)`` in real coordinates.

    ``basis`` has orthonormal columns spanning the retained subspace, so the
    restricted matrices are ``basis.T @ Fr @ basis`` etc. Its leading
    ``kernel_dim`` directions are eigenvectors of ``Gr`` sorted by ascending
    eigenvalue; when ``F~`` is rank deficient on that kernel the null
    directions of ``F~`` are dropped (they map to the zero state) and
    ``dim < kernel_dim``.
    """

    basis: np.ndarray
    kernel_dim: int
    F_t: np.ndarray
    H_t: np.ndarray
    kernel_tol: float
    g_eigenvalues: np.ndarray
    dropped_f_null: int = 0
    ridge_applied: float = 0.0
    embedding: RealEmbedding | None = None

    @property
    def dim(self) -> int:
        return self.F_t.shape[0]


def kernel_projection(E: RealEmbedding, kernel_tol: float = EXACT_KERNEL_TOL,
                      ridge: float = 0.0, rank_tol: float = RANK_TOL) -> KernelRestriction:
    """Restrict ``(Fr, Hr)`` to the numerical kernel of ``Gr``.

    Eigenvalues of ``Gr`` below ``kernel_tol * max(1, lambda_max(Gr))`` are
    treated as zero. A null ``Gr`` takes the fast path with the identity
    basis. Raises :class:`NoFeasibleDirection` for an empty kernel.
    """
    d = E.Gr.shape[0]
    if not np.any(E.Gr):
        basis = np.eye(d)
        g_eigs = np.zeros(d)
        kdim = d
    else:
        g_eigs, vecs = np.linalg.eigh(0.5 * (E.Gr + E.Gr.T))
        cut = kernel_tol * max(1.0, float(g_eigs[-1]))
        kdim = int(np.count_nonzero(g_eigs < cut))
        basis = vecs[:, :kdim]
    if kdim == 0:
        raise NoFeasibleDirection(
            f"G has no eigenvalue below {kernel_tol:g} (min {g_eigs[0]:.3e})")

    F_t = basis.T @ E.Fr @ basis
    H_t = basis.T @ E.Hr @ basis
    F_t, H_t = 0.5 * (F_t + F_t.T), 0.5 * (H_t + H_t.T)

    dropped = 0
    f_eigs, f_vecs = np.linalg.eigh(F_t)
    if f_eigs[0] <= rank_tol * max(1.0, float(f_eigs[-1])) and ridge <= 0:
        keep = f_eigs > rank_tol * max(1.0, float(f_eigs[-1]))
        if not keep.any():
            raise NoFeasibleDirection("F vanishes on the kernel of G")
        dropped = int(np.count_nonzero(~keep))
        w = f_vecs[:, keep]
        basis = basis @ w
        F_t = np.diag(f_eigs[keep])
        H_t = w.T @ H_t @ w
        H_t = 0.5 * (H_t + H_t.T)

    applied = 0.0
    if ridge > 0 and np.linalg.eigvalsh(F_t)[0] < ridge:
        F_t = F_t + ridge * np.eye(F_t.shape[0])
        applied = ridge
    return KernelRestriction(basis, kdim, F_t, H_t, kernel_tol, g_eigs, dropped, applied, E)


# --------------------------------------------------------------------------
# pencil
# --------------------------------------------------------------------------

def degeneracy_tol(lam: float) -> float:
    return 1e-9 * max(1.0, abs(lam))


def solve_pencil(K: KernelRestriction, deg_tol: float | None = None
                 ) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue of ``H~ x = lambda F~ x`` and its eigenspace.

    Reduction: ``F~ = L L^T``, ``A = L^-1 H~ L^-T``, ``A y = lambda y``,
    ``x = L^-T y``. Returned eigenvectors are columns, orthonormal in the
    ``F~`` inner product.
    """
    F_t, H_t = K.F_t, K.H_t
    try:
        L = np.linalg.cholesky(F_t)
    except np.linalg.LinAlgError:
        raise GepError("restricted F is not positive-definite; ridge first") from None
    if np.diag(L).min() ** 2 <= RANK_TOL * max(1.0, float(np.abs(F_t).max())) * 1e-2:
        raise GepError("restricted F is numerically singular; ridge first")
    Linv_H = sla.solve_triangular(L, H_t, lower=True)
    A = sla.solve_triangular(L, Linv_H.T, lower=True).T
    A = 0.5 * (A + A.T)
    w, y = np.linalg.eigh(A)
    lam = float(w[0])
    tol = degeneracy_tol(lam) if deg_tol is None else deg_tol
    sel = w <= lam + tol
    x = sla.solve_triangular(L.T, y[:, sel], lower=False)
    return lam, x


def dual_bisection(K: KernelRestriction, tol: float = 1e-12, max_iter: int = 200) -> float:
    """Largest ``lambda`` with ``min eig(H~ - lambda F~) >= -tol``, by bisection."""
    F_t, H_t = K.F_t, K.H_t
    f_eigs = np.linalg.eigvalsh(F_t)
    h_eigs = np.linalg.eigvalsh(H_t)
    if f_eigs[0] <= 0:
        raise GepError("restricted F must be positive-definite")
    lo = 0.0 if h_eigs[0] >= 0 else h_eigs[0] / f_eigs[0]
    hi = h_eigs[-1] / f_eigs[0] if h_eigs[-1] > 0 else 0.0
    hi = max(hi, lo) + 1e-300

    def ok(lam):
        return np.linalg.eigvalsh(H_t - lam * F_t)[0] >= -tol

    if ok(hi):
        return hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(hi)):
            break
    return lo


# --------------------------------------------------------------------------
# back-map
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GepSolution:
    lambda0: float
    x0: np.ndarray
    alpha0: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def l1_norm(self) -> float:
        return float(np.abs(self.alpha0).sum())

    def to_dict(self) -> dict[str, Any]:
        return {
            "lambda0": self.lambda0,
            "alpha0": [[float(z.real), float(z.imag)] for z in self.alpha0],
            "x0": [float(v) for v in self.x0],
            "l1_norm": self.l1_norm,
            "diagnostics": _jsonable(self.diagnostics),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def fix_global_phase(alpha: np.ndarray) -> np.ndarray:
    """Rotate so the largest-modulus entry (first on ties) is real positive."""
    mags = np.abs(alpha)
    j = int(np.argmax(mags >= mags.max() * (1 - 1e-9)))
    if mags[j] == 0:
        return alpha
    return alpha * (abs(alpha[j]) / alpha[j])


def _lift(x: np.ndarray, K: KernelRestriction) -> np.ndarray:
    return to_complex(K.basis @ x)


def _select_min_l1(X: np.ndarray, K: KernelRestriction, n_angles: int = 16) -> np.ndarray:
    """Among unit combinations of the F~-orthonormal columns of ``X``, pick a small l1 norm.

    Coarse search: every basis column and every pairwise rotation on a grid of
    ``n_angles`` angles in [0, pi). Complex-pair partners only differ by a
    global phase and tie exactly; the first candidate wins ties.
    """
    cands = [X[:, i] for i in range(X.shape[1])]
    thetas = np.arange(1, n_angles) * math.pi / n_angles
    for i, j in itertools.combinations(range(X.shape[1]), 2):
        for t in thetas:
            cands.append(math.cos(t) * X[:, i] + math.sin(t) * X[:, j])
    norms = [float(np.abs(_lift(c, K)).sum()) for c in cands]
    best = min(range(len(cands)), key=lambda i: (round(norms[i], 12), i))
    return cands[best]


def normalize_and_backmap(eigvecs: np.ndarray, K: KernelRestriction, lambda0: float,
                          M: MomentMatrices | None = None) -> GepSolution:
    """F~-normalize, pick the eigenspace element minimizing ``||alpha||_1``, map to ``C^ell``."""
    X = np.atleast_2d(np.asarray(eigvecs, dtype=float).T).T
    if X.size == 0:
        raise GepError("empty eigenspace")
    cols = []
    for i in range(X.shape[1]):
        x = X[:, i]
        cols.append(x / math.sqrt(float(x @ K.F_t @ x)))
    X = np.column_stack(cols)
    x0 = _select_min_l1(X, K) if X.shape[1] > 1 else X[:, 0]
    x0 = x0 / math.sqrt(float(x0 @ K.F_t @ x0))
    alpha = fix_global_phase(_lift(x0, K))

    diag: dict[str, Any] = {
        "kernel_dim": K.kernel_dim,
        "restricted_dim": K.dim,
        "dropped_f_null": K.dropped_f_null,
        "ridge_applied": K.ridge_applied,
        "eigenspace_dim": int(X.shape[1]),
        "x_F_x": float(x0 @ K.F_t @ x0),
        "l1_norm": float(np.abs(alpha).sum()),
    }
    if M is not None:
        F, G, H = M.as_tuple()
        diag["norm_residual"] = float(abs(np.vdot(alpha, F @ alpha).real - 1.0))
        diag["feasibility_residual"] = float(np.vdot(alpha, G @ alpha).real)
        diag["energy_residual"] = float(abs(np.vdot(alpha, H @ alpha).real - lambda0))
    return GepSolution(float(lambda0), x0, alpha, diag)


def solve_gep(M: MomentMatrices, kernel_tol: float | None = None, ridge: float = 0.0,
              check_dual: bool = True) -> GepSolution:
    """Full pipeline: realify, restrict to ker G, solve the pencil, back-map."""
    kt = default_kernel_tol(M) if kernel_tol is None else kernel_tol
    K = kernel_projection(realify(M), kt, ridge)
    lam, vecs = solve_pencil(K)
    sol = normalize_and_backmap(vecs, K, lam, M)
    sol.diagnostics["kernel_tol"] = kt
    if check_dual:
        dual = dual_bisection(K)
        sol.diagnostics["dual_lambda"] = dual
        sol.diagnostics["dual_gap"] = abs(dual - lam)
    return sol

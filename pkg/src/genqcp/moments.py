"""Moment matrices ``F``, ``G``, ``H`` of a search family.

``F_jk = <i|U_j^+ U_k|i>``, ``G_jk = <i|U_j^+ (1 - P_S) U_k|i>`` and
``H_jk = <i|U_j^+ C U_k|i>``. They are computed either exactly from the
cached images ``U_j|i>`` or by the bit-string sampling protocol, which only
ever measures in the computational basis and evaluates the classical
objective and feasibility oracle on the outcomes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .ccop import CcopInstance
from .simulator import (
    FeasibleSubspaceView,
    SearchFamily,
    SearchUnitary,
    StateError,
    StateVector,
    sample_from_probabilities,
    subspace_view,
)

_RE, _IM, _DIAG = 0, 1, 2


@dataclass(frozen=True, eq=False)
class MomentMatrices:
    F: np.ndarray
    G: np.ndarray
    H: np.ndarray
    mode: str = "exact"
    m: int | None = None
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def ell(self) -> int:
        return self.F.shape[0]

    def as_tuple(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.F, self.G, self.H

    def replace(self, **kw) -> "MomentMatrices":
        d = dict(F=self.F, G=self.G, H=self.H, mode=self.mode, m=self.m,
                 seed=self.seed, meta=dict(self.meta))
        d.update(kw)
        return MomentMatrices(**d)

    def min_eigenvalues(self) -> dict[str, float]:
        return {name: float(np.linalg.eigvalsh(_herm(mat))[0])
                for name, mat in zip("FGH", self.as_tuple())}

    def to_dict(self) -> dict[str, Any]:
        def enc(mat):
            return [[[float(z.real), float(z.imag)] for z in row] for row in mat]

        return {"ell": self.ell, "mode": self.mode, "m": self.m, "seed": self.seed,
                "meta": self.meta, "F": enc(self.F), "G": enc(self.G), "H": enc(self.H)}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "MomentMatrices":
        def dec(rows):
            arr = np.asarray(rows, dtype=float)
            return arr[..., 0] + 1j * arr[..., 1]

        return cls(dec(d["F"]), dec(d["G"]), dec(d["H"]), d.get("mode", "exact"),
                   d.get("m"), d.get("seed"), dict(d.get("meta", {})))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "MomentMatrices":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _herm(mat: np.ndarray) -> np.ndarray:
    return 0.5 * (mat + mat.conj().T)


def _view(instance) -> FeasibleSubspaceView:
    return instance if isinstance(instance, FeasibleSubspaceView) else subspace_view(instance)


def _check_unit(iota: StateVector, tol: float = 1e-10) -> None:
    if abs(iota.norm - 1.0) > tol:
        raise StateError(f"initial state has norm {iota.norm}, expected 1")


def moments_from_images(images: np.ndarray, view: FeasibleSubspaceView
                        ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gram-type matrices of the rows of ``images`` under 1, 1 - P_S and C."""
    conj = images.conj()
    F = conj @ images.T
    infeas = images * (~view.mask)
    G = conj @ infeas.T
    H = conj @ (images * view.cost).T
    return F, G, H


def exact_moments(iota: StateVector, family: SearchFamily,
                  instance: CcopInstance | FeasibleSubspaceView) -> MomentMatrices:
    _check_unit(iota)
    view = _view(instance)
    F, G, H = moments_from_images(family.images(iota), view)
    return MomentMatrices(_herm(F), _herm(G), _herm(H), "exact",
                          meta={"family": family.describe()})


# --------------------------------------------------------------------------
# pairwise ancilla circuits
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class JointState:
    """Main register tensored with an ancilla register.

    ``amplitudes[x, a]`` is the amplitude of ``|x> (main) (x) |a> (ancilla)``.
    """

    amplitudes: np.ndarray

    @property
    def n_main(self) -> int:
        return self.amplitudes.shape[0].bit_length() - 1

    @property
    def n_ancilla(self) -> int:
        return self.amplitudes.shape[1].bit_length() - 1

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def branch(self, a: int) -> np.ndarray:
        """Unnormalized main-register vector conditioned on ancilla label ``a``."""
        return self.amplitudes[:, a]

    def ancilla_probabilities(self) -> np.ndarray:
        return (np.abs(self.amplitudes) ** 2).sum(axis=0)

    def sample(self, m: int, seed) -> tuple[np.ndarray, np.ndarray]:
        """Joint Born samples: arrays of main labels and ancilla labels."""
        probs = (np.abs(self.amplitudes) ** 2).reshape(-1)
        flat = sample_from_probabilities(probs, m, seed)
        dim_a = self.amplitudes.shape[1]
        return flat // dim_a, flat % dim_a


def _pair_from_images(a: np.ndarray, b: np.ndarray) -> JointState:
    return JointState(np.stack([0.5 * (a + b), 0.5 * (a - b)], axis=1))


def _pair_state(iota: StateVector, Uj: SearchUnitary, Uk: SearchUnitary,
                phase: complex) -> JointState:
    _check_unit(iota)
    return _pair_from_images(Uj.apply_array(iota.amplitudes),
                             phase * Uk.apply_array(iota.amplitudes))


def lambda_re_state(iota: StateVector, Uj: SearchUnitary, Uk: SearchUnitary) -> JointState:
    """``1/2 (U_j + U_k)|i>|0> + 1/2 (U_j - U_k)|i>|1>`` (Hadamard, controlled pair, Hadamard)."""
    return _pair_state(iota, Uj, Uk, 1.0)


def lambda_im_state(iota: StateVector, Uj: SearchUnitary, Uk: SearchUnitary) -> JointState:
    """As :func:`lambda_re_state` with an S gate on the ancilla: ``U_k -> i U_k``."""
    return _pair_state(iota, Uj, Uk, 1j)


def simulate_pair_circuit(iota: StateVector, Uj: SearchUnitary, Uk: SearchUnitary,
                          imaginary: bool = False) -> JointState:
    """Gate-by-gate reference: H, (S), C0(U_j), C1(U_k), H on the ancilla qubit."""
    _check_unit(iota)
    had = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    anc = had @ np.array([1.0, 0.0])
    if imaginary:
        anc = np.diag([1, 1j]) @ anc
    joint = np.outer(iota.amplitudes, anc)
    joint[:, 0] = Uj.apply_array(joint[:, 0])
    joint[:, 1] = Uk.apply_array(joint[:, 1])
    return JointState(joint @ had.T)


def _stream(seed, j: int, k: int, tag: int) -> np.random.Generator:
    base = 0 if seed is None else int(seed)
    return np.random.default_rng([base, j, k, tag])


def sampled_moments(iota: StateVector, family: SearchFamily,
                    instance: CcopInstance | FeasibleSubspaceView, m: int,
                    seed: int | None = None) -> MomentMatrices:
    """Bit-string sampling estimator of ``(F, G, H)`` with ``m`` shots per entry.

    Diagonals: ``F_jj = 1``, ``G_jj`` the infeasible frequency and ``H_jj``
    the empirical objective mean from ``U_j|i>``. Off-diagonals (``k < j``)
    use the polarization identity with the ``4/m`` prefactor over tuple
    samples drawn from the pairwise ancilla circuits; the upper triangle is
    the conjugate. Every entry uses its own RNG stream derived from
    ``(seed, j, k, tag)``.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    _check_unit(iota)
    view = _view(instance)
    cost = view.cost
    infeas = (~view.mask).astype(float)
    ell = family.ell
    images = family.images(iota)
    F = np.zeros((ell, ell), dtype=complex)
    G = np.zeros((ell, ell), dtype=complex)
    H = np.zeros((ell, ell), dtype=complex)

    for j in range(ell):
        probs = np.abs(images[j]) ** 2
        xs = sample_from_probabilities(probs, m, _stream(seed, j, j, _DIAG))
        F[j, j] = 1.0
        G[j, j] = infeas[xs].mean()
        H[j, j] = cost[xs].mean()
        for k in range(j):
            sums = []
            for tag, phase in ((_RE, 1.0), (_IM, 1j)):
                joint = _pair_from_images(images[j], phase * images[k])
                x, anc = joint.sample(m, _stream(seed, j, k, tag))
                keep = anc == 0
                sums.append((keep.sum(), (infeas[x] * keep).sum(), (cost[x] * keep).sum()))
            (fr, gr, hr), (fi, gi, hi) = sums
            F[j, k] = _polarize(fr, fi, F[j, j], F[k, k], m)
            G[j, k] = _polarize(gr, gi, G[j, j], G[k, k], m)
            H[j, k] = _polarize(hr, hi, H[j, j], H[k, k], m)
            F[k, j] = np.conj(F[j, k])
            G[k, j] = np.conj(G[j, k])
            H[k, j] = np.conj(H[j, k])
    return MomentMatrices(F, G, H, "sampled", m=m, seed=seed,
                          meta={"family": family.describe()})


def _polarize(re_sum, im_sum, djj, dkk, m: int) -> complex:
    re = 0.5 * (4.0 / m * re_sum - djj - dkk)
    im = 0.5 * (4.0 / m * im_sum - djj - dkk)
    return complex(re - 1j * im)


def default_ridge(m: int | None) -> float:
    return 0.0 if not m else 10.0 / math.sqrt(m)


def psd_repair(M: MomentMatrices, ridge: float = 0.0, clip_tol: float = 0.0) -> MomentMatrices:
    """Clip negative eigenvalues to zero; then ridge ``F`` and ``H`` up to ``ridge``.

    A matrix whose smallest eigenvalue is at least ``-clip_tol`` is left as
    is. Otherwise it is rebuilt from its eigenbasis with negative
    eigenvalues set to zero. ``F`` and ``H`` then get ``+ridge * I`` when
    their smallest eigenvalue is below ``ridge``.
    """

    def clip(mat):
        mat = _herm(mat)
        w, v = np.linalg.eigh(mat)
        if w[0] >= -clip_tol:
            return mat
        return _herm((v * np.maximum(w, 0.0)) @ v.conj().T)

    def lift(mat):
        if ridge > 0 and np.linalg.eigvalsh(mat)[0] < ridge:
            return mat + ridge * np.eye(mat.shape[0])
        return mat

    F, G, H = (clip(x) for x in M.as_tuple())
    meta = dict(M.meta, repaired={"ridge": ridge, "clip_tol": clip_tol})
    return M.replace(F=lift(F), G=G, H=lift(H), meta=meta)


# --------------------------------------------------------------------------
# mixed inputs
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MixedState:
    """Explicit ensemble ``rho = sum_i p_i |i><i|``."""

    components: tuple[tuple[float, StateVector], ...]

    def __post_init__(self):
        comps = tuple((float(p), s) for p, s in self.components)
        if not comps:
            raise StateError("empty ensemble")
        if any(p <= 0 for p, _ in comps):
            raise StateError("ensemble weights must be positive")
        if abs(sum(p for p, _ in comps) - 1.0) > 1e-12:
            raise StateError("ensemble weights must sum to one")
        if any(abs(s.norm - 1.0) > 1e-10 for _, s in comps):
            raise StateError("ensemble components must be unit vectors")
        if len({s.amplitudes.size for _, s in comps}) != 1:
            raise StateError("ensemble components have different sizes")
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_lists(cls, weights: Sequence[float], states: Sequence[StateVector]) -> "MixedState":
        return cls(tuple(zip(weights, states)))

    @property
    def weights(self) -> np.ndarray:
        return np.array([p for p, _ in self.components])

    def is_feasible(self, view: FeasibleSubspaceView, tol: float = 1e-12) -> bool:
        return all(np.sum(np.abs(s.amplitudes[~view.mask]) ** 2) <= tol
                   for _, s in self.components)

    def expectation_diagonal(self, diag: np.ndarray) -> float:
        return float(sum(p * s.expectation_diagonal(diag) for p, s in self.components))


def mixed_exact_moments(rho: MixedState, family: SearchFamily,
                        instance: CcopInstance | FeasibleSubspaceView) -> MomentMatrices:
    """``F_jk = tr[rho U_j^+ U_k]`` and likewise ``G``, ``H``."""
    view = _view(instance)
    ell = family.ell
    acc = [np.zeros((ell, ell), dtype=complex) for _ in range(3)]
    for p, comp in rho.components:
        for a, mat in zip(acc, moments_from_images(family.images(comp), view)):
            a += p * mat
    F, G, H = (_herm(a) for a in acc)
    return MomentMatrices(F, G, H, "exact_mixed",
                          meta={"family": family.describe(), "components": len(rho.components)})

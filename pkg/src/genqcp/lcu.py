"""Probabilistic linear-combination-of-unitaries update ``|i> -> M_a|i> / ||M_a|i>||``.

The ancilla register holds ``ceil(log2 ell)`` qubits. Its preparation is
``(sqrt(a), 0) / sqrt(||a||_1)`` with the principal square root taken
entrywise; a controlled application of ``U_j`` on ancilla label ``j`` and a
binary measurement along ``(conj(sqrt(a)), 0) / sqrt(||a||_1)`` leave
``M_a|i> / ||a||_1`` in the main register on success.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .moments import JointState
from .simulator import SearchFamily, StateError, StateVector

log = logging.getLogger(__name__)

DEFAULT_RETRY_CAP = 64


class AnnihilatedState(StateError):
    """``M_a|i>`` is the zero vector."""


def ancilla_qubits(ell: int) -> int:
    return max(0, math.ceil(math.log2(ell))) if ell > 1 else 0


@dataclass(frozen=True, eq=False)
class AncillaPrep:
    amplitudes: np.ndarray
    ell: int

    @property
    def n_qubits(self) -> int:
        return self.amplitudes.size.bit_length() - 1

    @property
    def measurement_direction(self) -> np.ndarray:
        """``|xi>``: the entrywise conjugate of the preparation."""
        return self.amplitudes.conj()


@dataclass(frozen=True, eq=False)
class LcuOutcome:
    success: bool
    post_state: StateVector | None
    success_probability: float
    attempts: int = 1
    fallback: bool = False

    def to_dict(self) -> dict:
        return {"success": self.success, "success_probability": self.success_probability,
                "attempts": self.attempts, "fallback": self.fallback}


def ancilla_prep(alpha) -> AncillaPrep:
    alpha = np.asarray(alpha, dtype=complex).reshape(-1)
    l1 = float(np.abs(alpha).sum())
    if l1 == 0:
        raise StateError("coefficient vector is zero")
    dim = 2 ** ancilla_qubits(alpha.size)
    amps = np.zeros(dim, dtype=complex)
    amps[: alpha.size] = np.sqrt(alpha) / math.sqrt(l1)
    return AncillaPrep(amps, alpha.size)


def compound_apply(iota: StateVector, prep: AncillaPrep, family: SearchFamily) -> JointState:
    """``sum_j U_j|i> (x) prep_j |j>``; padding labels carry the identity (and zero weight)."""
    if prep.ell != family.ell:
        raise StateError(f"preparation for ell={prep.ell} used with ell={family.ell}")
    joint = np.zeros((iota.amplitudes.size, prep.amplitudes.size), dtype=complex)
    for j, u in enumerate(family):
        if prep.amplitudes[j] != 0:
            joint[:, j] = prep.amplitudes[j] * u.apply_array(iota.amplitudes)
    pad = prep.amplitudes[family.ell:]
    if np.any(pad):
        joint[:, family.ell:] = np.outer(iota.amplitudes, pad)
    return JointState(joint)


def project_ancilla(joint: JointState, prep: AncillaPrep) -> np.ndarray:
    """Unnormalized main-register state after the ancilla is found along ``|xi>``."""
    xi = prep.measurement_direction
    return joint.amplitudes @ xi.conj()


def postselect(joint: JointState, alpha, seed=None) -> LcuOutcome:
    """Binary ancilla measurement; success leaves the normalized ``M_a|i>``."""
    prep = ancilla_prep(alpha)
    branch = project_ancilla(joint, prep)
    p = float(min(1.0, np.vdot(branch, branch).real))
    if p <= 0.0:
        return LcuOutcome(False, None, 0.0)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if rng.random() < p:
        return LcuOutcome(True, StateVector.normalized(branch), p)
    return LcuOutcome(False, None, p)


def lcu_image(iota: StateVector, family: SearchFamily, alpha) -> np.ndarray:
    """Unnormalized ``M_a |i> = sum_j a_j U_j |i>``."""
    alpha = np.asarray(alpha, dtype=complex).reshape(-1)
    if alpha.size != family.ell:
        raise StateError("coefficient vector length does not match the family")
    return alpha @ family.images(iota)


def apply_lcu_exact(iota: StateVector, family: SearchFamily, alpha,
                    atol: float = 1e-14) -> StateVector:
    out = lcu_image(iota, family, alpha)
    nrm = float(np.linalg.norm(out))
    if nrm <= atol:
        raise AnnihilatedState("M_alpha annihilates the input state")
    return StateVector(out / nrm)


def analytic_success_probability(iota: StateVector, family: SearchFamily, alpha) -> float:
    alpha = np.asarray(alpha, dtype=complex)
    out = lcu_image(iota, family, alpha)
    return float(np.vdot(out, out).real / np.abs(alpha).sum() ** 2)


def lcu_update(iota: StateVector, family: SearchFamily, alpha, seed=None,
               retry_cap: int = DEFAULT_RETRY_CAP) -> LcuOutcome:
    """Repeat prepare/apply/measure until success, at most ``retry_cap`` times.

    On exhaustion the exact path is used and the outcome is flagged with
    ``fallback=True``.
    """
    rng = np.random.default_rng(seed)
    joint = compound_apply(iota, ancilla_prep(alpha), family)
    p = 0.0
    for attempt in range(1, retry_cap + 1):
        out = postselect(joint, alpha, rng)
        p = out.success_probability
        if out.success:
            return LcuOutcome(True, out.post_state, p, attempt)
        if p == 0.0:
            break
    log.warning("LCU post-selection failed %d times (p=%.3g); using exact update",
                retry_cap, p)
    return LcuOutcome(True, apply_lcu_exact(iota, family, alpha), p, retry_cap, fallback=True)

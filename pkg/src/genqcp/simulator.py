"""Dense statevector simulation of the main register and the search unitaries.

States are stored as ``2**n`` complex amplitudes in label order (qubit 0 is
the least-significant bit). All public operations return new objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .ccop import CcopInstance, InstanceError, bits_to_label, label_to_bits

NORM_TOL = 1e-12
# accepted drift on construction; kernels themselves preserve the norm to NORM_TOL
UNIT_TOL = 1e-10
TWO_PI = 2.0 * math.pi


class StateError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        n = int(round(math.log2(amps.size))) if amps.size else -1
        if n < 0 or 2**n != amps.size:
            raise StateError("amplitude count must be a power of two")
        if abs(np.linalg.norm(amps) - 1.0) > UNIT_TOL:
            raise StateError(f"state is not unit norm (norm={np.linalg.norm(amps):.3g})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_qubits(self) -> int:
        return self.amplitudes.size.bit_length() - 1

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def expectation_diagonal(self, diag: np.ndarray) -> float:
        return float(np.dot(self.probabilities(), diag))

    @classmethod
    def normalized(cls, amplitudes) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex)
        nrm = np.linalg.norm(amps)
        if nrm == 0:
            raise StateError("cannot normalize the zero vector")
        return cls(amps / nrm)


@dataclass(frozen=True, eq=False)
class FeasibleSubspaceView:
    """Cached diagonal data of an instance: objective values and feasible labels."""

    instance: CcopInstance
    labels: np.ndarray = field(init=False)
    mask: np.ndarray = field(init=False)
    cost: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "mask", self.instance.feasible_table)
        object.__setattr__(self, "labels", self.instance.feasible_labels)
        object.__setattr__(self, "cost", self.instance.objective_table)

    @property
    def n(self) -> int:
        return self.instance.n

    @property
    def size(self) -> int:
        return int(self.labels.size)

    def uniform_state(self) -> StateVector:
        if self.size == 0:
            raise StateError("feasible set is empty")
        amps = np.zeros(2**self.n, dtype=complex)
        amps[self.labels] = 1.0 / math.sqrt(self.size)
        return StateVector(amps)


def subspace_view(instance: CcopInstance) -> FeasibleSubspaceView:
    return FeasibleSubspaceView(instance)


# --------------------------------------------------------------------------
# primitive kernels on raw amplitude arrays
# --------------------------------------------------------------------------

def _phase(amps: np.ndarray, cost: np.ndarray, gamma: float) -> np.ndarray:
    return amps * np.exp(-1j * gamma * cost)


def _one_qubit(amps: np.ndarray, n: int, q: int, mat: np.ndarray) -> np.ndarray:
    view = amps.reshape(2 ** (n - 1 - q), 2, 2**q)
    out = np.einsum("ab,ibj->iaj", mat, view)
    return out.reshape(-1)


def _mixer(amps: np.ndarray, n: int, beta: float) -> np.ndarray:
    # exp(-i beta sum_i X_i) = prod_i (cos beta - i sin beta X_i)
    c, s = math.cos(beta), math.sin(beta)
    mat = np.array([[c, -1j * s], [-1j * s, c]])
    for q in range(n):
        amps = _one_qubit(amps, n, q, mat)
    return amps


def _grover(amps: np.ndarray, labels: np.ndarray, beta: float) -> np.ndarray:
    if labels.size == 0:
        raise StateError("Grover mixer needs a non-empty feasible set")
    inv_sqrt = 1.0 / math.sqrt(labels.size)
    overlap = amps[labels].sum() * inv_sqrt
    out = amps.copy()
    out[labels] -= (1.0 - np.exp(-1j * beta)) * overlap * inv_sqrt
    return out


def _rot(axis: str, theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    if axis == "rx":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if axis == "ry":
        return np.array([[c, -s], [s, c]], dtype=complex)
    return np.array([[np.exp(-1j * theta / 2), 0], [0, np.exp(1j * theta / 2)]])


_FIXED_1Q = {
    "h": np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "s": np.array([[1, 0], [0, 1j]]),
}


def _gate(amps: np.ndarray, n: int, gate: Sequence) -> np.ndarray:
    name = str(gate[0]).lower()
    if name in ("rx", "ry", "rz"):
        return _one_qubit(amps, n, int(gate[1]), _rot(name, float(gate[2])))
    if name in _FIXED_1Q:
        return _one_qubit(amps, n, int(gate[1]), _FIXED_1Q[name])
    if name in ("cnot", "cx"):
        ctrl, tgt = int(gate[1]), int(gate[2])
        if ctrl == tgt:
            raise StateError("CNOT control and target coincide")
        labels = np.arange(amps.size)
        hit = (labels >> ctrl) & 1 == 1
        out = amps.copy()
        out[labels[hit]] = amps[labels[hit] ^ (1 << tgt)]
        return out
    raise StateError(f"unknown gate {gate[0]!r}")


# --------------------------------------------------------------------------
# search unitaries
# --------------------------------------------------------------------------

_PRIMITIVES = ("phase", "mixer", "grover", "gate")


@dataclass(frozen=True, eq=False)
class SearchUnitary:
    """A product of primitive operations applied left to right.

    ``ops`` entries are ``("phase", gamma)``, ``("mixer", beta)``,
    ``("grover", beta)`` or ``("gate", (name, *args))``. An empty ``ops``
    tuple is the identity.
    """

    kind: str
    ops: tuple = ()
    view: FeasibleSubspaceView | None = None

    @property
    def params(self) -> tuple[float, ...]:
        out = []
        for op, arg in self.ops:
            if op == "gate":
                out.extend(float(a) for a in arg[1:] if isinstance(a, float))
            else:
                out.append(float(arg))
        return tuple(out)

    @property
    def is_identity(self) -> bool:
        return not self.ops

    @property
    def feasibility_preserving(self) -> bool:
        return all(op in ("phase", "grover") for op, _ in self.ops)

    def apply_array(self, amps: np.ndarray) -> np.ndarray:
        n = amps.size.bit_length() - 1
        for op, arg in self.ops:
            if op == "phase":
                amps = _phase(amps, self._view().cost, arg)
            elif op == "mixer":
                amps = _mixer(amps, n, arg)
            elif op == "grover":
                amps = _grover(amps, self._view().labels, arg)
            else:
                amps = _gate(amps, n, arg)
        return amps

    def __call__(self, state: StateVector) -> StateVector:
        return StateVector(self.apply_array(state.amplitudes))

    def _view(self) -> FeasibleSubspaceView:
        if self.view is None:
            raise StateError(f"{self.kind} unitary needs an instance view")
        return self.view

    def describe(self) -> dict[str, Any]:
        return {"kind": self.kind, "ops": [[op, list(arg) if op == "gate" else arg]
                                           for op, arg in self.ops]}


IDENTITY = SearchUnitary("identity")


def phase_separator(view: FeasibleSubspaceView, gamma: float) -> SearchUnitary:
    return SearchUnitary("phase", (("phase", float(gamma)),), view)


def transverse_mixer(beta: float) -> SearchUnitary:
    return SearchUnitary("mixer", (("mixer", float(beta)),))


def grover_mixer(view: FeasibleSubspaceView, beta: float) -> SearchUnitary:
    if view.size == 0:
        raise StateError("Grover mixer needs a non-empty feasible set")
    return SearchUnitary("grover", (("grover", float(beta)),), view)


def local_circuit(gates: Sequence[Sequence]) -> SearchUnitary:
    ops = []
    for g in gates:
        name = str(g[0]).lower()
        if name not in ("rx", "ry", "rz", "h", "x", "s", "cnot", "cx"):
            raise StateError(f"unknown gate {g[0]!r}")
        args = tuple(float(a) if name in ("rx", "ry", "rz") and i == 1 else int(a)
                     for i, a in enumerate(g[1:]))
        ops.append(("gate", (name,) + args))
    return SearchUnitary("local", tuple(ops))


def prepare_initial(instance: CcopInstance | FeasibleSubspaceView, mode: str = "uniform_feasible",
                    b=None) -> StateVector:
    """Feasible initial state: a feasible basis state or the uniform feasible superposition.

    ``b`` may be an integer label or a bit sequence.
    """
    view = instance if isinstance(instance, FeasibleSubspaceView) else subspace_view(instance)
    if mode in ("uniform", "uniform_feasible"):
        return view.uniform_state()
    if mode in ("basis", "basis_state"):
        if b is None:
            raise StateError("basis mode needs a bit string")
        label = int(b) if np.isscalar(b) else int(bits_to_label(b))
        if not 0 <= label < 2**view.n:
            raise StateError(f"label {label} out of range")
        if not view.mask[label]:
            raise StateError(f"bit string with label {label} is infeasible")
        amps = np.zeros(2**view.n, dtype=complex)
        amps[label] = 1.0
        return StateVector(amps)
    raise StateError(f"unknown initial-state mode {mode!r}")


def apply_phase_separator(state: StateVector, instance: CcopInstance | FeasibleSubspaceView,
                          gamma: float) -> StateVector:
    cost = instance.cost if isinstance(instance, FeasibleSubspaceView) else instance.objective_table
    return StateVector(_phase(state.amplitudes, cost, gamma))


def apply_transverse_mixer(state: StateVector, beta: float) -> StateVector:
    return StateVector(_mixer(state.amplitudes, state.n_qubits, beta))


def apply_grover_mixer(state: StateVector, view: FeasibleSubspaceView, beta: float) -> StateVector:
    return StateVector(_grover(state.amplitudes, view.labels, beta))


def apply_local_circuit(state: StateVector, gates: Sequence[Sequence]) -> StateVector:
    return local_circuit(gates)(state)


# --------------------------------------------------------------------------
# families
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SearchFamily:
    unitaries: tuple[SearchUnitary, ...]
    seed: int | None = None
    spec: tuple = ()

    def __post_init__(self):
        if not self.unitaries:
            raise StateError("a search family needs at least one unitary")
        if not self.unitaries[-1].is_identity:
            raise StateError("the last search unitary must be the identity")

    @property
    def ell(self) -> int:
        return len(self.unitaries)

    def __len__(self) -> int:
        return self.ell

    def __iter__(self):
        return iter(self.unitaries)

    def __getitem__(self, j: int) -> SearchUnitary:
        return self.unitaries[j]

    def images(self, iota: StateVector) -> np.ndarray:
        """Rows are ``U_j |iota>``; shape ``(ell, 2**n)``."""
        return np.stack([u.apply_array(iota.amplitudes) for u in self.unitaries])

    @property
    def feasibility_preserving(self) -> bool:
        return all(u.feasibility_preserving for u in self.unitaries)

    def describe(self) -> dict[str, Any]:
        return {"seed": self.seed, "spec": list(self.spec),
                "unitaries": [u.describe() for u in self.unitaries]}


def _normalize_entry(entry) -> dict:
    if isinstance(entry, str):
        return {"kind": entry}
    if isinstance(entry, dict) and "kind" in entry:
        return dict(entry)
    raise StateError(f"malformed family entry {entry!r}")


def _angle(entry: dict, key: str, rng: np.random.Generator) -> float:
    # draw unconditionally so fixing one angle does not shift later draws
    drawn = float(rng.uniform(0.0, TWO_PI))
    return float(entry[key]) if key in entry else drawn


def build_search_family(instance: CcopInstance | FeasibleSubspaceView, spec: Sequence,
                        seed: int | None = None) -> SearchFamily:
    """Build ``ell`` search unitaries from a recipe; angles uniform in [0, 2*pi).

    Recipe entries are kind names or dicts with a ``kind`` key:

    * ``identity``
    * ``phase`` / ``mixer`` / ``grover`` with optional fixed ``angle``
    * ``local``: explicit ``gates`` or ``layers`` of random RY rotations on
      every qubit followed by a CNOT chain
    * ``qaoa``: ``p`` alternating phase/mixer layers, ``mixer`` one of
      ``transverse`` or ``grover``

    An identity is appended when the recipe does not end with one.
    """
    view = instance if isinstance(instance, FeasibleSubspaceView) else subspace_view(instance)
    entries = [_normalize_entry(e) for e in spec]
    if not entries or entries[-1]["kind"] != "identity":
        entries.append({"kind": "identity"})
    rng = np.random.default_rng(seed)
    n = view.n
    unitaries = []
    for entry in entries:
        kind = entry["kind"]
        if kind == "identity":
            unitaries.append(IDENTITY)
        elif kind == "phase":
            unitaries.append(phase_separator(view, _angle(entry, "angle", rng)))
        elif kind == "mixer":
            unitaries.append(transverse_mixer(_angle(entry, "angle", rng)))
        elif kind == "grover":
            unitaries.append(grover_mixer(view, _angle(entry, "angle", rng)))
        elif kind == "local":
            if "gates" in entry:
                unitaries.append(local_circuit(entry["gates"]))
                continue
            gates: list[tuple] = []
            for _ in range(int(entry.get("layers", 1))):
                gates.extend(("ry", q, float(rng.uniform(0.0, TWO_PI))) for q in range(n))
                gates.extend(("cnot", q, q + 1) for q in range(n - 1))
            unitaries.append(local_circuit(gates))
        elif kind == "qaoa":
            mixer = entry.get("mixer", "transverse")
            if mixer not in ("transverse", "grover"):
                raise StateError(f"unknown QAOA mixer {mixer!r}")
            ops: list[tuple] = []
            for _ in range(int(entry.get("p", 1))):
                ops.append(("phase", float(rng.uniform(0.0, TWO_PI))))
                ops.append(("mixer" if mixer == "transverse" else "grover",
                            float(rng.uniform(0.0, TWO_PI))))
            unitaries.append(SearchUnitary("qaoa", tuple(ops), view))
        else:
            raise StateError(f"unknown search-unitary kind {kind!r}")
    return SearchFamily(tuple(unitaries), seed, tuple(entries))


# --------------------------------------------------------------------------
# measurement and overlaps
# --------------------------------------------------------------------------

def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_from_probabilities(probs: np.ndarray, m: int, seed) -> np.ndarray:
    if m < 1:
        raise StateError("need at least one sample")
    cdf = np.cumsum(probs)
    u = _rng(seed).random(m) * cdf[-1]
    return np.minimum(np.searchsorted(cdf, u, side="right"), probs.size - 1)


def sample_labels(state: StateVector, m: int, seed=None) -> np.ndarray:
    """``m`` i.i.d. computational-basis outcomes as integer labels."""
    return sample_from_probabilities(state.probabilities(), m, seed)


def sample_bitstrings(state: StateVector, m: int, seed=None) -> np.ndarray:
    """``m`` i.i.d. computational-basis outcomes as rows of bits, shape ``(m, n)``."""
    return label_to_bits(sample_labels(state, m, seed), state.n_qubits)


def inner_product(a: StateVector, b: StateVector) -> complex:
    if a.amplitudes.size != b.amplitudes.size:
        raise StateError("qubit counts differ")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def infeasible_weight(state: StateVector, view: FeasibleSubspaceView) -> float:
    """``<psi|(1 - P_S)|psi>``."""
    probs = state.probabilities()
    return float(min(1.0, max(0.0, probs[~view.mask].sum())))


def energy(state: StateVector, view: FeasibleSubspaceView) -> float:
    """``<psi|C|psi>``."""
    return state.expectation_diagonal(view.cost)


# --------------------------------------------------------------------------
# binary state dumps: little-endian float64 (re, im) pairs in label order
# --------------------------------------------------------------------------

def save_state(state: StateVector, path: str | Path) -> None:
    Path(path).write_bytes(state.amplitudes.astype("<c16").tobytes())


def load_state(path: str | Path) -> StateVector:
    return StateVector(np.frombuffer(Path(path).read_bytes(), dtype="<c16"))


__all__ = [
    "StateVector", "StateError", "FeasibleSubspaceView", "SearchUnitary", "SearchFamily",
    "IDENTITY", "InstanceError", "subspace_view", "prepare_initial", "apply_phase_separator",
    "apply_transverse_mixer", "apply_grover_mixer", "apply_local_circuit", "phase_separator",
    "transverse_mixer", "grover_mixer", "local_circuit", "build_search_family",
    "sample_labels", "sample_bitstrings", "inner_product", "infeasible_weight", "energy",
    "save_state", "load_state",
]

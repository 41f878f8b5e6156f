"""Classical constrained combinatorial optimization problems (CCOPs).

A CCOP is the triple ``(n, c, S)``: a bit count, an objective to minimize and
a feasible set given by a polynomial-time membership oracle. Instances here
are immutable and carry *vectorized* objective/feasibility callables that
map a bit matrix of shape ``(..., n)`` to values of shape ``(...)``.

Bit order is fixed throughout the package: bit ``i`` of a bit string is
qubit ``i`` and the least-significant bit of the computational-basis label,
``label = sum(b[i] << i)``.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Iterator, Sequence

import numpy as np

ENUMERATION_CAP = 24
_CHUNK_BITS = 18

BitsFn = Callable[[np.ndarray], np.ndarray]


class InstanceError(ValueError):
    """Raised for malformed instance definitions or contract violations."""


# --------------------------------------------------------------------------
# bit strings
# --------------------------------------------------------------------------

def label_to_bits(label, n: int) -> np.ndarray:
    """Integer label(s) to bit array(s) of shape ``(..., n)``, LSB first."""
    label = np.asarray(label, dtype=np.int64)
    return ((label[..., None] >> np.arange(n, dtype=np.int64)) & 1).astype(np.uint8)


def bits_to_label(bits) -> int | np.ndarray:
    """Bit array(s) of shape ``(..., n)`` to integer label(s)."""
    bits = np.asarray(bits, dtype=np.int64)
    weights = np.int64(1) << np.arange(bits.shape[-1], dtype=np.int64)
    out = bits @ weights
    return int(out) if np.ndim(out) == 0 else out


def all_bitstrings(n: int) -> np.ndarray:
    """All ``2**n`` bit strings in label order, shape ``(2**n, n)``."""
    return label_to_bits(np.arange(2**n, dtype=np.int64), n)


def iter_label_chunks(n: int, chunk_bits: int = _CHUNK_BITS) -> Iterator[np.ndarray]:
    size = 2**n
    step = 2 ** min(chunk_bits, n)
    for start in range(0, size, step):
        yield np.arange(start, min(start + step, size), dtype=np.int64)


# --------------------------------------------------------------------------
# instances
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CcopInstance:
    """An immutable CCOP with a strictly positive (shifted) objective.

    ``objective(b) = (raw_objective(b) + c_offset) / scale``. ``c_upper`` is
    an upper bound of the shifted objective over *all* bit strings, which
    also bounds it over the feasible set.
    """

    n: int
    raw_objective: BitsFn
    raw_feasible: BitsFn
    c_offset: float
    c_upper: float
    scale: float = 1.0
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def _check_bits(self, bits) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.shape[-1:] != (self.n,):
            raise InstanceError(
                f"bit string length {bits.shape[-1:]} does not match n={self.n}"
            )
        return bits

    def objective(self, bits) -> np.ndarray | float:
        bits = self._check_bits(bits)
        vals = (np.asarray(self.raw_objective(bits), dtype=float) + self.c_offset) / self.scale
        return float(vals) if vals.ndim == 0 else vals

    def feasible(self, bits) -> np.ndarray | int:
        bits = self._check_bits(bits)
        vals = np.asarray(self.raw_feasible(bits)).astype(bool)
        return int(vals) if vals.ndim == 0 else vals

    def objective_of_labels(self, labels) -> np.ndarray:
        return np.asarray(self.objective(label_to_bits(labels, self.n)), dtype=float)

    def feasible_of_labels(self, labels) -> np.ndarray:
        return np.asarray(self.feasible(label_to_bits(labels, self.n)), dtype=bool)

    @cached_property
    def objective_table(self) -> np.ndarray:
        """Objective values for every label; read-only."""
        _require_enumerable(self.n)
        table = np.concatenate([self.objective_of_labels(c) for c in iter_label_chunks(self.n)])
        table.setflags(write=False)
        return table

    @cached_property
    def feasible_table(self) -> np.ndarray:
        _require_enumerable(self.n)
        table = np.concatenate([self.feasible_of_labels(c) for c in iter_label_chunks(self.n)])
        table.setflags(write=False)
        return table

    @cached_property
    def feasible_labels(self) -> np.ndarray:
        labels = np.flatnonzero(self.feasible_table)
        labels.setflags(write=False)
        return labels

    def unscale(self, energy: float) -> float:
        """Map an energy in instance units back to un-shifted raw units."""
        return energy * self.scale - self.c_offset


def _require_enumerable(n: int, cap: int = ENUMERATION_CAP) -> None:
    if n > cap:
        raise InstanceError(f"n={n} exceeds the enumeration cap of {cap} bits")


def _raw_extremes(n: int, raw_objective: BitsFn) -> tuple[float, float]:
    _require_enumerable(n)
    lo, hi = math.inf, -math.inf
    for chunk in iter_label_chunks(n):
        vals = np.asarray(raw_objective(label_to_bits(chunk, n)), dtype=float)
        lo = min(lo, float(vals.min()))
        hi = max(hi, float(vals.max()))
    return lo, hi


def make_instance(
    n: int,
    raw_objective: BitsFn,
    raw_feasible: BitsFn,
    *,
    lower_bound: float | None = None,
    upper_bound: float | None = None,
    offset: float | None = None,
    name: str = "custom",
    params: dict | None = None,
) -> CcopInstance:
    """Build an instance, choosing the offset so every objective value is >= 1.

    ``lower_bound``/``upper_bound`` bound the *raw* objective over all bit
    strings; missing bounds are obtained by enumeration (desk scale only).
    An explicit ``offset`` overrides the bound-derived one but must still
    leave the objective strictly positive.
    """
    if n < 1:
        raise InstanceError("n must be positive")
    if lower_bound is None or upper_bound is None or offset is not None:
        if n <= ENUMERATION_CAP:
            lo, hi = _raw_extremes(n, raw_objective)
            lower_bound = lo if lower_bound is None else lower_bound
            upper_bound = hi if upper_bound is None else upper_bound
            if offset is not None and lo + offset <= 0:
                raise InstanceError(f"offset {offset} leaves objective value {lo + offset} <= 0")
        elif lower_bound is None or upper_bound is None:
            raise InstanceError("objective bounds are required above the enumeration cap")
    if offset is None:
        offset = 1.0 - float(lower_bound)
    c_upper = float(upper_bound) + offset
    return CcopInstance(
        n=n,
        raw_objective=raw_objective,
        raw_feasible=raw_feasible,
        c_offset=float(offset),
        c_upper=c_upper,
        name=name,
        params=dict(params or {}),
    )


def from_scalar(
    n: int,
    objective: Callable[[tuple[int, ...]], float],
    feasible: Callable[[tuple[int, ...]], bool],
    **kwargs,
) -> CcopInstance:
    """Wrap scalar per-bitstring callables (convenient, slow)."""

    def _lift(fn, dtype):
        def vec(bits):
            bits = np.asarray(bits)
            flat = bits.reshape(-1, bits.shape[-1])
            out = np.array([fn(tuple(int(x) for x in row)) for row in flat], dtype=dtype)
            return out.reshape(bits.shape[:-1])

        return vec

    return make_instance(n, _lift(objective, float), _lift(feasible, bool), **kwargs)


def knapsack(profits: Sequence[float], weights: Sequence[float], capacity: float,
             offset: float | None = None) -> CcopInstance:
    """0/1 knapsack as minimization of the negated total profit."""
    p = np.asarray(profits, dtype=float)
    w = np.asarray(weights, dtype=float)
    if p.shape != w.shape or p.ndim != 1:
        raise InstanceError("profits and weights must be equal-length vectors")
    if np.any(p < 0) or np.any(w < 0):
        raise InstanceError("profits and weights must be non-negative")

    def objective(bits):
        return -(bits @ p)

    def feasible(bits):
        return bits @ w <= capacity

    return make_instance(
        len(p), objective, feasible,
        lower_bound=-float(p.sum()), upper_bound=0.0, offset=offset,
        name="knapsack",
        params={"profits": p.tolist(), "weights": w.tolist(), "capacity": float(capacity)},
    )


def max_independent_set(n_nodes: int, edges: Sequence[tuple[int, int]],
                        offset: float | None = None) -> CcopInstance:
    """Maximum independent set as minimization of minus the set size."""
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if e.size and (e.min() < 0 or e.max() >= n_nodes):
        raise InstanceError("edge endpoint out of range")

    def objective(bits):
        return -bits.sum(axis=-1, dtype=float)

    def feasible(bits):
        if not len(e):
            return np.ones(bits.shape[:-1], dtype=bool)
        both = bits[..., e[:, 0]] & bits[..., e[:, 1]]
        return ~both.any(axis=-1)

    return make_instance(
        n_nodes, objective, feasible,
        lower_bound=-float(n_nodes), upper_bound=0.0, offset=offset,
        name="mis", params={"n_nodes": n_nodes, "edges": e.tolist()},
    )


def tsp(weights, offset: float | None = None) -> CcopInstance:
    """Traveling salesperson on ``N`` cities in the one-hot permutation encoding.

    Bit ``u * N + t`` is one when city ``u`` is visited at step ``t``. A bit
    string is feasible iff it is a permutation matrix. The objective sums
    ``w[u, v]`` over consecutive steps (cyclically) and is defined for every
    bit string, feasible or not.
    """
    w = np.array(weights, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise InstanceError("weights must be a square matrix")
    if np.any(w < 0):
        raise InstanceError("weights must be non-negative")
    n_cities = w.shape[0]
    np.fill_diagonal(w, 0.0)

    def objective(bits):
        x = bits.reshape(bits.shape[:-1] + (n_cities, n_cities)).astype(float)
        nxt = np.roll(x, -1, axis=-1)
        # sum_t sum_{u,v} x[u,t] w[u,v] x[v,t+1]
        return np.einsum("...ut,uv,...vt->...", x, w, nxt)

    def feasible(bits):
        x = bits.reshape(bits.shape[:-1] + (n_cities, n_cities))
        return np.all(x.sum(axis=-1) == 1, axis=-1) & np.all(x.sum(axis=-2) == 1, axis=-1)

    return make_instance(
        n_cities * n_cities, objective, feasible,
        lower_bound=0.0, upper_bound=n_cities * float(w.sum()), offset=offset,
        name="tsp", params={"weights": w.tolist()},
    )


def custom_table(objective: Sequence[float], feasible: Sequence[int],
                 offset: float | None = None) -> CcopInstance:
    """Instance given by explicit per-label tables (label order, LSB first)."""
    obj = np.asarray(objective, dtype=float)
    feas = np.asarray(feasible).astype(bool)
    size = obj.shape[0]
    n = int(round(math.log2(size))) if size > 0 else 0
    if size < 2 or 2**n != size or feas.shape != obj.shape:
        raise InstanceError("tables must have equal power-of-two length >= 2")

    def objective_fn(bits):
        return obj[bits_to_label(bits)]

    def feasible_fn(bits):
        return feas[bits_to_label(bits)]

    return make_instance(
        n, objective_fn, feasible_fn,
        lower_bound=float(obj.min()), upper_bound=float(obj.max()), offset=offset,
        name="custom_table",
        params={"objective": obj.tolist(), "feasible": feas.astype(int).tolist()},
    )


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------

def evaluate_objective(instance: CcopInstance, b) -> float:
    return float(instance.objective(b))


def is_feasible(instance: CcopInstance, b) -> int:
    return int(instance.feasible(b))


def soft_constrained(instance: CcopInstance, penalty: float) -> CcopInstance:
    """Penalty reformulation: unconstrained, ``c + penalty`` on infeasible strings."""
    if not penalty > 0:
        raise InstanceError("penalty must be positive")

    def objective(bits):
        feas = np.asarray(instance.feasible(bits), dtype=bool)
        return np.asarray(instance.objective(bits)) + penalty * (~feas)

    def feasible(bits):
        return np.ones(np.asarray(bits).shape[:-1], dtype=bool)

    return CcopInstance(
        n=instance.n,
        raw_objective=objective,
        raw_feasible=feasible,
        c_offset=0.0,
        c_upper=instance.c_upper + penalty,
        name=f"soft({instance.name})",
        params={"base": instance.name, "penalty": float(penalty)},
    )


def rescale_for_prop1(instance: CcopInstance) -> CcopInstance:
    """Divide the objective by ``c_upper`` so that ``0 < c(b) <= 1`` everywhere."""
    if not (math.isfinite(instance.c_upper) and instance.c_upper > 0):
        raise InstanceError("c_upper must be finite and positive")
    return dataclasses.replace(
        instance, scale=instance.scale * instance.c_upper, c_upper=1.0,
    )


@dataclass(frozen=True)
class BruteForceResult:
    optimum: float
    optimizer_labels: tuple[int, ...]
    feasible_count: int
    n: int

    @property
    def infeasible(self) -> bool:
        return self.feasible_count == 0

    @property
    def optimizers(self) -> list[tuple[int, ...]]:
        return [tuple(int(x) for x in label_to_bits(lab, self.n)) for lab in self.optimizer_labels]

    def to_dict(self) -> dict:
        return {
            "infeasible": self.infeasible,
            "optimum": None if self.infeasible else self.optimum,
            "optimizer_labels": list(self.optimizer_labels),
            "optimizers": [list(b) for b in self.optimizers],
            "feasible_count": self.feasible_count,
        }


def brute_force_optimum(instance: CcopInstance, cap: int = ENUMERATION_CAP,
                        rtol: float = 1e-12) -> BruteForceResult:
    """Exhaustive minimum over the feasible set.

    An empty feasible set gives a result with ``infeasible == True`` and
    ``optimum == inf``.
    """
    _require_enumerable(instance.n, cap)
    best = math.inf
    labels: list[int] = []
    count = 0
    for chunk in iter_label_chunks(instance.n):
        feas = instance.feasible_of_labels(chunk)
        if not feas.any():
            continue
        count += int(feas.sum())
        cand = chunk[feas]
        vals = instance.objective_of_labels(cand)
        lo = float(vals.min())
        tol = rtol * max(1.0, abs(lo), abs(best) if math.isfinite(best) else 0.0)
        if lo < best - tol:
            best = lo
            labels = cand[vals <= lo + tol].tolist()
        elif lo <= best + tol:
            labels.extend(cand[vals <= best + tol].tolist())
    return BruteForceResult(best, tuple(sorted(labels)), count, instance.n)


# --------------------------------------------------------------------------
# JSON instance files
# --------------------------------------------------------------------------

def instance_from_dict(spec: dict[str, Any]) -> CcopInstance:
    spec = dict(spec)
    kind = spec.pop("type", None)
    offset = spec.pop("offset", None)
    try:
        if kind == "knapsack":
            return knapsack(spec["profits"], spec["weights"], spec["capacity"], offset=offset)
        if kind == "mis":
            return max_independent_set(spec["n_nodes"], spec.get("edges", []), offset=offset)
        if kind == "tsp":
            return tsp(spec["weights"], offset=offset)
        if kind == "custom_table":
            return custom_table(spec["objective"], spec["feasible"], offset=offset)
    except KeyError as exc:
        raise InstanceError(f"instance of type {kind!r} is missing field {exc}") from None
    raise InstanceError(f"unknown instance type {kind!r}")


def instance_to_dict(instance: CcopInstance) -> dict[str, Any]:
    if instance.name not in {"knapsack", "mis", "tsp", "custom_table"}:
        raise InstanceError(f"instance {instance.name!r} has no file representation")
    if instance.scale != 1.0:
        raise InstanceError("rescaled instances are not serialized; save the original and set rescale")
    return {"type": instance.name, **instance.params, "offset": instance.c_offset}


def load_instance(path: str | Path) -> CcopInstance:
    with open(path) as fh:
        return instance_from_dict(json.load(fh))


def save_instance(instance: CcopInstance, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_dict(instance), fh, indent=2)

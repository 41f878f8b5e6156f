"""Experiment configuration, the iterated update loop and JSON run reports."""

from __future__ import annotations

import dataclasses
import datetime as _dt
import itertools
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .ccop import (
    ENUMERATION_CAP,
    CcopInstance,
    InstanceError,
    brute_force_optimum,
    instance_from_dict,
    load_instance,
    rescale_for_prop1,
)
from .gep import NoFeasibleDirection, default_kernel_tol, solve_gep
from .lcu import DEFAULT_RETRY_CAP, AnnihilatedState, lcu_update
from .moments import default_ridge, exact_moments, psd_repair, sampled_moments
from .simulator import (
    StateError,
    StateVector,
    build_search_family,
    energy,
    infeasible_weight,
    prepare_initial,
    sample_labels,
    subspace_view,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
_FAMILY, _MOMENTS, _LCU, _FINAL = 1, 2, 3, 4


class ConfigError(ValueError):
    pass


class RunAborted(RuntimeError):
    def __init__(self, message: str, report: dict):
        super().__init__(message)
        self.report = report


@dataclass
class ExperimentConfig:
    instance: dict = field(default_factory=lambda: {"type": "mis", "n_nodes": 3,
                                                    "edges": [[0, 1], [1, 2]]})
    rescale: bool = False
    initial: dict = field(default_factory=lambda: {"mode": "uniform_feasible"})
    family: list = field(default_factory=lambda: ["mixer", "phase", "identity"])
    estimation: str = "exact"
    samples: int = 10_000
    iterations: int = 5
    kernel_tol: float | None = None
    ridge: float | None = None
    feasibility_tol: float = 1e-9
    retry_cap: int = DEFAULT_RETRY_CAP
    final_shots: int = 256
    output: str | None = None
    master_seed: int = 0
    sweep: dict = field(default_factory=dict)
    base_dir: str = "."

    def validate(self) -> "ExperimentConfig":
        if self.estimation not in ("exact", "sampled"):
            raise ConfigError(f"estimation must be 'exact' or 'sampled', got {self.estimation!r}")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.estimation == "sampled" and self.samples < 1:
            raise ConfigError("samples must be >= 1")
        for name in ("kernel_tol", "ridge"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ConfigError(f"{name} must be positive")
        if not self.feasibility_tol > 0:
            raise ConfigError("feasibility_tol must be positive")
        if self.retry_cap < 1 or self.final_shots < 1:
            raise ConfigError("retry_cap and final_shots must be >= 1")
        if not isinstance(self.family, list) or not self.family:
            raise ConfigError("family must be a non-empty list")
        if not isinstance(self.instance, dict):
            raise ConfigError("instance must be a table")
        return self

    @classmethod
    def from_dict(cls, d: dict[str, Any], base_dir: str | Path = ".") -> "ExperimentConfig":
        d = dict(d)
        try:
            est = d.pop("estimation", {})
            tol = d.pop("tolerances", {})
            fam = d.pop("family", None)
            lcu = d.pop("lcu", {})
            rep = d.pop("report", {})
            inst = dict(d.pop("instance", cls().instance))
            kw = dict(
                instance=inst,
                rescale=bool(inst.pop("rescale", d.pop("rescale", False))),
                initial=dict(d.pop("initial", {"mode": "uniform_feasible"})),
                estimation=str(est.get("mode", "exact")),
                samples=int(est.get("samples", 10_000)),
                iterations=int(d.pop("iterations", 5)),
                kernel_tol=tol.get("kernel_tol"),
                ridge=tol.get("ridge"),
                feasibility_tol=float(tol.get("feasibility", 1e-9)),
                retry_cap=int(lcu.get("retry_cap", DEFAULT_RETRY_CAP)),
                final_shots=int(rep.get("final_shots", 256)),
                output=d.pop("output", None),
                master_seed=int(d.pop("master_seed", 0)),
                sweep=dict(d.pop("sweep", {})),
                base_dir=str(base_dir),
            )
            if fam is not None:
                kw["family"] = list(fam["kinds"] if isinstance(fam, dict) else fam)
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"malformed config: {exc}") from None
        if d:
            raise ConfigError(f"unknown config keys: {sorted(d)}")
        return cls(**kw).validate()

    @classmethod
    def from_toml(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = tomllib.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML: {exc}") from None
        return cls.from_dict(data, base_dir=path.parent)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d.pop("base_dir")
        return d

    def build_instance(self) -> CcopInstance:
        spec = dict(self.instance)
        try:
            if "file" in spec:
                inst = load_instance(Path(self.base_dir) / spec["file"])
            else:
                inst = instance_from_dict(spec)
        except (InstanceError, OSError) as exc:
            raise ConfigError(f"instance: {exc}") from None
        return rescale_for_prop1(inst) if self.rescale else inst


def derive_seed(master: int, *path: int) -> int:
    return int(np.random.default_rng([int(master), *path]).integers(2**63 - 1))


def _initial_state(config: ExperimentConfig, view) -> StateVector:
    spec = config.initial
    mode = spec.get("mode", "uniform_feasible")
    try:
        if mode == "first_feasible":
            if view.size == 0:
                raise StateError("feasible set is empty")
            return prepare_initial(view, "basis", int(view.labels[0]))
        if mode in ("basis", "basis_state"):
            b = spec.get("label", spec.get("bits"))
            return prepare_initial(view, "basis", b)
        return prepare_initial(view, mode)
    except StateError as exc:
        raise ConfigError(f"initial state: {exc}") from None


@dataclass
class IterationRecord:
    iteration: int
    lambda0: float
    energy_before: float
    energy_after: float
    infeasible_weight: float
    l1_norm: float
    success_probability: float
    attempts: int
    fallback: bool
    alpha: list
    diagnostics: dict

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def _clean(obj):
    """Recursively convert numpy scalars/arrays so ``json`` can encode the report."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _baseline(instance: CcopInstance) -> dict | None:
    if instance.n > ENUMERATION_CAP:
        return None
    return brute_force_optimum(instance).to_dict()


def _meta() -> dict:
    return {"timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(), "version": __version__}


def report_json(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, sort_keys=True)


def write_report(report: dict, path: str | Path | None) -> None:
    if path:
        Path(path).write_text(report_json(report) + "\n")


def run_qcp(config: ExperimentConfig, write: bool = True) -> dict:
    """Iterate: fresh family, moments, GEP, LCU; the post-selected state seeds the next round.

    Raises :class:`RunAborted` (carrying the partial report) when no feasible
    direction exists or the LCU annihilates the state.
    """
    config.validate()
    instance = config.build_instance()
    view = subspace_view(instance)
    iota = _initial_state(config, view)
    kernel_tol = config.kernel_tol
    records: list[IterationRecord] = []
    status, reason = "ok", None
    report: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "command": "run",
        "config": config.to_dict(),
        "instance": {"name": instance.name, "n": instance.n, "c_offset": instance.c_offset,
                     "c_upper": instance.c_upper, "scale": instance.scale,
                     "feasible_count": view.size},
        "initial": {"energy": energy(iota, view), "infeasible_weight": infeasible_weight(iota, view)},
    }

    for k in range(config.iterations):
        family = build_search_family(view, config.family, derive_seed(config.master_seed, k, _FAMILY))
        e_before = energy(iota, view)
        if config.estimation == "exact":
            M = exact_moments(iota, family, view)
            ridge = config.ridge or 0.0
            if ridge:
                M = psd_repair(M, ridge)
        else:
            M = sampled_moments(iota, family, view, config.samples,
                                derive_seed(config.master_seed, k, _MOMENTS))
            ridge = default_ridge(config.samples) if config.ridge is None else config.ridge
            M = psd_repair(M, ridge)
        try:
            sol = solve_gep(M, kernel_tol if kernel_tol is not None else default_kernel_tol(M))
            out = lcu_update(iota, family, sol.alpha0,
                             derive_seed(config.master_seed, k, _LCU), config.retry_cap)
        except (NoFeasibleDirection, AnnihilatedState) as exc:
            status, reason = "aborted", f"iteration {k}: {exc}"
            break
        post = out.post_state
        diag = dict(sol.diagnostics)
        diag["moment_min_eigenvalues"] = M.min_eigenvalues()
        diag["family"] = [u["kind"] for u in family.describe()["unitaries"]]
        records.append(IterationRecord(
            iteration=k,
            lambda0=sol.lambda0,
            energy_before=e_before,
            energy_after=energy(post, view),
            infeasible_weight=infeasible_weight(post, view),
            l1_norm=sol.l1_norm,
            success_probability=out.success_probability,
            attempts=out.attempts,
            fallback=out.fallback,
            alpha=[[float(z.real), float(z.imag)] for z in sol.alpha0],
            diagnostics=diag,
        ))
        iota = post
        if len(records) >= 2 and abs(records[-1].lambda0 - records[-2].lambda0) < 1e-10:
            break

    shots = sample_labels(iota, config.final_shots, derive_seed(config.master_seed, _FINAL))
    feasible = view.mask[shots]
    final_energy = energy(iota, view)
    baseline = _baseline(instance)
    report.update({
        "iterations": [r.to_dict() for r in records],
        "final": {
            "energy": final_energy,
            "raw_energy": instance.unscale(final_energy),
            "infeasible_weight": infeasible_weight(iota, view),
            "shots": config.final_shots,
            "sample_labels": shots.tolist(),
            "feasible_fraction": float(feasible.mean()),
            "all_samples_feasible": bool(feasible.all()),
        },
        "baseline": baseline,
        "approximation_ratio": (final_energy / baseline["optimum"]
                                if baseline and not baseline["infeasible"] else None),
        "status": status,
        "abort_reason": reason,
        "meta": _meta(),
    })
    if write:
        write_report(report, config.output)
    if status != "ok":
        raise RunAborted(reason, report)
    return report


def run_bruteforce(config: ExperimentConfig, write: bool = True) -> dict:
    instance = config.build_instance()
    try:
        result = brute_force_optimum(instance)
    except InstanceError as exc:
        raise ConfigError(str(exc)) from None
    report = {"schema_version": SCHEMA_VERSION, "command": "bruteforce",
              "instance": {"name": instance.name, "n": instance.n,
                           "c_offset": instance.c_offset, "scale": instance.scale},
              "result": result.to_dict(),
              "raw_optimum": None if result.infeasible else instance.unscale(result.optimum),
              "meta": _meta()}
    if write:
        write_report(report, config.output)
    return report


def run_moments(config: ExperimentConfig, write: bool = True) -> dict:
    """Exact and (in sampled mode) estimated moment matrices side by side."""
    instance = config.build_instance()
    view = subspace_view(instance)
    iota = _initial_state(config, view)
    family = build_search_family(view, config.family, derive_seed(config.master_seed, 0, _FAMILY))
    exact = exact_moments(iota, family, view)
    if config.estimation == "sampled":
        est = sampled_moments(iota, family, view, config.samples,
                              derive_seed(config.master_seed, 0, _MOMENTS))
    else:
        est = exact
    deltas = {name: np.abs(a - b) for name, a, b in zip("FGH", exact.as_tuple(), est.as_tuple())}
    report = {"schema_version": SCHEMA_VERSION, "command": "moments",
              "ell": family.ell, "family": family.describe(),
              "exact": exact.to_dict(), "sampled": est.to_dict(),
              "delta": {k: v.tolist() for k, v in deltas.items()},
              "max_delta": {k: float(v.max()) for k, v in deltas.items()},
              "meta": _meta()}
    if write:
        write_report(report, config.output)
    return report


def _sweep_one(args) -> dict:
    config, seed, m = args
    cfg = dataclasses.replace(config, master_seed=seed, output=None, sweep={})
    if m is not None:
        cfg.estimation, cfg.samples = "sampled", int(m)
    try:
        rep = run_qcp(cfg, write=False)
    except RunAborted as exc:
        rep = exc.report
    return {"master_seed": seed, "samples": m, "status": rep["status"],
            "final_energy": rep["final"]["energy"],
            "final_infeasible_weight": rep["final"]["infeasible_weight"],
            "lambda0": [r["lambda0"] for r in rep["iterations"]]}


def run_sweep(config: ExperimentConfig, jobs: int = 1, write: bool = True) -> dict:
    """Independent runs over ``sweep.seeds`` x ``sweep.samples``."""
    seeds = [int(s) for s in config.sweep.get("seeds", [config.master_seed])]
    samples = config.sweep.get("samples") or [None]
    tasks = [(config, s, m) for s, m in itertools.product(seeds, samples)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_sweep_one, tasks))
    else:
        runs = [_sweep_one(t) for t in tasks]
    report = {"schema_version": SCHEMA_VERSION, "command": "sweep",
              "config": config.to_dict(), "runs": runs, "meta": _meta()}
    if write:
        write_report(report, config.output)
    return report

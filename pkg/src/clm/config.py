"""Experiment configuration: a YAML tree resolved into problems and run settings.

Schema (every key optional unless noted; defaults are filled in by
:func:`resolve` and echoed back verbatim in ``summary.json``)::

    name: eq10                   # label, also the default output sub-directory
    seed: 0                      # seeds both the initial ensemble and renumbering
    problem:                     # required; the cost reported and polished
      name: multimodal10         # see PROBLEMS
      params: {n: 10}
      offset: 0.0                # constant added during CLM (delta)
    phases:                      # optional sequence of CLM runs; the final
      - problem: {...}           # ensemble of one seeds the next (multipliers
        max_windows: 200         # reset).  Defaults to one phase on `problem`.
    init:
      kind: uniform              # gaussian | uniform | states
      sigma: 0.1                 # gaussian
      low: -20.0                 # uniform
      high: 20.0
      states: [[3.0], [-3.0]]    # states: one row per member
    clm:
      q: 20
      delta_t: 1.0
      max_windows: 300
      stop_sync_tol: 1.0e-6
      abs_tol: 1.0e-2
      rel_tol: 1.0e-2
    schedule: {gamma_lo: .., gamma_hi: .., eta_lo: .., eta_hi: .., alpha: ..,
               u_star: .., renumber_period: .., renumber_fraction: ..,
               gamma_fixed: null, eta_fixed: null}
    polish: {enabled: true, members: best, grad_tol: 1.0e-8, max_iter: 2000}
    baselines: {multistart: true, quasi_newton: true, grad_tol: 1.0e-6,
                max_iter: 5000}
    output: {dir: null}
"""
from __future__ import annotations

import copy
import json
import re
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List

import numpy as np
import yaml

from .core import ConfigurationError, EnsembleState, Problem
from .integrate import CLMConfig
from .io import read_dataset_csv
from .problems import (
    InitialPrior,
    MLPShape,
    double_well_problem,
    gen_sine_dataset,
    lj_problem,
    mlp_problem,
    multimodal10_problem,
    offset_cost,
    quadratic_problem,
    rosenbrock_problem,
    sample_initial_states,
    sample_uniform_states,
)
from .schedule import ScheduleConfig

PRESET_DIR = Path(__file__).parent / "presets"


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e3``/``1.0e3`` as floats (YAML 1.2 style)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
    |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
    |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
    |[-+]?\.(?:inf|Inf|INF)
    |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."),
)


def _build_mlp(hidden_units=10, input_dim=1, mu=0.0, zeta=1.0, dataset=None):
    shape = MLPShape(input_dim=int(input_dim), hidden_units=int(hidden_units))
    return mlp_problem(shape, load_dataset(dataset or {}), mu=float(mu), zeta=float(zeta))


def load_dataset(spec):
    """Dataset from ``{path: file.csv}`` or ``{n_points, noise_std, seed}``."""
    if spec.get("path"):
        return read_dataset_csv(spec["path"])
    return gen_sine_dataset(
        int(spec.get("n_points", 20)), float(spec.get("noise_std", 0.4)), int(spec.get("seed", 0))
    )


# name -> (builder, default params).  Builders take the params as keywords.
PROBLEMS = {
    "double_well": (double_well_problem, {}),
    "multimodal10": (multimodal10_problem, {"n": 10, "a": 0.01, "w1": 0.2, "w2": 1.0}),
    "lj": (lj_problem, {"n_atoms": 13, "mu": 0.0, "nu": 6}),
    "lj_shifted": (lj_problem, {"n_atoms": 13, "mu": 0.1, "nu": 3}),
    "quadratic": (quadratic_problem, {"n": 2, "scale": 0.5}),
    "rosenbrock": (rosenbrock_problem, {}),
    "mlp": (
        _build_mlp,
        {"hidden_units": 10, "input_dim": 1, "mu": 0.0, "zeta": 1.0,
         "dataset": {"path": None, "n_points": 20, "noise_std": 0.4, "seed": 0}},
    ),
}

DEFAULTS: Dict[str, Any] = {
    "name": "run",
    "seed": 0,
    "phases": None,
    "init": {"kind": "gaussian", "sigma": 0.1, "low": -1.0, "high": 1.0, "states": None},
    "clm": {"q": 20, "delta_t": 0.1, "max_windows": 1000, "stop_sync_tol": 1e-6,
            "abs_tol": 1e-2, "rel_tol": 1e-2},
    "schedule": asdict(ScheduleConfig()),
    "polish": {"enabled": True, "members": "best", "grad_tol": 1e-8, "max_iter": 2000},
    "baselines": {"multistart": True, "quasi_newton": True, "grad_tol": 1e-6, "max_iter": 5000},
    "output": {"dir": None},
}


def _merge(base, over, where):
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if k not in base:
            raise ConfigurationError(f"unknown key {where}{k!r}")
        if isinstance(base[k], dict) and base[k] and v is not None:
            if not isinstance(v, dict):
                raise ConfigurationError(f"{where}{k} must be a mapping")
            out[k] = _merge(base[k], v, f"{where}{k}.")
        else:
            out[k] = copy.deepcopy(v)
    return out


def _resolve_problem(spec, where):
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigurationError(f"{where} needs a 'name'")
    name = spec["name"]
    if name not in PROBLEMS:
        raise ConfigurationError(f"{where}: unknown problem {name!r}; known: {sorted(PROBLEMS)}")
    extra = set(spec) - {"name", "params", "offset"}
    if extra:
        raise ConfigurationError(f"{where}: unknown keys {sorted(extra)}")
    params = _merge(PROBLEMS[name][1], spec.get("params"), f"{where}.params.")
    return {"name": name, "params": params, "offset": float(spec.get("offset", 0.0))}


def resolve(raw: Dict[str, Any]) -> Dict[str, Any]:
    """Fill defaults and validate; the result is what ``summary.json`` echoes."""
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a mapping")
    raw = dict(raw)
    if "problem" not in raw:
        raise ConfigurationError("config needs a 'problem' section")
    problem = raw.pop("problem")
    cfg = _merge(DEFAULTS, raw, "")
    cfg["problem"] = _resolve_problem(problem, "problem")
    if cfg["phases"] is not None:
        phases = []
        for k, ph in enumerate(cfg["phases"]):
            if not isinstance(ph, dict) or "problem" not in ph:
                raise ConfigurationError(f"phases[{k}] needs a 'problem'")
            extra = set(ph) - {"problem", "max_windows"}
            if extra:
                raise ConfigurationError(f"phases[{k}]: unknown keys {sorted(extra)}")
            phases.append({
                "problem": _resolve_problem(ph["problem"], f"phases[{k}].problem"),
                "max_windows": int(ph.get("max_windows", cfg["clm"]["max_windows"])),
            })
        if not phases:
            raise ConfigurationError("phases must not be empty")
        cfg["phases"] = phases
    if cfg["polish"]["members"] not in ("best", "all"):
        raise ConfigurationError("polish.members must be 'best' or 'all'")
    if cfg["init"]["kind"] not in ("gaussian", "uniform", "states"):
        raise ConfigurationError("init.kind must be gaussian, uniform or states")
    # build everything once so bad values surface now, not mid-run
    try:
        exp = ExperimentConfig.from_resolved(cfg)
        exp.target_problem()
        exp.phase_problems()
        exp.initial_ensemble(exp.seed)
    except ConfigurationError:
        raise
    except (TypeError, ValueError, KeyError, OSError) as exc:
        raise ConfigurationError(f"{type(exc).__name__}: {exc}") from exc
    return cfg


def build_problem(spec) -> Problem:
    builder, _ = PROBLEMS[spec["name"]]
    try:
        p = builder(**spec["params"])
    except TypeError as exc:
        raise ConfigurationError(f"problem {spec['name']}: {exc}") from exc
    if spec.get("offset"):
        p = offset_cost(p, spec["offset"])
    return p


@dataclass
class ExperimentConfig:
    """A resolved config plus helpers to build the objects it describes."""

    raw: Dict[str, Any]
    clm: CLMConfig = None
    seed: int = 0

    @classmethod
    def from_resolved(cls, cfg):
        c = cfg["clm"]
        try:
            sched = ScheduleConfig(**cfg["schedule"])
        except TypeError as exc:
            raise ConfigurationError(f"schedule: {exc}") from exc
        try:
            clm = CLMConfig(
                q=int(c["q"]), delta_t=float(c["delta_t"]), schedule=sched,
                integrator_abs_tol=float(c["abs_tol"]), integrator_rel_tol=float(c["rel_tol"]),
                max_windows=int(c["max_windows"]), stop_sync_tol=float(c["stop_sync_tol"]),
                seed=int(cfg["seed"]),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"clm: {exc}") from exc
        return cls(raw=cfg, clm=clm, seed=int(cfg["seed"]))

    @property
    def name(self):
        return self.raw["name"]

    def target_problem(self) -> Problem:
        """The problem without offset: what is reported and polished."""
        spec = dict(self.raw["problem"], offset=0.0)
        return build_problem(spec)

    def phase_problems(self) -> List[tuple]:
        """``[(problem, max_windows), ...]`` in run order."""
        if self.raw["phases"] is None:
            return [(build_problem(self.raw["problem"]), self.clm.max_windows)]
        return [(build_problem(ph["problem"]), ph["max_windows"]) for ph in self.raw["phases"]]

    def initial_ensemble(self, seed) -> EnsembleState:
        init, q = self.raw["init"], self.clm.q
        n = self.target_problem().dim
        rng = np.random.default_rng([int(seed), 1])
        if init["kind"] == "gaussian":
            return sample_initial_states(InitialPrior(float(init["sigma"])), q, n, rng)
        if init["kind"] == "uniform":
            return sample_uniform_states(float(init["low"]), float(init["high"]), q, n, rng)
        states = np.asarray(init["states"], dtype=float)
        if states.shape != (q, n):
            raise ConfigurationError(f"init.states has shape {states.shape}, expected {(q, n)}")
        return EnsembleState.from_states(states)

    def with_seed(self, seed) -> "ExperimentConfig":
        cfg = copy.deepcopy(self.raw)
        cfg["seed"] = int(seed)
        return ExperimentConfig.from_resolved(cfg)


def list_presets():
    return sorted(p.stem for p in PRESET_DIR.glob("*.yaml"))


def load_raw(path_or_preset) -> Dict[str, Any]:
    """Read a YAML/JSON config, a ``summary.json`` (its echo), or a preset name."""
    path = Path(path_or_preset)
    if not path.exists():
        preset = PRESET_DIR / f"{path_or_preset}.yaml"
        if not preset.exists():
            raise ConfigurationError(
                f"no such config file or preset: {path_or_preset} (presets: {', '.join(list_presets())})"
            )
        path = preset
    try:
        data = yaml.load(path.read_text(), Loader=_Loader)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    if isinstance(data, dict) and "config" in data and "problem" not in data:
        data = data["config"]
    return data


def load_config(path_or_preset) -> ExperimentConfig:
    return ExperimentConfig.from_resolved(resolve(load_raw(path_or_preset)))


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)

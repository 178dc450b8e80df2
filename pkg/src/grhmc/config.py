"""Experiment configuration: YAML schema, presets, and target construction.

A config file is a single YAML mapping; every key is optional except the
target and method (which the CLI can also supply). Example:

    name: g2-vari
    method: VARI            # VARI | ISG | MCT | NONE
    replicas: 4
    seed: 1
    target:
      kind: gaussian        # or a shortcut id such as G2, NG1, F2, BLR1
      mu: [0.0, 0.0]
      sigma: [[10.0, 5.0], [5.0, 1000.0]]
    sampling:
      t_sample: 10000.0
      n_samples: 5000
    burnin:
      t_scale: 3000.0       # scale-tuning duration
      t_rate: 0.0           # rate-tuning duration (constant-rate policy)
      rate_initial: 0.2
      mct:                  # optional overrides of the two-stage schedule
        stage_ratio: 0.2
        c_burn: 0.05
        grid_spacing: 1.0
    integrator:
      abs_tol: 1.0e-6
      rel_tol: 1.0e-6
    output: results/g2-vari
    parallel: 2

Presets bundle the run-size parameters: ``desk`` for minutes-scale runs
and ``paper`` for the full-size protocol (10 replicas, 100000 time units,
50000 samples each, 6000 + 5000 burn-in).
"""
from __future__ import annotations


from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .datasets import bundled_dataset_path, load_csv_dataset
from .targets import (
    GaussianSpec,
    TargetModel,
    make_bimodal,
    make_funnel,
    make_gaussian,
    make_logistic,
    make_smiley,
    make_student_t,
)
from .tuning import MctSchedule

PRESETS: dict[str, dict] = {
    "desk": {
        "replicas": 4,
        "t_sample": 10000.0,
        "n_samples": 5000,
        "t_scale": 3000.0,
        "t_rate": 0.0,
    },
    "paper": {
        "replicas": 10,
        "t_sample": 100000.0,
        "n_samples": 50000,
        "t_scale": 6000.0,
        "t_rate": 5000.0,
    },
}

# Benchmark targets used by the bundled suite, keyed by shortcut id.
TARGET_SHORTCUTS: dict[str, dict] = {
    "G1": {"kind": "gaussian", "mu": [1.0, 2.0], "sigma": [[4.0, 0.5], [0.5, 9.0]]},
    "G2": {"kind": "gaussian", "mu": [0.0, 0.0], "sigma": [[10.0, 5.0], [5.0, 1000.0]]},
    "G3": {"kind": "gaussian", "mu": [0.0, 0.0], "sigma": [[1.0, 0.95], [0.95, 1.0]]},
    "G4": {"kind": "standard_normal", "dim": 10},
    "NG1": {"kind": "student_t", "mu": [1.0, 2.0], "sigma": [[4.0, 2.0], [2.0, 9.0]], "nu": 4.0},
    "NG2": {"kind": "smiley"},
    "NG3": {"kind": "bimodal"},
    "F1": {"kind": "funnel", "omega": 1.5},
    "F2": {"kind": "funnel", "omega": 2.0},
    "BLR1": {"kind": "logistic", "dataset": "pima", "response": "type"},
    "BLR2": {"kind": "logistic", "dataset": "german_credit", "response": "bad_credit"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved settings for one (target, method) experiment."""

    name: str
    method: str
    target: dict
    replicas: int = 10
    t_sample: float = 100000.0
    n_samples: int = 50000
    t_scale: float = 6000.0
    t_rate: float = 5000.0
    rate_initial: float = 0.2
    abs_tol: float = 1e-6
    rel_tol: float = 1e-6
    seed: int = 0
    out_dir: Optional[str] = None
    parallel: int = 1
    mct: dict = field(default_factory=dict)
    max_table_coordinates: int = 2

    def __post_init__(self):
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if self.n_samples < 1 or self.t_sample <= 0:
            raise ValueError("sampling needs positive duration and count")
        if self.method.upper() not in ("VARI", "ISG", "MCT", "NONE"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.n_samples * self.sample_spacing > self.t_sample * (1 + 1e-12):
            raise ValueError("samples do not fit in the sampling window")

    @property
    def sample_spacing(self) -> float:
        return self.t_sample / self.n_samples

    def mct_schedule(self) -> MctSchedule:
        opts = dict(self.mct)
        ratio = opts.pop("stage_ratio", 0.2)
        return MctSchedule.from_total(self.t_scale, stage_ratio=ratio, **opts)


def build_target(spec) -> TargetModel:
    """Construct a target from a spec mapping or shortcut id."""
    if isinstance(spec, str):
        spec = {"kind": spec}
    spec = dict(spec)
    kind = spec.pop("kind")
    if kind in TARGET_SHORTCUTS:
        merged = dict(TARGET_SHORTCUTS[kind])
        merged.update(spec)
        spec = merged
        name = kind
        kind = spec.pop("kind")
    else:
        name = spec.pop("name", kind)

    if kind == "gaussian":
        return make_gaussian(
            GaussianSpec(np.asarray(spec["mu"], float), np.asarray(spec["sigma"], float)),
            name=name,
        )
    if kind == "standard_normal":
        d = int(spec.get("dim", 1))
        return make_gaussian(GaussianSpec(np.zeros(d), np.eye(d)), name=name)
    if kind == "student_t":
        return make_student_t(spec["mu"], spec["sigma"], float(spec["nu"]), name=name)
    if kind == "smiley":
        return make_smiley(name=name)
    if kind == "bimodal":
        return make_bimodal(name=name)
    if kind == "funnel":
        return make_funnel(float(spec["omega"]), name=name)
    if kind == "logistic":
        dataset = spec["dataset"]
        path = Path(dataset)
        if not path.exists():
            path = bundled_dataset_path(dataset)
        data = load_csv_dataset(
            path,
            response_column=spec["response"],
            standardize=bool(spec.get("standardize", True)),
            prior_variance=float(spec.get("prior_variance", 100.0)),
        )
        return make_logistic(data, name=name)
    raise ValueError(f"unknown target kind {kind!r}")


def _flatten_file(doc: dict) -> dict:
    """Map the nested YAML document onto ExperimentConfig fields."""
    flat: dict = {}
    for key in ("name", "method", "target", "replicas", "seed", "parallel",
                "max_table_coordinates"):
        if key in doc:
            flat[key] = doc[key]
    if "output" in doc:
        flat["out_dir"] = doc["output"]
    sampling = doc.get("sampling", {})
    if "t_sample" in sampling:
        flat["t_sample"] = float(sampling["t_sample"])
    if "n_samples" in sampling:
        flat["n_samples"] = int(sampling["n_samples"])
    burnin = doc.get("burnin", {})
    for src, dst in (("t_scale", "t_scale"), ("t_rate", "t_rate"), ("rate_initial", "rate_initial")):
        if src in burnin:
            flat[dst] = float(burnin[src])
    if "mct" in burnin:
        flat["mct"] = dict(burnin["mct"])
    integrator = doc.get("integrator", {})
    if "abs_tol" in integrator:
        flat["abs_tol"] = float(integrator["abs_tol"])
    if "rel_tol" in integrator:
        flat["rel_tol"] = float(integrator["rel_tol"])
    return flat


def resolve_config(
    doc: dict,
    preset: Optional[str] = None,
    overrides: Optional[dict] = None,
) -> ExperimentConfig:
    """Layer preset defaults, the config document, and CLI overrides."""
    merged: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ValueError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        merged.update(PRESETS[preset])
    merged.update(_flatten_file(doc))
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    if "target" not in merged:
        raise ValueError("config must specify a target")
    if "method" not in merged:
        raise ValueError("config must specify a method")
    merged.setdefault("name", _default_name(merged))
    return ExperimentConfig(**merged)


def _default_name(merged: dict) -> str:
    target = merged["target"]
    if isinstance(target, str):
        base = target
    else:
        base = target.get("kind", "experiment")
    return f"{base}-{merged['method']}".lower()


def load_config(path, preset: Optional[str] = None, overrides: Optional[dict] = None) -> ExperimentConfig:
    doc = yaml.safe_load(Path(path).read_text())
    if not isinstance(doc, dict):
        raise ValueError("config file must contain a YAML mapping")
    return resolve_config(doc, preset=preset, overrides=overrides)


@dataclass(frozen=True)
class SuiteEntry:
    target: dict | str
    methods: tuple[str, ...]
    label: str


@dataclass(frozen=True)
class SuiteConfig:
    name: str
    entries: tuple[SuiteEntry, ...]
    base: dict


def load_suite(path, preset: Optional[str] = None, overrides: Optional[dict] = None) -> SuiteConfig:
    """Read a suite file: shared settings plus a list of target/method entries."""
    doc = yaml.safe_load(Path(path).read_text())
    if not isinstance(doc, dict) or "suite" not in doc:
        raise ValueError("suite file must contain a 'suite' list")
    base: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ValueError(f"unknown preset {preset!r}")
        base.update(PRESETS[preset])
    base.update(_flatten_file(doc))
    for key, value in (overrides or {}).items():
        if value is not None:
            base[key] = value
    entries = []
    for item in doc["suite"]:
        if isinstance(item, str):
            item = {"target": item}
        target = item["target"]
        label = item.get("label") or (target if isinstance(target, str) else target.get("kind"))
        methods = tuple(m.upper() for m in item.get("methods", ("VARI", "ISG", "MCT")))
        entries.append(SuiteEntry(target=target, methods=methods, label=str(label)))
    return SuiteConfig(
        name=doc.get("name", Path(path).stem),
        entries=tuple(entries),
        base=base,
    )

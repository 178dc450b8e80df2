"""Experiment orchestration: replica execution, aggregation, table output.

Replicas are independent chains seeded ``base_seed + replica_index``; they
may run in a process pool, and aggregation is performed in replica order so
results are identical whether or not the pool is used.
"""
from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .config import ExperimentConfig, SuiteConfig, build_target
from .diagnostics import EssReport, SummaryRow, summarize
from .ode import IntegratorConfig
from .process import ChainOutput, ProcessConfig, simulate_chain
from .tuning import make_tuner

__all__ = ["ExperimentResult", "run_experiment", "run_suite", "run_replica"]


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    outputs: list[ChainOutput]
    report: EssReport
    rows: list[SummaryRow]

    @property
    def combined_samples(self) -> np.ndarray:
        return np.concatenate([o.samples for o in self.outputs], axis=0)


def run_replica(config: ExperimentConfig, index: int) -> ChainOutput:
    """Run one replica of the experiment; independent of all other replicas."""
    target = build_target(config.target)
    method = config.method.upper()
    tuner = make_tuner(
        method,
        t_scale=config.t_scale,
        mct=config.mct_schedule() if method == "MCT" else None,
    )
    pcfg = ProcessConfig(
        rate_initial=config.rate_initial,
        sample_spacing=config.sample_spacing,
        t_sample=config.t_sample,
        t_rate_tuning=config.t_rate,
        seed=config.seed + index,
    )
    icfg = IntegratorConfig(abs_tol=config.abs_tol, rel_tol=config.rel_tol)
    return simulate_chain(target, tuner, pcfg, icfg)


def _replica_star(args) -> ChainOutput:
    return run_replica(*args)


def run_experiment(config: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Run all replicas, aggregate diagnostics, and optionally write outputs."""
    jobs = [(config, i) for i in range(config.replicas)]
    if config.parallel > 1 and config.replicas > 1:
        with ProcessPoolExecutor(max_workers=min(config.parallel, config.replicas)) as pool:
            outputs = list(pool.map(_replica_star, jobs))
    else:
        outputs = [run_replica(*job) for job in jobs]

    if config.replicas >= 2:
        report, rows = summarize(outputs, max_coordinates=config.max_table_coordinates)
    else:
        report, rows = None, []

    result = ExperimentResult(config=config, outputs=outputs, report=report, rows=rows)
    if write and config.out_dir is not None:
        write_experiment(result, Path(config.out_dir))
    return result


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def experiment_table_csv(result: ExperimentResult) -> str:
    lines = ["coordinate,ess,mean_s,sd_s,efficiency,posterior_mean,posterior_sd"]
    for r in result.rows:
        lines.append(
            ",".join(
                [
                    r.coordinate,
                    _fmt(r.ess),
                    _fmt(r.mean_s),
                    _fmt(r.sd_s),
                    _fmt(r.efficiency),
                    _fmt(r.posterior_mean),
                    _fmt(r.posterior_sd),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def experiment_table_text(result: ExperimentResult) -> str:
    header = (
        f"{'coordinate':<12}{'ESS':>12}{'mean(S)':>12}{'SD(S)':>12}"
        f"{'eff':>10}{'post.mean':>12}{'post.SD':>12}"
    )
    lines = [
        f"experiment: {result.config.name} (method {result.config.method.upper()}, "
        f"{result.config.replicas} replicas, N_ode {result.report.n_ode_total})",
        header,
        "-" * len(header),
    ]
    for r in result.rows:
        lines.append(
            f"{r.coordinate:<12}{r.ess:>12.0f}{r.mean_s:>12.4g}{r.sd_s:>12.3g}"
            f"{r.efficiency:>10.4g}{r.posterior_mean:>12.4g}{r.posterior_sd:>12.4g}"
        )
    return "\n".join(lines) + "\n"


def write_experiment(result: ExperimentResult, out_dir: Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, chain in enumerate(result.outputs):
        chain.save(out_dir, stem=f"replica_{i:02d}")
    (out_dir / "table.csv").write_text(experiment_table_csv(result))
    (out_dir / "table.txt").write_text(experiment_table_text(result))
    meta = {
        "name": result.config.name,
        "method": result.config.method.upper(),
        "replicas": result.config.replicas,
        "seed": result.config.seed,
        "n_ode_total": result.report.n_ode_total if result.report else None,
        "n_ode_per_replica": [o.n_ode for o in result.outputs],
        "final_S_per_replica": [o.S.tolist() for o in result.outputs],
        "final_rate_per_replica": [o.rate for o in result.outputs],
    }
    (out_dir / "result.json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def suite_comparison_csv(label: str, per_method: dict[str, ExperimentResult]) -> str:
    methods = list(per_method)
    cols = ["coordinate"]
    for m in methods:
        cols += [f"ess_{m}", f"mean_s_{m}", f"sd_s_{m}", f"eff_{m}"]
    lines = [",".join(cols)]
    coords = [r.coordinate for r in next(iter(per_method.values())).rows]
    for idx, coord in enumerate(coords):
        cells = [coord]
        for m in methods:
            r = per_method[m].rows[idx]
            cells += [_fmt(r.ess), _fmt(r.mean_s), _fmt(r.sd_s), _fmt(r.efficiency)]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def suite_comparison_text(label: str, per_method: dict[str, ExperimentResult]) -> str:
    methods = list(per_method)
    lines = [f"target: {label}"]
    header = f"{'coordinate':<12}" + "".join(
        f"{m + ' ESS':>14}{m + ' S':>18}{m + ' eff':>12}" for m in methods
    )
    lines += [header, "-" * len(header)]
    coords = [r.coordinate for r in next(iter(per_method.values())).rows]
    for idx, coord in enumerate(coords):
        cells = f"{coord:<12}"
        for m in methods:
            r = per_method[m].rows[idx]
            s_part = f"{r.mean_s:.4g} ({r.sd_s:.3g})"
            cells += f"{r.ess:>14.0f}{s_part:>18}{r.efficiency:>12.4g}"
        lines.append(cells)
    return "\n".join(lines) + "\n"


def run_suite(
    suite: SuiteConfig,
    out_dir: Optional[Path] = None,
    write: bool = True,
) -> dict[str, dict[str, ExperimentResult]]:
    """Run every (target, method) pair; failures are isolated per experiment.

    Returns results keyed by target label, then method. Writes one
    comparison table per target mirroring the benchmark layout.
    """
    out_dir = Path(out_dir) if out_dir is not None else None
    all_results: dict[str, dict[str, ExperimentResult]] = {}
    failures: list[tuple[str, str, Exception]] = []
    for entry in suite.entries:
        per_method: dict[str, ExperimentResult] = {}
        for method in entry.methods:
            merged = dict(suite.base)
            merged["target"] = entry.target
            merged["method"] = method
            merged["name"] = f"{entry.label}-{method}".lower()
            if out_dir is not None:
                merged["out_dir"] = str(out_dir / merged["name"])
            cfg = ExperimentConfig(**merged)
            try:
                per_method[method] = run_experiment(cfg, write=write)
            except Exception as exc:  # keep remaining experiments running
                failures.append((entry.label, method, exc))
        if per_method:
            all_results[entry.label] = per_method
            if write and out_dir is not None:
                out_dir.mkdir(parents=True, exist_ok=True)
                (out_dir / f"comparison_{entry.label}.csv").write_text(
                    suite_comparison_csv(entry.label, per_method)
                )
                (out_dir / f"comparison_{entry.label}.txt").write_text(
                    suite_comparison_text(entry.label, per_method)
                )
    if failures:
        summary = "; ".join(f"{t}/{m}: {e}" for t, m, e in failures)
        print(f"warning: {len(failures)} experiment(s) failed: {summary}")
    return all_results

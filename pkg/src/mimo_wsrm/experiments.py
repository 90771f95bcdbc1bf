"""Seeded experiment runners that write plot-ready CSV files.

* :func:`run_convergence_experiment` -- weighted sum-rate trajectories for IA
  and random initialisation, one file per (seed, mode), plus a summary.
* :func:`run_power_sweep` -- converged sum-rate (unit weights) against the
  per-cell power budget, averaged over seeds.
* :func:`run_single` -- one run with every trace the library can emit.

Runs are independent; with ``workers > 1`` they execute in a process pool,
and results are always collected in submission order so output files do not
depend on scheduling.
"""

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from .channel_model import SystemConfig, generate_channels, write_channels
from .coordinator import INIT_MODES, run, trajectory_rows, write_trajectory
from .exceptions import ConfigError
from .ia_phase import write_leakage_trace
from .rate_engine import weighted_sum_rate, write_rate_report
from .subproblem import SolverOptions, write_solver_trace

__all__ = [
    "PRESETS",
    "DEFAULT_SWEEP_DBW",
    "ExperimentSpec",
    "ExperimentOutput",
    "run_convergence_experiment",
    "run_power_sweep",
    "run_single",
    "run_experiment",
]

PRESETS = ("convergence", "power_sweep", "single_run")
DEFAULT_SWEEP_DBW = (5.0, 10.0, 15.0, 20.0, 25.0, 30.0)

SUMMARY_HEADER = ["seed", "mode", "converged", "iterations", "initial_wsr", "final_wsr", "messages"]
SWEEP_HEADER = ["power_dbw", "mode", "mean_sumrate", "stderr"]
SWEEP_RUNS_HEADER = ["power_dbw", "mode", "seed", "sumrate", "converged", "iterations"]


@dataclass
class ExperimentSpec:
    preset: str = "single_run"
    config: SystemConfig = field(default_factory=SystemConfig)
    powers_dbw: Sequence[float] = DEFAULT_SWEEP_DBW
    seeds: Sequence[int] = (0,)
    modes: Sequence[str] = INIT_MODES
    out_dir: str = "results"
    solver: SolverOptions = field(default_factory=SolverOptions)
    workers: int = 1

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; choose from {PRESETS}")
        if len(self.seeds) == 0:
            raise ConfigError("at least one seed is required")
        if self.preset == "power_sweep" and len(self.powers_dbw) == 0:
            raise ConfigError("power sweep needs at least one power value")
        bad = [m for m in self.modes if m not in INIT_MODES]
        if bad or not self.modes:
            raise ConfigError(f"init modes must be drawn from {INIT_MODES}, got {list(self.modes)}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def to_dict(self):
        return {
            "preset": self.preset,
            "config": self.config.to_dict(),
            "powers_dbw": [float(p) for p in self.powers_dbw],
            "seeds": [int(s) for s in self.seeds],
            "modes": list(self.modes),
            "out_dir": str(self.out_dir),
            "solver": asdict(self.solver),
            "workers": self.workers,
        }


@dataclass
class ExperimentOutput:
    files: List[Path]
    rows: List[dict]


def _prepare(spec):
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "config.json"
    with open(path, "w") as fh:
        json.dump(spec.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out, path


def _job(config, mode, opts):
    channels = generate_channels(config)
    state = run(channels, config, mode, opts)
    report = weighted_sum_rate(channels, state.beams, config)
    return {
        "seed": config.rng_seed,
        "mode": mode,
        "converged": state.converged,
        "iterations": state.iterations_used,
        "initial_wsr": state.initial.wsr,
        "final_wsr": state.wsr,
        "sum_rate": report.sum_rate,
        "messages": state.messages.total,
        "trajectory": trajectory_rows(state),
    }


def _map(spec, jobs: List[Tuple]):
    if spec.workers == 1 or len(jobs) <= 1:
        return [_job(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(spec.workers, os.cpu_count() or 1)) as pool:
        return list(pool.map(_job, *zip(*jobs)))


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def run_convergence_experiment(spec):
    """Trajectory CSV per (seed, mode) plus ``convergence_summary.csv``."""
    out, echo = _prepare(spec)
    jobs = [(spec.config.replace(rng_seed=int(s)), mode, spec.solver)
            for s in spec.seeds for mode in spec.modes]
    results = _map(spec, jobs)
    files = [echo]
    for res in results:
        path = out / f"trajectory_seed{res['seed']}_{res['mode']}.csv"
        _write_csv(path, ["iteration", "cell", "wsr_cell", "wsr_global", "delta"], res["trajectory"])
        files.append(path)
    summary = out / "convergence_summary.csv"
    _write_csv(summary, SUMMARY_HEADER,
               [[r["seed"], r["mode"], int(r["converged"]), r["iterations"],
                 repr(float(r["initial_wsr"])), repr(float(r["final_wsr"])), r["messages"]]
                for r in results])
    files.append(summary)
    return ExperimentOutput(files=files, rows=results)


def _stderr(x):
    x = np.asarray(x, dtype=float)
    return float(np.std(x, ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0


def run_power_sweep(spec):
    """Mean converged sum-rate (unit weights) per power and init mode.

    Writes ``power_sweep.csv`` (``power_dbw,mode,mean_sumrate,stderr``) and
    the per-run values in ``power_sweep_runs.csv``.
    """
    out, echo = _prepare(spec)
    base = spec.config.replace(user_weights=None)
    jobs = [(base.replace(power_budget_dbw=float(p), rng_seed=int(s)), mode, spec.solver)
            for p in spec.powers_dbw for mode in spec.modes for s in spec.seeds]
    results = _map(spec, jobs)
    run_rows, rows = [], []
    i = 0
    for p in spec.powers_dbw:
        for mode in spec.modes:
            chunk = results[i:i + len(spec.seeds)]
            i += len(spec.seeds)
            rates = [r["sum_rate"] for r in chunk]
            rows.append({"power_dbw": float(p), "mode": mode,
                         "mean_sumrate": float(np.mean(rates)), "stderr": _stderr(rates)})
            run_rows += [[repr(float(p)), mode, r["seed"], repr(float(r["sum_rate"])),
                          int(r["converged"]), r["iterations"]] for r in chunk]
    sweep = out / "power_sweep.csv"
    _write_csv(sweep, SWEEP_HEADER,
               [[repr(r["power_dbw"]), r["mode"], repr(r["mean_sumrate"]), repr(r["stderr"])]
                for r in rows])
    runs = out / "power_sweep_runs.csv"
    _write_csv(runs, SWEEP_RUNS_HEADER, run_rows)
    return ExperimentOutput(files=[echo, sweep, runs], rows=rows)


def run_single(spec):
    """One seeded run (first seed, first mode) with all traces written out."""
    out, echo = _prepare(spec)
    config = spec.config.replace(rng_seed=int(spec.seeds[0]))
    mode = spec.modes[0]
    channels = generate_channels(config)
    state = run(channels, config, mode, spec.solver)
    report = weighted_sum_rate(channels, state.beams, config)
    files = [echo]

    path = out / "channels.csv"
    write_channels(channels, path)
    files.append(path)
    if state.ia_result is not None:
        path = out / "ia_leakage.csv"
        write_leakage_trace(state.ia_result, path)
        files.append(path)
    path = out / "solver_trace.csv"
    write_solver_trace(state.solver_trace, path)
    files.append(path)
    path = out / "trajectory.csv"
    write_trajectory(state, path)
    files.append(path)
    path = out / "rate_report.csv"
    write_rate_report(report, path)
    files.append(path)
    row = {"seed": config.rng_seed, "mode": mode, "converged": state.converged,
           "iterations": state.iterations_used, "initial_wsr": state.initial.wsr,
           "final_wsr": state.wsr, "messages": state.messages.total, "events": list(state.events)}
    return ExperimentOutput(files=files, rows=[row])


def run_experiment(spec):
    runner = {
        "convergence": run_convergence_experiment,
        "power_sweep": run_power_sweep,
        "single_run": run_single,
    }[spec.preset]
    return runner(spec)

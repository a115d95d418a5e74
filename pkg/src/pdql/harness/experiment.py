"""Experiment orchestration: sweeps, convergence detection, aggregation, fits.

Convergence of a run is detected post-hoc against the exact oracle: the
first traced timestep whose signed mean error is within the experiment
epsilon and stays within it at every later traced point.  The all-locked
termination timestep of the delayed learners is recorded alongside for
comparison.  Cells that fail or never converge are censored, never dropped.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .. import mdp as mdp_mod
from ..errors import InsufficientData
from ..lattice import make_lattice, most_square_dims
from ..learners import run_learner
from .config import ExperimentConfig, LearnerSpec

CENSORED = "censored"


@dataclass
class ConvergenceRecord:
    learner: str
    num_states: int
    seed: int
    converged: bool
    samples_to_convergence: int | None
    final_mean_error: float
    samples_all_locked: int | None = None
    note: str = ""

    def sort_key(self):
        return (self.learner, self.num_states, self.seed)


def detect_convergence(trace, epsilon: float):
    """First traced timestep with |mean_error| <= epsilon sustained to the
    end of the trace; None when never sustained."""
    last_bad = None
    for i, p in enumerate(trace.samples):
        if abs(p.mean_error) > epsilon:
            last_bad = i
    idx = 0 if last_bad is None else last_bad + 1
    if idx < len(trace.samples):
        return trace.samples[idx].timestep
    return None


def _env_for_size(cfg: ExperimentConfig, size: int | None):
    env = cfg.env
    if size is not None:
        env = replace(env, dims=most_square_dims(int(size)) if len(env.dims) != 1
                      else [int(size)],
                      seed=env.seed * 1_000_003 + int(size))
    return env


def _run_cell(args):
    spec, oracle, learner, size, seed, cfg = args
    key = (learner.name, size, seed)
    budget = cfg.cell_budget(spec.num_states, spec.num_actions, learner)
    try:
        trace = run_learner(learner.name, spec, oracle, seed,
                            epsilon=cfg.epsilon, delta=cfg.delta, budget=budget,
                            trace_stride=cfg.trace_stride,
                            overrides=learner.overrides)
    except Exception as exc:  # censored cell, sweep continues
        record = ConvergenceRecord(learner.name, size, seed, False, None,
                                   float("nan"), None, f"error: {exc}")
        return key, record, None
    at = detect_convergence(trace, cfg.epsilon)
    record = ConvergenceRecord(
        learner.name, size, seed, at is not None, at,
        trace.final_mean_error, trace.converged_at,
    )
    return key, record, trace


def run_experiment(cfg: ExperimentConfig, jobs: int = 1):
    """Run every (learner, size, seed) cell; returns (records, traces, meta).

    One environment and one value-iteration oracle per size; learner runs
    share them immutably.  Cells run concurrently up to `jobs`, with
    deterministic per-cell seeding, and records come back sorted.
    """
    sizes = list(cfg.sizes) if cfg.sizes else [int(np.prod(cfg.env.dims))]
    solves_before = mdp_mod.vi_solve_count()

    cells = []
    for size in sizes:
        env = _env_for_size(cfg, size if cfg.sizes else None)
        spec = make_lattice(env, cfg.gamma)
        oracle, _ = mdp_mod.value_iteration(spec, cfg.oracle_tolerance)
        for learner in cfg.learners:
            for seed in cfg.seeds:
                cells.append((spec, oracle, learner, size, seed, cfg))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, cells))
    else:
        results = [_run_cell(c) for c in cells]

    records = sorted((r for _, r, _ in results), key=ConvergenceRecord.sort_key)
    traces = {k: t for k, _, t in results if t is not None}
    meta = {"vi_solves": mdp_mod.vi_solve_count() - solves_before,
            "sizes": sizes, "cells": len(cells)}
    return records, traces, meta


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def records_to_csv(records) -> str:
    lines = ["learner,S,seed,converged,samples_to_convergence,"
             "final_mean_error,samples_all_locked,note"]
    for r in sorted(records, key=ConvergenceRecord.sort_key):
        conv = int(r.converged)
        stc = "" if r.samples_to_convergence is None else r.samples_to_convergence
        sal = "" if r.samples_all_locked is None else r.samples_all_locked
        err = "nan" if math.isnan(r.final_mean_error) else f"{r.final_mean_error:.10g}"
        lines.append(f"{r.learner},{r.num_states},{r.seed},{conv},{stc},{err},{sal},{r.note}")
    return "\n".join(lines) + "\n"


@dataclass
class SummaryRow:
    learner: str
    num_states: int
    mean_samples: float | None
    std_samples: float | None
    n_censored: int


def aggregate(records) -> list:
    """Per (learner, size): mean/std of samples-to-convergence over the
    converged seeds plus the censoring count."""
    rows = []
    keys = sorted({(r.learner, r.num_states) for r in records})
    for learner, size in keys:
        cell = [r for r in records if r.learner == learner and r.num_states == size]
        done = [r.samples_to_convergence for r in cell if r.converged]
        censored = len(cell) - len(done)
        if done:
            rows.append(SummaryRow(learner, size, float(np.mean(done)),
                                   float(np.std(done)), censored))
        else:
            rows.append(SummaryRow(learner, size, None, None, censored))
    return rows


def summary_to_csv(rows) -> str:
    lines = ["learner,S,mean_samples,std_samples,n_censored"]
    for r in rows:
        mean = CENSORED if r.mean_samples is None else f"{r.mean_samples:.10g}"
        std = CENSORED if r.std_samples is None else f"{r.std_samples:.10g}"
        lines.append(f"{r.learner},{r.num_states},{mean},{std},{r.n_censored}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Scaling-model fits
# ---------------------------------------------------------------------------

SCALING_MODELS = ("SAlogA", "SAlogSA")


def _model_x(model: str, s: int, a: int) -> float:
    if model == "SAlogA":
        return s * a * math.log(a)
    if model == "SAlogSA":
        return s * a * math.log(s * a)
    raise ValueError(f"unknown model {model!r}")


def fit_scaling(summary, num_actions, model: str | None = None) -> dict:
    """Least-squares single-coefficient fits of mean samples against the two
    growth shapes c*S*A*ln(A) and c*S*A*ln(S*A).

    num_actions is an int or a mapping size -> action count.  Returns, per
    learner, both fits (coefficient, residual norm) and which model fits
    better; restricting `model` returns only that fit.  Needs at least 3
    sizes with uncensored means.
    """
    def actions_for(s):
        return num_actions[s] if isinstance(num_actions, dict) else int(num_actions)

    report = {}
    learners = sorted({r.learner for r in summary})
    for learner in learners:
        pts = [(r.num_states, r.mean_samples) for r in summary
               if r.learner == learner and r.mean_samples is not None]
        if len({s for s, _ in pts}) < 3:
            raise InsufficientData(
                f"{learner}: {len(pts)} uncensored sizes, need >= 3")
        y = np.array([v for _, v in pts])
        fits = {}
        for m in SCALING_MODELS if model is None else (model,):
            x = np.array([_model_x(m, s, actions_for(s)) for s, _ in pts])
            coeff = float(x @ y / (x @ x))
            fits[m] = {"coeff": coeff,
                       "residual": float(np.linalg.norm(y - coeff * x))}
        if model is None:
            fits["better"] = min(SCALING_MODELS, key=lambda m: fits[m]["residual"])
        report[learner] = fits
    return report


# ---------------------------------------------------------------------------
# Output directory layout
# ---------------------------------------------------------------------------


def write_outputs(cfg: ExperimentConfig, records, traces, outdir) -> Path:
    """Materialize records.csv, summary.csv, traces/, config.json, plots/."""
    from .svgplot import emit_plots

    out = Path(outdir)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    (out / "plots").mkdir(parents=True, exist_ok=True)
    (out / "records.csv").write_text(records_to_csv(records))
    (out / "summary.csv").write_text(summary_to_csv(aggregate(records)))
    (out / "config.json").write_text(cfg.snapshot_json())
    for (learner, size, seed), trace in sorted(traces.items()):
        trace.save(out / "traces" / f"{learner}_{size}_{seed}.csv")
    emit_plots(records, traces, out / "plots", fig_b_size=cfg.fig_b_size)
    return out

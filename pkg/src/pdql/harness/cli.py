"""Command-line interface.

Subcommands: bounds (closed-form calculators), validate (MDP JSON checks),
run (single-environment experiment), sweep (size sweep), plot (re-render
charts from an output directory).  Exit codes: 0 success, 1 validation or
configuration error, 2 when every experiment cell ended censored.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .. import bounds as bounds_mod
from ..errors import ConfigError, StructuralError, ValidationFailure
from ..mdp import MdpSpec, validate_mdp
from .config import load_config
from .experiment import run_experiment, write_outputs


def _common(sub):
    sub.add_argument("--seed", type=int, default=None,
                     help="override the environment base seed")
    sub.add_argument("--jobs", type=int, default=1,
                     help="concurrent cells for run/sweep")
    sub.add_argument("--format", choices=("text", "csv", "json"), default="text")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdql",
        description="tabular delayed Q-learning laboratory on metric MDPs")
    subs = parser.add_subparsers(dest="command", required=True)

    b = subs.add_parser("bounds", help="evaluate every closed-form bound")
    b.add_argument("--epsilon", type=float, required=True)
    b.add_argument("--delta", type=float, required=True)
    b.add_argument("--gamma", type=float, required=True)
    b.add_argument("--states", type=int, required=True)
    b.add_argument("--actions", type=int, required=True)
    _common(b)

    v = subs.add_parser("validate", help="check an MDP JSON file's invariants")
    v.add_argument("spec", type=Path)
    v.add_argument("--sample-budget", type=int, default=20000)
    _common(v)

    for name, help_text in (("run", "run the configured experiment"),
                            ("sweep", "run the configured size sweep")):
        p = subs.add_parser(name, help=help_text)
        p.add_argument("config", type=Path)
        p.add_argument("--out", type=Path, default=None,
                       help="output directory (default: config output_dir)")
        _common(p)

    p = subs.add_parser("plot", help="re-render plots from an output directory")
    p.add_argument("outdir", type=Path)
    p.add_argument("--fig-b-size", type=int, default=200)
    _common(p)
    return parser


def _cmd_bounds(args) -> int:
    try:
        inp = bounds_mod.BoundInputs(args.epsilon, args.delta, args.gamma,
                                     args.states, args.actions)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    report = bounds_mod.full_report(inp)
    if args.format == "csv":
        print(report.as_csv(), end="")
    elif args.format == "json":
        print(json.dumps([e.__dict__ for e in report.entries], indent=2))
    else:
        print(report.as_text(), end="")
    return 0


def _cmd_validate(args) -> int:
    try:
        spec = MdpSpec.load(args.spec)
    except (StructuralError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {args.spec}: {exc}", file=sys.stderr)
        return 1
    report = validate_mdp(spec, sample_budget=args.sample_budget,
                          seed=args.seed or 0)
    for check in report.checks:
        mark = "pass" if check.passed else "FAIL"
        detail = f"  ({check.detail})" if check.detail else ""
        print(f"{mark}  {check.name}{detail}")
    try:
        report.require()
    except ValidationFailure:
        return 1
    return 0


def _cmd_experiment(args, sweep: bool) -> int:
    try:
        cfg = load_config(args.config)
        if sweep and not cfg.sizes:
            raise ConfigError("sweep needs [env] sizes")
        if not sweep:
            cfg = replace(cfg, sizes=None)
        if args.seed is not None:
            cfg = replace(cfg, env=replace(cfg.env, seed=args.seed))
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    records, traces, meta = run_experiment(cfg, jobs=args.jobs)
    out = write_outputs(cfg, records, traces, args.out or cfg.output_dir)
    converged = sum(r.converged for r in records)
    print(f"{len(records)} cells ({meta['sizes']} sizes), "
          f"{converged} converged, {len(records) - converged} censored -> {out}")
    if converged == 0:
        return 2
    return 0


def _cmd_plot(args) -> int:
    from ..learners.trace import RunTrace
    from .experiment import ConvergenceRecord
    from .svgplot import emit_plots

    outdir = Path(args.outdir)
    records_file = outdir / "records.csv"
    if not records_file.exists():
        print(f"error: {records_file} not found", file=sys.stderr)
        return 1
    records = []
    for line in records_file.read_text().strip().splitlines()[1:]:
        learner, s, seed, conv, stc, err, sal, note = line.split(",", 7)
        records.append(ConvergenceRecord(
            learner, int(s), int(seed), conv == "1",
            int(stc) if stc else None, float(err),
            int(sal) if sal else None, note))
    traces = {}
    for path in sorted((outdir / "traces").glob("*.csv")):
        learner, s, seed = path.stem.rsplit("_", 2)
        traces[(learner, int(s), int(seed))] = RunTrace.load(path)
    emit_plots(records, traces, outdir / "plots", fig_b_size=args.fig_b_size)
    print(f"plots written to {outdir / 'plots'}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "bounds":
        return _cmd_bounds(args)
    if args.command == "validate":
        return _cmd_validate(args)
    if args.command == "run":
        return _cmd_experiment(args, sweep=False)
    if args.command == "sweep":
        return _cmd_experiment(args, sweep=True)
    if args.command == "plot":
        return _cmd_plot(args)
    return 1


if __name__ == "__main__":
    sys.exit(main())

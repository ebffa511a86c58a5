"""Command line entry point: ``inviscid {simulate,sweep,lagrangian,diagnose,report}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from . import spectral as sp
from .config import ExperimentSpec, load_config
from .dynamics import SimulationConfig, Trajectory, evolve
from .experiments import ResolutionError, initial_datum, run_experiment
from .report import write_report
from .spectral import GridSpec


def _spec(args, default_experiment: str) -> ExperimentSpec:
    spec = load_config(args.config) if args.config else ExperimentSpec(experiment=default_experiment)
    changes = {}
    if args.experiment:
        changes["experiment"] = args.experiment
    if args.out:
        changes["out"] = Path(args.out)
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.threads:
        changes["jobs"] = args.threads
        sp.set_workers(args.threads)
    spec = spec.with_(**changes) if changes else spec
    if spec.out is None:
        spec = spec.with_(out=Path("results"))
    return spec


def _print_result(result) -> int:
    for name, ok in result.checks.items():
        print(f"{result.experiment} {name}: {'PASS' if ok else 'FAIL'}")
    if result.guard is not None:
        g = result.guard
        print(f"{result.experiment} resolution guard ({g.quantity}): change {g.relative_change:.3%}")
    return 0 if result.passed else 1


def cmd_simulate(args) -> int:
    spec = _spec(args, "E1")
    nu = float(spec.extra.get("nu", spec.nus[0]))
    w0 = initial_datum(spec)
    grid = GridSpec(spec.n)
    traj = evolve(w0, grid, SimulationConfig(nu=nu, dt=spec.dt, t_end=spec.t_end,
                                             snapshot_stride=spec.snapshot_stride))
    path = traj.save(spec.out / f"trajectory_nu{nu:g}")
    print(f"wrote {len(traj)} snapshots to {path}")
    return 0


def cmd_sweep(args) -> int:
    spec = _spec(args, "E1")
    try:
        result = run_experiment(spec)
    except ResolutionError as exc:
        print(f"resolution guard failed: {exc.report}", file=sys.stderr)
        return 2
    return _print_result(result)


def cmd_lagrangian(args) -> int:
    spec = _spec(args, "E7")
    if spec.experiment != "E7":
        spec = spec.with_(experiment="E7")
    return _print_result(run_experiment(spec))


def cmd_diagnose(args) -> int:
    """Diagnostics CSV for a saved trajectory directory."""
    spec = _spec(args, "E1")
    traj = Trajectory.load(args.trajectory)
    grid = traj.grid
    pi0 = dg.distribution(traj.initial)
    rows = []
    nu = traj.config.nu if traj.config is not None else float("nan")
    for t, w in zip(traj.times, traj.snapshots):
        for p in spec.ps:
            rows.append(("diagnose", t, nu, f"L{p:g}", dg.lp_norm(w, grid, p)))
        rows.append(("diagnose", t, nu, "Linf", float(np.max(np.abs(w)))))
        rows.append(("diagnose", t, nu, "enstrophy", dg.enstrophy(w, grid)))
        rows.append(("diagnose", t, nu, "W1", dg.wasserstein1(dg.distribution(w), pi0)))
    spec.out.mkdir(parents=True, exist_ok=True)
    path = spec.out / "diagnose.csv"
    dg.write_rows(path, rows)
    print(f"wrote {len(rows)} rows to {path}")
    return 0


def cmd_report(args) -> int:
    spec = _spec(args, "E1")
    paths = write_report(spec.out)
    for p in paths:
        print(f"wrote {p}")
    if not paths:
        print(f"no experiment CSV found in {spec.out}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="inviscid", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "simulate": (cmd_simulate, "evolve one run and save its trajectory"),
        "sweep": (cmd_sweep, "run an experiment over the viscosity ladder"),
        "lagrangian": (cmd_lagrangian, "stochastic Lagrangian checks (E7)"),
        "diagnose": (cmd_diagnose, "diagnostics CSV for a saved trajectory"),
        "report": (cmd_report, "render SVG plots from experiment CSVs"),
    }
    for name, (fn, help_text) in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path)
        p.add_argument("--experiment", choices=[f"E{i}" for i in range(1, 8)])
        p.add_argument("--out", type=Path)
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        if name == "diagnose":
            p.add_argument("trajectory", type=Path)
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

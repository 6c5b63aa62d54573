"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 runtime or solver error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from pathlib import Path

from .config import ConfigError, build_methods, build_sim_config, dump_config, load_config, apply_override
from .gridio import write_grid
from .sim import SimulationError, experiment, run, run_dir_name, write_run_outputs, write_summary

log = logging.getLogger("pmcoverage")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _load(args, extra=()):
    overrides = list(args.override or [])
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    if args.out_dir is not None:
        overrides.append(f"output.out_dir={args.out_dir}")
    overrides.extend(extra)
    cfg = load_config(args.config, overrides)
    return cfg, build_sim_config(cfg)


def cmd_run(args) -> int:
    cfg, sim = _load(args)
    result = run(sim)
    d = write_run_outputs(result, cfg["output"]["out_dir"], fields=cfg["output"]["write_fields"])
    print(f"method={sim.method.name} scenario={sim.scenario} steps={sim.n_steps} "
          f"E(0)={result.error_series[0]:.6g} E(final)={result.final_error:.6g} "
          f"runtime={result.wall_time:.2f}s")
    print(f"outputs: {d}")
    return EXIT_OK


def _parse_methods(raw, cfg):
    if raw is None:
        raw = cfg["compare"]["methods"]
    return build_methods(cfg, raw)


def _compare_once(cfg, sim, args, out_dir: Path):
    methods = _parse_methods(args.methods, cfg)
    n_runs = args.runs if args.runs is not None else cfg["compare"]["n_runs"]
    if not isinstance(n_runs, int) or n_runs < 1:
        raise ConfigError("compare.n_runs", f"must be a positive integer, got {n_runs!r}")
    shared = cfg["compare"]["shared_initial_positions"]
    if not isinstance(shared, bool):
        raise ConfigError("compare.shared_initial_positions", f"expected true/false, got {shared!r}")
    t0 = time.perf_counter()
    summary = experiment(sim, methods, n_runs, shared_initial_positions=shared, workers=args.workers)
    for name in summary.methods:
        for r in summary.runs[name]:
            if not isinstance(r, str):
                write_run_outputs(r, out_dir / "runs", fields=False)
    path = write_summary(summary, out_dir / "summary.csv")
    finals = summary.final_means()
    print(f"scenario={sim.scenario} runs={n_runs} steps={sim.n_steps} ({time.perf_counter() - t0:.1f}s)")
    print(f"{'method':<8}{'mean E(final)':>16}{'std':>12}{'failed':>8}")
    for name in summary.methods:
        failed = sum(isinstance(r, str) for r in summary.runs[name])
        print(f"{name:<8}{finals[name]:>16.6g}{summary.std_E[name][-1]:>12.4g}{failed:>8}")
    print(f"summary: {path}")
    return summary


def cmd_compare(args) -> int:
    cfg, sim = _load(args)
    out_dir = Path(cfg["output"]["out_dir"])
    sweep = cfg["sweep"]
    if sweep["parameter"]:
        if not sweep["values"]:
            raise ConfigError("sweep.values", "a sweep needs at least one value")
        for v in sweep["values"]:
            scfg = load_config(args.config, list(args.override or []))
            apply_override(scfg, f"{sweep['parameter']}={v}")
            if args.seed is not None:
                apply_override(scfg, f"run.seed={args.seed}")
            ssim = build_sim_config(scfg)
            print(f"--- {sweep['parameter']} = {v}")
            _compare_once(scfg, ssim, args, out_dir / f"{sweep['parameter']}={v}")
    else:
        summary = _compare_once(cfg, sim, args, out_dir)
        if any(isinstance(r, str) for rs in summary.runs.values() for r in rs):
            return EXIT_RUNTIME
    return EXIT_OK


def cmd_snapshot(args) -> int:
    cfg, sim = _load(args)
    steps = args.steps if args.steps is not None else cfg["snapshot"]["steps"]
    if isinstance(steps, str):
        try:
            steps = [int(s) for s in steps.split(",") if s.strip()]
        except ValueError:
            raise ConfigError("snapshot.steps", f"expected comma-separated integers, got {steps!r}") from None
    if not isinstance(steps, list) or not all(isinstance(s, int) for s in steps):
        raise ConfigError("snapshot.steps", f"expected a list of integers, got {steps!r}")
    bad = [s for s in steps if s < 0 or s > sim.n_steps]
    if bad:
        raise ConfigError("snapshot.steps", f"steps {bad} are outside [0, {sim.n_steps}]")
    result = run(sim, snapshot_steps=steps)
    base = Path(cfg["output"]["out_dir"]) / run_dir_name(sim) / "snapshots"
    grid = sim.grid
    for s, snap in sorted(result.snapshots.items()):
        d = base / f"step_{s:06d}"
        d.mkdir(parents=True, exist_ok=True)
        for name in ("mu", "c", "e", "g"):
            write_grid(d / f"{name}.grid", snap[name], grid)
        with open(d / "trajectory.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "agent", "x", "y"])
            for k, pos in zip(result.trajectory_steps, result.trajectories):
                if k > s:
                    break
                for a, (x, y) in enumerate(pos):
                    w.writerow([int(k), a, repr(float(x)), repr(float(y))])
    print(f"wrote {len(result.snapshots)} snapshot(s) under {base}")
    return EXIT_OK


def cmd_defaults(args) -> int:
    cfg = load_config(None, list(args.override or []))
    sys.stdout.write(dump_config(cfg))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file (defaults are used for missing keys)")
    common.add_argument("--seed", type=int, help="base seed, overrides run.seed")
    common.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="parallel runs")
    common.add_argument("--out-dir", help="output directory, overrides output.out_dir")
    common.add_argument("--override", action="append", metavar="KEY=VALUE",
                        help="dotted-path override, e.g. control.v_m=2.0 (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="pmcoverage", description="Perona-Malik ergodic coverage simulator")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run one simulation")
    c = sub.add_parser("compare", parents=[common], help="multi-run method comparison")
    c.add_argument("--methods", help="comma-separated subset of pm,hedac,smc")
    c.add_argument("--runs", type=int, help="runs per method")
    s = sub.add_parser("snapshot", parents=[common], help="dump fields at selected steps")
    s.add_argument("--steps", help="comma-separated step indices")
    sub.add_parser("defaults", parents=[common], help="print the default configuration")
    return p


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "snapshot": cmd_snapshot, "defaults": cmd_defaults}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationError, FloatingPointError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: run scenarios, verify the inequality suites,
plot finished runs, and sweep scenario variants.

Exit codes: 0 success, 1 configuration or usage error, 2 solver failure.
The output root can be redirected with the MEMFLOW_OUTPUT_ROOT environment
variable; identical config and seed produce byte-identical step logs.
"""

from __future__ import annotations

import argparse
import itertools
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .device import InitialDataError, MeshError
from .scenario import (ConfigError, apply_overrides, load_scenario,
                       run_scenario)
from .solver import NonConvergenceError

__all__ = ["main"]


def _parse_value(text: str):
    """Best-effort literal: int, float, bool, else string."""
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def _run_overrides(args) -> dict:
    overrides = {}
    if args.dt is not None:
        overrides["solver.dt"] = args.dt
    if args.tend is not None:
        overrides["device.final_time"] = args.tend
    if args.cells is not None:
        if "," in args.cells:
            overrides["device.cells"] = [int(c) for c in args.cells.split(",")]
        else:
            overrides["device.cells"] = int(args.cells)
    return overrides


def cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.config)
        scenario = apply_overrides(scenario, _run_overrides(args))
        out_dir = Path(args.outdir) if args.outdir else None
        result = run_scenario(scenario, seed=args.seed, out_dir=out_dir)
    except (ConfigError, InitialDataError, MeshError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NonConvergenceError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    summary = result.summary
    print(f"scenario {summary['scenario']}: {summary['steps']} steps to "
          f"t = {summary['t_end']:g}")
    print(f"energy_decay: {summary['energy_decay']}")
    print(f"final_E: {summary['final_E']:.6e}  "
          f"mass_D_drift_rel: {summary['mass_D_drift_rel']:.3e}")
    return 0


def cmd_verify(args) -> int:
    from .verification import format_table, run_suite

    try:
        results = run_suite(args.suite)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 1
    print(format_table(results))
    return 0 if all(r.passed for r in results) else 1


def cmd_plot(args) -> int:
    from .plotting import plot_run

    try:
        written = plot_run(args.rundir)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(f"wrote {path}")
    return 0


def _sweep_one(payload) -> tuple[str, int, str]:
    config_path, overrides, seed, out_dir = payload
    try:
        scenario = load_scenario(config_path)
        scenario = apply_overrides(scenario, overrides)
        result = run_scenario(scenario, seed=seed, out_dir=Path(out_dir))
    except (ConfigError, InitialDataError, MeshError) as exc:
        return out_dir, 1, str(exc)
    except NonConvergenceError as exc:
        return out_dir, 2, str(exc)
    return out_dir, 0, result.summary["energy_decay"]


def cmd_sweep(args) -> int:
    try:
        scenario = load_scenario(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    axes = []
    for item in args.set or []:
        if "=" not in item:
            print(f"error: --set needs key=value[,value...]: {item!r}",
                  file=sys.stderr)
            return 1
        key, _, values = item.partition("=")
        axes.append([(key, _parse_value(v)) for v in values.split(",")])
    if not axes:
        print("error: sweep needs at least one --set axis", file=sys.stderr)
        return 1
    root = Path(args.outdir) if args.outdir else scenario.output_dir()
    jobs = []
    for combo in itertools.product(*axes):
        overrides = dict(combo)
        tag = "_".join(f"{k.split('.')[-1]}={v}" for k, v in combo)
        jobs.append((args.config, overrides, args.seed, str(root / tag)))
    results = []
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    worst = 0
    for out_dir, code, note in results:
        status = "ok" if code == 0 else f"exit {code}"
        print(f"{out_dir}: {status} ({note})")
        worst = max(worst, code)
    return worst


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="memflow",
        description="Finite-volume memristor charge-transport simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario config")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=0,
                       help="seed for the initial perturbation")
    p_run.add_argument("--dt", type=float, default=None,
                       help="override [solver].dt")
    p_run.add_argument("--cells", default=None,
                       help="override [device].cells (2D: nx,ny)")
    p_run.add_argument("--tend", type=float, default=None,
                       help="override [device].final_time")
    p_run.add_argument("--outdir", default=None)
    p_run.set_defaults(func=cmd_run)

    p_ver = sub.add_parser("verify", help="run a verification suite")
    p_ver.add_argument("suite", help="appendix-a | lemma-2-4 | lemma-2-6 | "
                       "poincare | statistics-roundtrip | all")
    p_ver.set_defaults(func=cmd_verify)

    p_plot = sub.add_parser("plot", help="plot a finished run directory")
    p_plot.add_argument("rundir")
    p_plot.set_defaults(func=cmd_plot)

    p_sweep = sub.add_parser("sweep", help="run scenario variants")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--set", action="append", metavar="KEY=V1,V2",
                         help="sweep axis as dotted config key with values")
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.add_argument("--outdir", default=None)
    p_sweep.set_defaults(func=cmd_sweep)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""``clm`` command line.

Exit codes: 0 success, 1 gradient check failed, 2 invalid config,
3 numerical failure (partial trace kept).
"""
from __future__ import annotations

import argparse
import logging
import sys

from .config import list_presets, load_config
from .core import ConfigurationError
from .experiment import NumericalRunError, run_bench, run_experiment
from .gradcheck import run_gradcheck

EXIT_OK, EXIT_GRADCHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _parser():
    ap = argparse.ArgumentParser(prog="clm", description="Coupled local minimizers")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    run = sub.add_parser("run", help="run one configured experiment")
    run.add_argument("config", help="YAML/JSON config, summary.json, or preset name")
    run.add_argument("--out", help="output directory (default $CLM_OUTPUT_ROOT/<name>)")
    run.add_argument("--seed", type=int, help="override the config seed")

    bench = sub.add_parser("bench", help="CLM vs multistart baselines over seeds")
    bench.add_argument("config")
    bench.add_argument("--seeds", type=int, default=20, help="number of seeds (0..S-1)")
    bench.add_argument("--first-seed", type=int, default=0)
    bench.add_argument("--workers", type=int, default=1)
    bench.add_argument("--out")

    gc = sub.add_parser("gradcheck", help="finite-difference check of all gradients")
    gc.add_argument("--points", type=int, default=100)
    gc.add_argument("--tol", type=float, default=1e-5)
    gc.add_argument("--seed", type=int, default=0)

    sub.add_parser("presets", help="list bundled presets")
    return ap


def cmd_run(args):
    exp = load_config(args.config)
    if args.seed is not None:
        exp = exp.with_seed(args.seed)
    try:
        s = run_experiment(exp, args.out)
    except NumericalRunError as exc:
        print(f"numerical failure: {exc} (partial trace in {exc.out_dir})", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"best cost {s['best_cost_pre_polish']:.10g} -> {s['best_cost_post_polish']:.10g} "
          f"after polish ({s['windows']} windows, {s['wall_time_s']:.1f}s)")
    return EXIT_OK


def cmd_bench(args):
    exp = load_config(args.config)
    if args.seeds < 1:
        raise ConfigurationError("--seeds must be >= 1")
    seeds = range(args.first_seed, args.first_seed + args.seeds)
    rows, s = run_bench(exp, seeds, args.out, args.workers)
    for name in ("clm_vs_multistart", "clm_vs_quasi_newton"):
        r = s[name]
        if r is not None:
            print(f"{name}: CLM <= baseline on {r['wins']}/{r['compared']} seeds")
    if s["failed_seeds"]:
        print(f"numerical failure on seeds {s['failed_seeds']}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_gradcheck(args, registry=None):
    worst = run_gradcheck(registry, args.points, args.tol, args.seed)
    bad = False
    for name, err in worst.items():
        ok = err < args.tol
        bad |= not ok
        print(f"{name:20s} worst rel err {err:.3e}  {'ok' if ok else 'FAIL'}")
    return EXIT_GRADCHECK if bad else EXIT_OK


def main(argv=None, registry=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        if args.cmd == "run":
            return cmd_run(args)
        if args.cmd == "bench":
            return cmd_bench(args)
        if args.cmd == "gradcheck":
            return cmd_gradcheck(args, registry)
        print("\n".join(list_presets()))
        return EXIT_OK
    except ConfigurationError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

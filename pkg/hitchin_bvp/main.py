#!/usr/bin/env python3

import argparse
import sys
from pathlib import Path

from .utils.errors import ConfigError, NumericalFailure, ReportWriteError
from .utils.logging import Log
from .utils.reporting import RunConfig, save_json_report
from .utils.workers import set_default_workers, worker_count

from .mods import analyze
from .mods import selftest
from .mods import solver
from .mods import spheremodes
from .mods import t3b3

GLOBAL_KEYS = {"out_dir", "workers", "seed", "quiet", "report_json", "report_csv", "command", "func", "config"}
PATH_KEYS = {"out", "dump_field", "form"}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hitchin-bvp",
        description="Hitchin-Bvp: stable 3-forms, boundary contact geometry and Calabi-Yau boundary value experiments",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Example:
  hitchin-bvp analyze '{"grade": 3, "coeffs": {"4 5 6": 1, "2 3 4": -1, "1 3 5": 1, "1 2 6": -1}}'
  hitchin-bvp --out-dir runs example-t3b3
  hitchin-bvp spectrum --degree 6 --mmax 1 --out spectrum.json
  hitchin-bvp -w 4 torelli-t6 --n 8 --eps 0.05 --seed 3
  hitchin-bvp boundary-solve --nx 16 --nt 4 --eps 0.02
  hitchin-bvp selftest
"""
    )

    parser.add_argument("--out-dir", default=".", help="Folder for reports without an explicit path")
    parser.add_argument("--workers", "-w", type=int, default=None,
                        help="Number of parallel workers (capped by HITCHIN_BVP_WORKERS)")
    parser.add_argument("--seed", type=int, default=0, help="Seed of every random stream")
    parser.add_argument("--quiet", "-q", action="store_true", help="Only print errors")
    parser.add_argument("--report-json", type=str, default=None, help="Path to save JSON report")
    parser.add_argument("--report-csv", type=str, default=None, help="Path to save CSV report")

    subparsers = parser.add_subparsers(dest="command", required=True, help="The experiment to run.")

    def add(name, func, help_text):
        p = subparsers.add_parser(name, help=help_text)
        p.add_argument("--out", type=str, default=None, help="Path of the JSON report")
        p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="Overrides the global seed")
        p.set_defaults(func=func)
        return p

    p_an = add("analyze", analyze.run, "Stable-form analysis of one 3-form literal (lambda, I, P, volume density).")
    p_an.add_argument("form", help="JSON form literal, or @file holding one")

    p_ex = add("example-t3b3", t3b3.run, "Boundary checks of the flat B3 x T3 example (triple, Levi coefficient, gamma, periods).")
    p_ex.add_argument("--points", type=int, default=64, help="Random boundary points besides the rational ones")
    p_ex.add_argument("--nx", type=int, default=32, help="Points per ball axis for the B3 period")
    p_ex.add_argument("--nt", type=int, default=1, help="Points per torus axis for the T3 period")

    p_sp = add("spectrum", spheremodes.run, "Fourier-mode kernel dimensions of the boundary Laplacian on S2 x T3.")
    p_sp.add_argument("--degree", type=int, default=6, help="Target polynomial degree D")
    p_sp.add_argument("--mmax", type=int, default=1, help="Sweep all modes with |m|_inf <= M")
    p_sp.add_argument("--trial-offset", type=int, default=3, help="Trial degree minus target degree")
    p_sp.add_argument("--tol", type=float, default=1e-9, help="Kernel threshold relative to the largest eigenvalue")
    p_sp.add_argument("--gap", type=float, default=1e3, help="Required gap factor above the kernel threshold")
    p_sp.add_argument("--compare-offset", action="store_true", help="Repeat the sweep with trial offset + 1")

    p_to = add("torelli-t6", solver.run_torelli, "Closed-case solve on the periodic T6 grid.")
    p_to.add_argument("--n", type=int, default=8, help="Points per axis")
    p_to.add_argument("--eps", type=float, default=0.05, help="Class perturbation |b| / |psi0|")

    p_bs = add("boundary-solve", solver.run_boundary, "Boundary-zero solve on the masked B3 x T3 grid.")
    p_bs.add_argument("--nx", type=int, default=16, help="Points per ball axis")
    p_bs.add_argument("--nt", type=int, default=4, help="Points per torus axis")
    p_bs.add_argument("--eps", type=float, default=0.02, help="Class perturbation |b| / |psi0|")

    for p in (p_to, p_bs):
        p.add_argument("--rtol", type=float, default=1e-3, help="Stop when the residual drops by this factor")
        p.add_argument("--max-iter", type=int, default=2000, help="Iteration cap")
        p.add_argument("--dump-field", type=str, default=None, help="Write the final 3-form field (JSON header + .bin)")

    add("selftest", selftest.run, "Fast invariant suite; exits 0 only when every check passes.")
    return parser


def build_config(args):
    params = {k: v for k, v in vars(args).items() if k not in GLOBAL_KEYS | PATH_KEYS}
    config = RunConfig(
        subcommand=args.command,
        seed=args.seed,
        workers=worker_count(args.workers),
        out_dir=args.out_dir,
        report_json=args.report_json,
        report_csv=args.report_csv,
        params=params,
    )
    return config.validate()


def failure_path(args):
    requested = getattr(args, "out", None) or args.report_json
    folder = Path(requested).parent if requested else Path(args.out_dir)
    return folder / f"{args.command}-failure.json"


def execute(argv=None):
    """Run one subcommand; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    Log.configure(quiet=args.quiet)
    set_default_workers(args.workers)

    Log.info(f"Starting hitchin-bvp with subcommand: {Log.HEADER}{args.command}{Log.ENDC}")
    try:
        args.config = build_config(args)
        args.func(args)
    except ConfigError as e:
        Log.error(f"Invalid configuration: {e}", **e.details)
        return 1
    except NumericalFailure as e:
        Log.error(f"Numerical failure: {e}")
        try:
            save_json_report(failure_path(args), e.to_dict())
        except ReportWriteError as write_error:
            Log.error(str(write_error))
        return 2
    except Exception as e:
        Log.error(f"A critical error occurred: {e}")
        return 1
    return 0


def main():
    if len(sys.argv) == 1:
        build_parser().print_help(sys.stderr)
        sys.exit(1)
    sys.exit(execute(sys.argv[1:]))


if __name__ == "__main__":
    main()

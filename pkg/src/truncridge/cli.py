"""Command line: ``truncridge {gen,rates,sweep,check}``.

Exit codes: 0 success, 1 check or cell failures, 2 configuration errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import checks
from .runner import CellError, ConfigError, load_config, run_gen, run_rates, run_sweep

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="INI config file")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--jobs", type=int, help="worker processes")
    p.add_argument("--lambda", dest="lambdas", type=float, nargs="+", metavar="LAM",
                   help="replace the lambda grid")
    p.add_argument("--n", dest="ns", type=int, nargs="+", metavar="N", help="replace the n grid")
    p.add_argument("--risk-mode", choices=("single_draw", "k_average"))
    p.add_argument("--reps", type=int, help="repetitions per n")
    p.add_argument("--timing", action="store_true", default=None,
                   help="record wall-clock time in elapsed_ms (makes output non-reproducible)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="truncridge", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write train/test CSVs for each (n, repetition)")
    _common(p)
    p = sub.add_parser("rates", help="best-lambda excess risk vs n, rate fit and plot")
    _common(p)
    p = sub.add_parser("sweep", help="lambda sweep at a single n")
    _common(p)

    p = sub.add_parser("check", help="run the identity/inequality checks, JSON lines to stdout")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sizes", type=int, nargs="+", help="sample sizes for the identity sweep")
    p.add_argument("--out", type=Path, help="also write checks.jsonl here")
    p.add_argument("--inject-fault", type=float, default=0.0, help=argparse.SUPPRESS)
    return parser


def _config(args):
    overrides = dict(
        master_seed=args.seed,
        output_dir=args.out,
        jobs=args.jobs,
        lambda_grid=args.lambdas,
        n_grid=sorted(args.ns) if args.ns else None,
        risk_mode=args.risk_mode,
        repetitions=args.reps,
        timing=args.timing,
    )
    return load_config(args.config, **overrides)


def cmd_check(args) -> int:
    reports = checks.run_all(args.seed, args.sizes, tamper=args.inject_fault)
    lines = [r.to_json() for r in reports]
    sys.stdout.write("\n".join(lines) + "\n")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "checks.jsonl").write_text("\n".join(lines) + "\n")
    failed = sum(not r.passed for r in reports)
    print(f"{len(reports) - failed}/{len(reports)} checks passed", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "check":
        return cmd_check(args)
    try:
        cfg = _config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "gen":
            paths = run_gen(cfg)
            print(f"wrote {len(paths)} files to {cfg.output_dir}")
        elif args.command == "rates":
            report = run_rates(cfg)
            print(json.dumps({k: report[k] for k in ("slope", "r_squared", "predicted_slope")}))
            for n, lam, risk, se in report["points"]:
                print(f"n={n:5d}  best lambda={lam:.3g}  excess={risk:.4g} (+-{se:.2g})")
        elif args.command == "sweep":
            if len(cfg.n_grid) != 1:
                print("config error: sweep needs exactly one n (use --n)", file=sys.stderr)
                return EXIT_CONFIG
            res = run_sweep(cfg, cfg.n_grid[0])
            print(json.dumps({k: res[k] for k in ("n", "best_lambda", "excess_risk")}))
    except CellError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command line: ``check``, ``geodesic``, ``rigidity`` and ``catalog`` verbs.

Exit codes: 0 all enabled suites pass, 2 hypothesis not met, 3 suite failure, 4 config error.
"""
from __future__ import annotations

import argparse
import json
import sys

from .catalog import CATALOG
from .report import (EXIT_CONFIG, SUITES, ConfigError, RunConfig, export_csv, export_report, report_json,
                     run_suite)

DEFAULT_SUITES = {
    "check": ("equivalence", "einstein", "identities"),
    "geodesic": ("equivalence", "einstein", "ode", "tau"),
    "rigidity": ("equivalence", "einstein", "rigidity"),
}


def _add_run_args(p: argparse.ArgumentParser):
    p.add_argument("--g", required=True, help="catalog spec 'id:key=value,...' or a metric DSL file")
    p.add_argument("--gbar", required=True, help="second metric, same forms as --g")
    p.add_argument("--samples", type=int, default=16, help="number of sample points (default 16)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-6, help="residual tolerance (default 1e-6)")
    p.add_argument("--report", help="write the JSON report here (default: print to stdout)")
    p.add_argument("--csv-dir", help="spill residual arrays and geodesic traces as CSV")
    p.add_argument("--suite", action="append", choices=SUITES,
                   help="enable a suite (repeatable); overrides the verb's default set")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="georigid", description="Check geodesic equivalence and rigidity numerically.")
    sub = ap.add_subparsers(dest="verb", required=True)
    _add_run_args(sub.add_parser("check", help="residual suites (equivalence, Einstein, identities)"))
    geo = sub.add_parser("geodesic", help="phi-ODE and tau-dichotomy batteries along geodesics")
    _add_run_args(geo)
    geo.add_argument("--count", type=int, default=4, help="geodesics per metric (default 4)")
    geo.add_argument("--T", type=float, default=1.0, help="integration length (default 1)")
    geo.add_argument("--steps", type=int, default=200, help="RK4 steps, >= 100 (default 200)")
    _add_run_args(sub.add_parser("rigidity", help="kernel rank, Jordan-block and eigen-gradient suites"))
    cat = sub.add_parser("catalog", help="list built-in metrics")
    cat.add_argument("--json", action="store_true", help="machine-readable listing")
    return ap


def _catalog(args) -> int:
    if args.json:
        print(json.dumps({k: {"chart": e.chart, "params": dict(e.params)} for k, e in CATALOG.items()},
                         indent=2, sort_keys=True))
        return 0
    for k, e in CATALOG.items():
        params = ", ".join(f"{p}={d}" for p, d in e.params.items())
        print(f"{k:20s} {e.chart}\n{'':20s} params: {params}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.verb == "catalog":
        return _catalog(args)
    try:
        cfg = RunConfig(args.g, args.gbar, n_samples=args.samples, seed=args.seed, tol=args.tol,
                        geodesic_count=getattr(args, "count", 4), geodesic_T=getattr(args, "T", 1.0),
                        geodesic_steps=getattr(args, "steps", 200),
                        suites=tuple(args.suite) if args.suite else DEFAULT_SUITES[args.verb])
        report = run_suite(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.report:
            export_report(report, args.report, args.csv_dir)
        else:
            sys.stdout.write(report_json(report))
            if args.csv_dir:
                export_csv(report, args.csv_dir)
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for name, suite in report.suites.items():
        print(f"{name:12s} {suite.status}", file=sys.stderr)
    for key, val in report.verdicts.items():
        print(f"{key:24s} {val}", file=sys.stderr)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    for e in report.errors:
        print(f"error in {e['suite']}: {e['type']}: {e['message']}", file=sys.stderr)
    return report.exit_code

"""Command-line interface: ``predmeta analyze | simulate | qcdf``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import __version__
from .errors import DataError, NumericalError
from .readers import read_counts_csv, read_effects_csv
from .model import from_counts
from .predint import METHODS
from .qdist import AccuracyParams, eigen_spectrum, wchisq_cdf
from .report import FOREST_FIELDS, analyze
from .sim import (ROW_FIELDS, GenerativeSpec, coverage_study,
                  default_threads, normalize_scenario)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated numbers, got {text!r}") from None


def _threads(args):
    return default_threads() if args.threads == 0 else args.threads


def _auto_seed():
    return int(np.random.SeedSequence().entropy % (2 ** 32))


def build_parser():
    env_threads = int(os.environ.get("PREDMETA_THREADS", "1") or 1)
    parser = argparse.ArgumentParser(
        prog="predmeta",
        description="Prediction intervals for random-effects meta-analysis.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="analyse one dataset")
    a.add_argument("input", help="CSV file")
    a.add_argument("--format", choices=("effects", "counts"),
                   default="effects",
                   help="effects: study,y,se|v; counts: study,x1,n1,x0,n0")
    a.add_argument("--alpha", type=float, default=0.05)
    a.add_argument("--B", type=int, default=50_000,
                   help="bootstrap size (default 50000)")
    a.add_argument("--seed", type=int, default=None,
                   help="bootstrap seed (drawn and echoed when omitted)")
    a.add_argument("--out", choices=("table", "json", "forest-csv"),
                   default="table")
    a.add_argument("--threads", type=int, default=env_threads,
                   help="worker threads, 0 = auto (never changes results)")

    s = sub.add_parser("simulate", help="coverage simulation for one cell")
    s.add_argument("--scenario", required=True, choices=("i", "ii", "iii"))
    s.add_argument("--variant", choices=("a", "b", "c"),
                   help="design II variant (required for --scenario ii)")
    s.add_argument("--K", type=int, required=True)
    s.add_argument("--tau2", type=float, required=True)
    s.add_argument("--mu", type=float, default=None,
                   help="average effect (default 0 for i/iii, 1 for ii)")
    s.add_argument("--reps", type=int, default=1000)
    s.add_argument("--B", type=int, default=5000)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--methods", default=",".join(METHODS),
                   help="comma-separated subset of " + ",".join(METHODS))
    s.add_argument("--out", default=None,
                   help="append rows to this .csv or .jsonl file")
    s.add_argument("--threads", type=int, default=env_threads)

    q = sub.add_parser("qcdf", help="P(Q <= q) for a chi-square mixture")
    q.add_argument("--lambdas", type=_floats)
    q.add_argument("--sigma2", type=_floats)
    q.add_argument("--tau2", type=float)
    q.add_argument("--q", type=float, required=True)
    q.add_argument("--eps", type=float, default=1e-8)
    q.add_argument("--max-terms", type=int, default=100_000)
    return parser


def cmd_analyze(args, out):
    if not 0 < args.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    if args.B < 100:
        raise UsageError("--B must be at least 100")
    notes = []
    if args.format == "counts":
        tables = read_counts_csv(args.input)
        if tables.needs_correction:
            notes.append("continuity correction applied: 0.5 added to every "
                         "cell of all tables (a zero cell was present)")
        studies = from_counts(tables)
    else:
        studies = read_effects_csv(args.input)
    seed = args.seed
    if seed is None:
        seed = _auto_seed()
        print(f"seed: {seed}", file=sys.stderr)
    report = analyze(studies, args.alpha, args.B, seed, _threads(args),
                     args.format, notes)
    if args.out == "json":
        out.write(report.to_json())
    elif args.out == "forest-csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(FOREST_FIELDS)
        for row in report.forest_rows():
            w.writerow([f"{x!r}" if isinstance(x, float) else x
                        for x in map(_py, row)])
    else:
        out.write(report.to_table())
    return report


def _py(x):
    return float(x) if isinstance(x, np.floating) else x


def cmd_simulate(args, out):
    if args.scenario == "ii" and not args.variant:
        raise UsageError("--scenario ii requires --variant a|b|c")
    if args.scenario != "ii" and args.variant:
        raise UsageError("--variant only applies to --scenario ii")
    if args.K < 2 or args.tau2 < 0 or args.reps < 1:
        raise UsageError("need --K >= 2, --tau2 >= 0 and --reps >= 1")
    if not 0 < args.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    unknown = [m for m in methods if m not in METHODS]
    if unknown or not methods:
        raise UsageError(f"unknown methods {unknown}; choose from {METHODS}")
    if "Proposed" in methods and args.B < 100:
        raise UsageError("--B must be at least 100")
    if args.K < 3 and any(m != "Proposed" for m in methods):
        print("warning: HTS-family methods need K >= 3; they will be "
              "reported as failed", file=sys.stderr)
    try:
        spec = GenerativeSpec(normalize_scenario(args.scenario, args.variant),
                              args.K, args.tau2, args.mu)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    seed = args.seed
    if seed is None:
        seed = _auto_seed()
        print(f"seed: {seed}", file=sys.stderr)
    reports = coverage_study(spec, methods, args.reps, args.B, args.alpha,
                             seed, _threads(args))
    rows = [r.to_row() for r in reports]
    if args.out:
        _append_rows(args.out, rows)
    out.write(f"scenario {spec.scenario}  K={spec.K}  tau2={spec.tau2:g}  "
              f"mu={spec.mu:g}  reps={args.reps}  B={args.B}  seed={seed}\n")
    out.write(f"{'method':<9} {'coverage':>9} {'mc_se':>7} "
              f"{'mean_width':>10} {'mean_I2':>8} {'failed':>6}\n")
    for r in reports:
        out.write(f"{r.method:<9} {r.coverage:>9.4f} {r.mc_se:>7.4f} "
                  f"{r.mean_width:>10.4f} {r.mean_i2:>8.2f} "
                  f"{r.n_failed:>6d}\n")
    return reports


def _append_rows(path, rows):
    if path.endswith(".json") or path.endswith(".jsonl"):
        with open(path, "a", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row) + "\n")
        return
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=ROW_FIELDS, lineterminator="\n")
        if new:
            w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v)
                        for k, v in row.items()})


def cmd_qcdf(args, out):
    raw = args.lambdas is not None
    pair = args.sigma2 is not None or args.tau2 is not None
    if raw == pair:
        raise UsageError("give either --lambdas, or --sigma2 with --tau2")
    acc = AccuracyParams(args.eps, args.max_terms)
    if raw:
        lam = args.lambdas
        if not lam or any(x <= 0 for x in lam):
            raise UsageError("--lambdas must be positive")
    else:
        if args.sigma2 is None or args.tau2 is None:
            raise UsageError("--sigma2 and --tau2 must be given together")
        if len(args.sigma2) < 2 or any(x <= 0 for x in args.sigma2):
            raise DataError("--sigma2 needs >= 2 positive values")
        if args.tau2 < 0:
            raise DataError("--tau2 must be >= 0")
        lam = eigen_spectrum(args.sigma2, args.tau2).lambdas
    res = wchisq_cdf(lam, args.q, acc)
    out.write(f"P(Q <= {args.q:g}) = {res.prob:.10f}\n")
    out.write(f"error bound = {res.error:.3g}  (terms: {res.terms})\n")
    return res


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate,
            "qcdf": cmd_qcdf}


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        COMMANDS[args.command](args, out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"predmeta: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as exc:
        print(f"predmeta: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"predmeta: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def run(argv=None):
    """Call :func:`main` and return its captured stdout (for scripting)."""
    buf = io.StringIO()
    code = main(argv, buf)
    return code, buf.getvalue()


if __name__ == "__main__":
    sys.exit(main())

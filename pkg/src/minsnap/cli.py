"""Command-line front end.

    minsnap plan --waypoints wp.json --rate 20 --out traj.csv
    minsnap randomwalk --k 10000 --seed 1 --out wp.json
    minsnap cond --t0 10 --t1 12 --n 10 --s 5
    minsnap bench --k 10,20,30,40,50 --method both --reps 3 --out bench.csv

Exit codes: 0 success, 2 bad input, 3 ill-posed problem.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .basis import build_A, build_Gamma, condition_number, numerically_singular
from .bench import DENSE_MAX_K, METHODS, run_bench
from .errors import IllPosedError, ValidationError
from .solver import solve_minimum_snap
from .waypoints import (
    DocumentError,
    TrajectoryTable,
    load_document,
    random_walk_document,
    write_document,
)

log = logging.getLogger("minsnap")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_ILLPOSED = 3


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _solve_channel(name, spec):
    try:
        return solve_minimum_snap(spec)
    except IllPosedError as exc:
        where = f"segment {exc.segment}: " if exc.segment is not None else ""
        raise CliError(f"channel {name}: {where}{exc}", EXIT_ILLPOSED) from exc


def cmd_plan(args) -> int:
    try:
        doc = load_document(args.waypoints)
        problems = doc.problems()
    except ValidationError as exc:
        raise CliError(str(exc), EXIT_INPUT) from exc
    if not args.rate > 0:
        raise CliError(f"--rate must be positive, got {args.rate}", EXIT_INPUT)
    out = Path(args.out)
    report_path = Path(args.report) if args.report else out.with_suffix(".report.json")
    if len({Path(args.waypoints).resolve(), out.resolve(), report_path.resolve()}) < 3:
        raise CliError("--waypoints, --out and the report path must be distinct files", EXIT_INPUT)

    if args.jobs > 1 and len(problems) > 1:
        with ThreadPoolExecutor(args.jobs) as pool:
            futures = {name: pool.submit(_solve_channel, name, spec) for name, spec in problems.items()}
            results = {name: f.result() for name, f in futures.items()}
    else:
        results = {name: _solve_channel(name, spec) for name, spec in problems.items()}

    table = TrajectoryTable.sample({name: sp for name, (sp, _) in results.items()}, args.rate, args.derivatives)
    table.write_csv(out)
    report = {
        "waypoints": str(args.waypoints),
        "rate": args.rate,
        "rows": len(table.times),
        "channels": {name: rep.as_dict() for name, (_, rep) in results.items()},
    }
    report_path.write_text(json.dumps(report, indent=2) + "\n")
    log.info("wrote %s (%d rows) and %s", out, len(table.times), report_path)
    return EXIT_OK


def cmd_randomwalk(args) -> int:
    if args.k < 1:
        raise CliError(f"--k must be >= 1, got {args.k}", EXIT_INPUT)
    write_document(random_walk_document(args.k, args.seed, args.s), args.out)
    return EXIT_OK


def cmd_cond(args) -> int:
    if not args.t0 < args.t1:
        raise CliError(f"need t0 < t1, got t0={args.t0}, t1={args.t1}", EXIT_INPUT)
    if args.n != 2 * args.s:
        raise CliError(f"need n = 2s, got n={args.n}, s={args.s}", EXIT_INPUT)
    delta = (args.t1 - args.t0) / 2.0
    kappa_raw = condition_number(build_A(args.t0, args.t1, args.n, args.s))
    kappa_scaled = condition_number(build_Gamma(delta, args.n, args.s) @ build_A(-1.0, 1.0, args.n, args.s))
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["t0", "t1", "n", "s", "kappa_A", "kappa_scaled", "A_numerically_singular"])
    w.writerow([args.t0, args.t1, args.n, args.s, f"{kappa_raw:.6g}", f"{kappa_scaled:.6g}",
                int(numerically_singular(kappa_raw))])
    return EXIT_OK


def _int_list(text):
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("segment counts must be positive")
    return values


def cmd_bench(args) -> int:
    methods = list(METHODS) if args.method == "both" else [args.method]
    if "dense" in methods and max(args.k) > DENSE_MAX_K:
        raise CliError(f"dense method is capped at k <= {DENSE_MAX_K}, got k={max(args.k)}", EXIT_INPUT)
    if args.reps < 1:
        raise CliError("--reps must be >= 1", EXIT_INPUT)
    rows = run_bench(args.k, methods, args.reps, args.seed, args.s)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "k", "reps", "median_seconds"])
        for row in rows:
            w.writerow([row["method"], row["k"], row["reps"], f"{row['median_seconds']:.12g}"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minsnap", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="solve every channel of a waypoint file and sample it")
    p.add_argument("--waypoints", required=True)
    p.add_argument("--rate", type=float, required=True, help="sample rate in Hz")
    p.add_argument("--out", required=True, help="trajectory CSV")
    p.add_argument("--report", help="JSON report path (default: --out with .report.json suffix)")
    p.add_argument("--derivatives", type=int, choices=(0, 1, 2), default=2)
    p.add_argument("--jobs", type=int, default=1, help="solve channels concurrently")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("randomwalk", help="write a random-walk waypoint file")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--s", type=int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_randomwalk)

    p = sub.add_parser("cond", help="condition numbers of raw and rescaled basis matrices")
    p.add_argument("--t0", type=float, required=True)
    p.add_argument("--t1", type=float, required=True)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--s", type=int, default=5)
    p.set_defaults(func=cmd_cond)

    p = sub.add_parser("bench", help="time solvers on random walks")
    p.add_argument("--k", type=_int_list, required=True, help="comma-separated segment counts")
    p.add_argument("--method", choices=("structured", "dense", "both"), default="structured")
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--s", type=int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"minsnap {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except DocumentError as exc:
        print(f"minsnap {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

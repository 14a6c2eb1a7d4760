"""Command-line interface.

Subcommands: quote, curve, simulate, audit, optimize, compare.
Exit codes: 0 success, 1 validation error, 2 audit failure, 3 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from fractions import Fraction

import numpy as np

from . import kernels
from .errors import ConfigError, ResoptError
from .multiperiod import ThreePeriodParams, incentive_audit
from .pricing import (PricingParams, expected_payment, infer_probability, pay_if_not,
                      pay_if_use, quote, validate_params)
from .scenario import atomic_write, csv_text, fmt, fmt_exact, load_scenario
from .seller import TabulatedDensity, UniformRect, compare_table, optimize_direct, optimize_options
from .sim import run, sample_population, truth_audit

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_AUDIT = 2
EXIT_IO = 3

SIM_HEADER = ["replication", "n_active", "usage", "reserved", "payments",
              "reservation_cost", "shortfall_cost", "profit"]


class CliIOError(Exception):
    pass


def _h(x) -> str:
    """Human-facing number: 4 significant digits."""
    return f"{x:.4g}"


def _write(path, text):
    try:
        atomic_write(path, text)
    except OSError as exc:
        raise CliIOError(f"cannot write {path}: {exc}") from exc


def _params(args):
    return validate_params(args.C, args.k)


def cmd_quote(args):
    params = _params(args)
    if (args.p is None) == (args.premium is None):
        raise ConfigError("give exactly one of --p and --premium", field="p")
    q = args.p if args.p is not None else infer_probability(params, args.premium)
    qt = quote(params, q)
    for name in ("q", "pay_if_use", "pay_if_not", "premium", "strike"):
        print(f"{name} {fmt(getattr(qt, name))}")
    return EXIT_OK


def cmd_curve(args):
    params = _params(args)
    if args.points < 2:
        raise ConfigError(f"--points must be >= 2, got {args.points}", field="points")
    ps = np.linspace(0.0, 1.0, args.points)
    rows = []
    for p in ps:
        f, g = pay_if_use(params, p), pay_if_not(params, p)
        rows.append([fmt(p), fmt(g), fmt(f - g), fmt(f), fmt(g)])
    text = csv_text(["p", "premium", "strike", "pay_if_use", "pay_if_not"], rows)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_simulate(args):
    scenario = load_scenario(args.scenario, seed=args.seed)
    if scenario.config is None:
        raise ConfigError("m_period mechanisms have no simulator; use two_period or three_period",
                          field="mechanism.m_period")
    config = scenario.config
    result = run(config, workers=args.workers)
    rows = [[fmt(getattr(r, name)) for name in SIM_HEADER] for r in result.records]
    text = csv_text(SIM_HEADER, rows)
    if args.users_out:
        cols = sample_population(config, 0)
        names = list(cols)
        user_rows = [[fmt_exact(None if math.isnan(x) else x) for x in vals]
                     for vals in zip(*(cols[n] for n in names))]
        _write(args.users_out, csv_text(names, user_rows))
    if args.out:
        _write(args.out, text)
    s = result.summary()
    lines = [
        f"replications          {s['replications']}",
        f"n_users               {s['n_users']}",
        f"mean profit per user  {_h(s['mean_profit_per_user'])}",
        f"std profit per user   {_h(s['std_profit_per_user'])}",
        f"95% CI                [{_h(s['ci95_low'])}, {_h(s['ci95_high'])}]",
        f"payment margin/user   {_h(s['margin_per_user'])} +/- {_h(s['margin_se'])} (s.e.)",
        f"P(profit > 0)         {_h(s['frac_profitable'])}",
    ]
    summary = "\n".join(lines) + "\n"
    if args.summary_out:
        _write(args.summary_out, summary)
    sys.stdout.write(summary)
    return EXIT_OK


def _bound_violations(params, step=1e-3):
    p = np.linspace(0.0, 1.0, int(round(1 / step)) + 1)
    f, g, w = pay_if_use(params, p), pay_if_not(params, p), expected_payment(params, p)
    bad = 0
    bad += int(np.sum(np.diff(f) >= 0.0))
    bad += int(np.sum(np.diff(g) < 0.0))
    bad += int(np.sum(f < g))
    bad += int(np.sum(w < p))
    bad += int(np.sum(w > np.minimum(1.0, params.C * p)))
    bad += int(f[-1] != 1.0) + int(g[0] != 0.0)
    return bad


def cmd_audit(args):
    if args.alpha is not None:
        three = ThreePeriodParams(args.C, args.k, args.alpha)
        params = PricingParams(three.C, three.k)
    else:
        three = None
        params = _params(args)
    p_grid = [round(0.05 * i, 10) for i in range(21)]
    ta = truth_audit(params, p_grid, args.grid_step)
    results = [("truth-telling", ta.passed,
                f"max |argmin - p| = {_h(max(abs(r.best_q - r.p) for r in ta.rows))} over {len(ta.rows)} rows")]
    bad = _bound_violations(params)
    results.append(("payment bounds", bad == 0, f"{bad} violations on a 1e-3 grid"))
    if three is not None:
        la = incentive_audit(three.C, three.k, n_samples=args.samples, seed=args.seed,
                         grid_step=args.grid_step, alpha=three.alpha)
        results += [
            ("adjusting is weakly better", la.adjust == 0, f"{la.adjust} violations / {la.n_samples}"),
            ("period-1 truth-telling", la.period1 == 0, f"{la.period1} violations / {la.n_samples}"),
            ("report twice beats waiting", la.twice == 0, f"{la.twice} violations / {la.n_samples}"),
            ("coordinator margin", la.margin == 0, f"{la.margin} violations / {la.n_samples}"),
        ]
    rows = [[name, "PASS" if ok else "FAIL", detail] for name, ok, detail in results]
    width = max(len(r[0]) for r in rows)
    for name, status, detail in rows:
        print(f"{name:<{width}}  {status}  {detail}")
    if args.out:
        _write(args.out, csv_text(["check", "result", "detail"], rows))
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_AUDIT


def _parse_number(text, where):
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{where}: cannot parse {text!r} as a number", field=where) from exc


def _density(args):
    if args.uniform_p is not None and args.density_file is not None:
        raise ConfigError("give only one of --uniform-p and --density-file", field="density")
    if args.density_file is None:
        a, b = args.uniform_p if args.uniform_p is not None else (0.0, 1.0)
        return UniformRect(a, b)
    try:
        with open(args.density_file, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise CliIOError(f"cannot read {args.density_file}: {exc}") from exc
    if not rows or [c.strip() for c in rows[0]] != ["p", "weight"]:
        raise ConfigError(f"{args.density_file}: header must be 'p,weight'", field="density_file")
    ps, ws = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise ConfigError(f"{args.density_file}: row {lineno}: expected 2 fields", field="density_file")
        ps.append(_parse_number(row[0], f"row {lineno}"))
        ws.append(_parse_number(row[1], f"row {lineno}"))
    return TabulatedDensity.from_p_marginal(ps, ws)


def cmd_optimize(args):
    dist = _density(args)
    solve = optimize_direct if args.scheme == "direct" else optimize_options
    opt, grid = solve(dist, grid_step=args.grid_step, return_grid=True)
    second = "C2" if args.scheme == "direct" else "k"
    print(f"scheme {args.scheme}")
    print(f"C1 {_h(opt.x)}")
    print(f"{second} {_h(opt.y)}")
    print(f"R {_h(opt.revenue)}")
    if args.out:
        _write(args.out, csv_text(["scheme", "C1", second, "revenue"],
                                  [[args.scheme, fmt(opt.x), fmt(opt.y), fmt(opt.revenue)]]))
    if args.grid_out:
        _write(args.grid_out, csv_text(["C1", second, "revenue"],
                                       [[fmt(x) for x in row] for row in grid]))
    return EXIT_OK


def _read_intervals(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise CliIOError(f"cannot read {path}: {exc}") from exc
    intervals = []
    for lineno, row in enumerate(rows, start=1):
        cells = [c.strip() for c in row]
        if not cells or all(c == "" for c in cells) or cells[0].startswith("#"):
            continue
        if lineno == 1 and cells == ["a", "b"]:
            continue
        if len(cells) != 2:
            raise ConfigError(f"row {lineno}: expected 'a,b', got {row!r}", field=f"row {lineno}")
        a = _parse_number(cells[0], f"row {lineno}")
        b = _parse_number(cells[1], f"row {lineno}")
        if not (0.0 <= a <= b <= 1.0):
            raise ConfigError(f"row {lineno}: need 0 <= a <= b <= 1, got a={a}, b={b}",
                              field=f"row {lineno}")
        intervals.append((a, b))
    return intervals


def cmd_compare(args):
    intervals = _read_intervals(args.intervals)
    rows = [[fmt(r.a), fmt(r.b), fmt(r.direct), fmt(r.options), r.winner]
            for r in compare_table(intervals)]
    text = csv_text(["a", "b", "direct", "options", "winner"], rows)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _add_params(p):
    p.add_argument("--C", type=float, required=True, help="spot-to-advance price ratio (> 1)")
    p.add_argument("--k", type=float, required=True, help="curvature of the payment curves")


class _Parser(argparse.ArgumentParser):
    # usage mistakes are validation errors (exit 1); 2 is reserved for audit failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="resopt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s (kernels: {kernels.BACKEND})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("quote", help="price a contract for a probability or a premium")
    _add_params(p)
    p.add_argument("--p", type=float, help="reported use probability")
    p.add_argument("--premium", type=float, help="chosen premium; the probability is inferred")
    p.set_defaults(func=cmd_quote)

    p = sub.add_parser("curve", help="export the price-premium curve as CSV")
    _add_params(p)
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("simulate", help="run a scenario file through the coordinator game")
    p.add_argument("scenario", help="YAML or JSON scenario file")
    p.add_argument("--out", help="per-replication CSV")
    p.add_argument("--summary-out", help="also write the summary block here")
    p.add_argument("--users-out", help="write the replication-0 population as a user-list CSV")
    p.add_argument("--seed", type=int, default=None, help="override run.seed (default 0)")
    p.add_argument("--workers", type=int, default=1, help="threads for replications")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("audit", help="truth-telling and incentive property checks")
    _add_params(p)
    p.add_argument("--alpha", type=float, help="friction parameter; audits the three-period contract")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--grid-step", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="also write the table as CSV")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("optimize", help="maximise seller revenue for one scheme")
    p.add_argument("--scheme", choices=("direct", "options"), required=True)
    p.add_argument("--uniform-p", type=float, nargs=2, metavar=("A", "B"),
                   help="p uniform on [A, B] with v uniform on [0, 1] (default 0 1)")
    p.add_argument("--density-file", help="CSV with columns p,weight (v uniform on [0, 1])")
    p.add_argument("--grid-step", type=float, default=0.01)
    p.add_argument("--out", help="optimum record CSV")
    p.add_argument("--grid-out", help="evaluation grid CSV")
    p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; the search is deterministic")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("compare", help="direct selling vs options over p-intervals")
    p.add_argument("--intervals", required=True, help="CSV of a,b rows (fractions like 1/3 allowed)")
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # --help, --version or a usage error
        return exc.code
    try:
        return args.func(args)
    except CliIOError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        where = f" [{exc.field}]" if exc.field else ""
        print(f"error{where}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ResoptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

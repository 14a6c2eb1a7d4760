"""Acceptance criteria, each at its stated tolerance and time budget.

Run under pytest (a summary block lists one PASS/FAIL line per criterion) or
directly with ``python3 tests/test_acceptance.py``.
"""
import functools
import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from resopt import cli
from resopt.multiperiod import (Both, MPeriodContract, ThreePeriodParams, incentive_audit, mperiod_execute,
                                option_form_payment, payment)
from resopt.pricing import (PricingParams, curvature_window, expected_payment, pay_if_not, pay_if_use,
                            report_cost, submission_grid, uniform_time_bundle)
from resopt.seller import REFERENCE_INTERVALS, UniformRect, compare_table, optimize_direct, optimize_options
from resopt.sim import SimConfig, UniformP, run

ROOT = Path(__file__).resolve().parents[1]
RESULTS = []

PRINTED = [
    (0.208, 0.208), (0.167, 0.197), (0.250, 0.248),
    (0.130, 0.183), (0.245, 0.246), (0.250, 0.250),
    (0.087, 0.141), (0.248, 0.249), (0.250, 0.250),
]


def criterion(number, title, budget=None):
    def wrap(check):
        @functools.wraps(check)
        def test():
            start = time.perf_counter()
            try:
                detail = check()
                elapsed = time.perf_counter() - start
                if budget is not None:
                    assert elapsed < budget, f"took {elapsed:.1f}s, budget {budget}s"
            except AssertionError as exc:
                RESULTS.append(f"[FAIL] {number:>2}. {title}: {exc}")
                raise
            RESULTS.append(f"[PASS] {number:>2}. {title}: {detail} ({elapsed:.2f}s)")
        return test
    return wrap


@criterion(1, "direct-selling optimum", budget=5)
def test_c01_direct_optimum():
    opt = optimize_direct(UniformRect(0.0, 1.0))
    assert abs(opt.revenue - 5 / 24) <= 1e-4, opt
    assert abs(opt.C1 - 0.5) <= 0.01, opt
    assert opt.C2 == 1.0, opt
    return f"C1={opt.C1:.6f} C2={opt.C2} R={opt.revenue:.8f}"


@criterion(2, "option optimum", budget=5)
def test_c02_option_optimum():
    opt = optimize_options(UniformRect(0.0, 1.0))
    assert abs(opt.revenue - 5 / 24) <= 1e-4, opt
    assert abs(opt.C1 - 0.625) <= 0.01, opt
    assert opt.k == 2.0, opt
    return f"C1={opt.C1:.6f} k={opt.k} R={opt.revenue:.8f}"


@criterion(3, "revenue table, nine intervals", budget=60)
def test_c03_revenue_table():
    rows = compare_table(REFERENCE_INTERVALS)
    worst = 0.0
    for row, (direct, options) in zip(rows, PRINTED):
        for got, want in ((row.direct, direct), (row.options, options)):
            worst = max(worst, abs(got - want))
            assert abs(got - want) <= 0.002, (row, direct, options)
    return f"max |diff| = {worst:.5f}"


@criterion(4, "two-period truth-telling")
def test_c04_truth_telling():
    grid = submission_grid(1e-3)
    ps = [round(0.05 * i, 10) for i in range(1, 20)]
    worst_q = worst_pen = 0.0
    for C, k in ((2.0, 1.5), (2.0, 1.0), (5.0, 2.0)):
        params = PricingParams(C, k)
        for p in ps:
            costs = report_cost(params, p, grid)
            best = grid[np.argmin(costs)]
            worst_q = max(worst_q, abs(best - p))
            assert abs(best - p) <= 1e-3, (C, k, p, best)
            penalty = costs - report_cost(params, p, p)
            err = np.max(np.abs(penalty - k / 2 * (grid - p) ** 2))
            worst_pen = max(worst_pen, err)
            assert err <= 1e-9, (C, k, p, err)
    return f"max |argmin - p| = {worst_q:.1e}, max penalty error = {worst_pen:.1e}"


@criterion(5, "payment bound suite")
def test_c05_bounds():
    rng = np.random.default_rng(2024)
    p = np.linspace(0.0, 1.0, 1001)
    violations = 0
    for _ in range(100):
        C = 1.5 + 8.5 * rng.random()
        lo, hi = curvature_window(C)
        params = PricingParams(C, lo + (hi - lo) * rng.random())
        f, g, w = pay_if_use(params, p), pay_if_not(params, p), expected_payment(params, p)
        violations += int(np.sum(w < p)) + int(np.sum(w > np.minimum(1.0, C * p)))
        violations += int(np.sum(np.diff(f) >= 0.0)) + int(np.sum(f < g))
        violations += int(f[-1] != 1.0) + int(g[0] != 0.0)
    assert violations == 0, f"{violations} violations"
    return "0 violations over 100 random (C, k)"


@criterion(6, "time-bundle example")
def test_c06_time_bundle():
    _, total = uniform_time_bundle(PricingParams(3.0, 2.0), 30)
    assert abs(total - (2 - 1 / 30)) <= 1e-12, total
    return f"total = {total!r}"


@criterion(7, "three-period incentive properties", budget=120)
def test_c07_incentive_properties():
    details = []
    for C in (2.0, 3.0):
        audit = incentive_audit(C, 1.0, n_samples=10_000, seed=int(C), grid_step=1e-3)
        counts = (audit.adjust, audit.period1, audit.twice, audit.margin)
        assert counts == (0, 0, 0, 0), audit
        details.append(f"C={C:g}: 0/0/0/0 of {audit.n_samples}")
    return "; ".join(details)


@criterion(8, "contract/option equivalence")
def test_c08_equivalence():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100_000):
        C = 1.5 + 2.5 * rng.random()
        lo, hi = curvature_window(C)
        params = ThreePeriodParams(C, lo + (hi - lo) * rng.random(), rng.uniform(0.001, 0.999) / C)
        q1, q2 = rng.random(2)
        uses = bool(rng.random() < 0.5)
        table = payment(params, Both(q1, q2), uses)
        option = option_form_payment(params, q1, q2, uses)
        multi = mperiod_execute(params, MPeriodContract(params.swap_share, 3, (q1, q2)), uses)
        worst = max(worst, abs(table - option), abs(multi - table))
    assert worst <= 1e-12, worst
    return f"max |diff| = {worst:.1e} over 1e5 draws"


@criterion(9, "Monte Carlo consistency", budget=60)
def test_c09_monte_carlo():
    params = PricingParams(2.0, 1.5)
    res = run(SimConfig(params, UniformP(0.0, 1.0), n_users=10_000, replications=100, seed=0))
    mean, se = res.margin_per_user
    assert abs(mean - params.k / 12) <= 3 * se, (mean, se)
    assert res.frac_profitable == 1.0, res.frac_profitable
    return f"margin {mean:.5f} +/- {se:.5f} vs 0.125, P(profit > 0) = {res.frac_profitable}"


@criterion(10, "byte-identical reruns")
def test_c10_determinism():
    scenario = ROOT / "scenarios" / "two_period_uniform.yaml"
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        blobs = []
        for i in range(2):
            files = [tmp / f"{name}{i}.csv" for name in ("sim", "summary", "users", "opt", "grid")]
            assert cli.main(["simulate", str(scenario), "--seed", "7", "--out", str(files[0]),
                             "--summary-out", str(files[1]), "--users-out", str(files[2]),
                             "--workers", str(1 + 3 * i)]) == 0
            assert cli.main(["optimize", "--scheme", "options", "--uniform-p", "0", "0.5", "--seed", "7",
                             "--out", str(files[3]), "--grid-out", str(files[4])]) == 0
            blobs.append([f.read_bytes() for f in files])
        assert blobs[0] == blobs[1]
    return "simulate and optimize outputs identical"


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_c"):
            try:
                fn()
            except AssertionError:
                failed += 1
    for line in RESULTS:
        print(line)
    sys.exit(1 if failed else 0)

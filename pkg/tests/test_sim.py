import math

import numpy as np
import pytest

from resopt import kernels
from resopt.errors import ConfigError, DomainError
from resopt.multiperiod import InfoStructure, ThreePeriodParams, expected_cost_both, w1
from resopt.pricing import PricingParams, expected_payment
from resopt.sim import (FixedReport, GridOptimizer, InfoList, SimConfig, ThreePeriodUser, TwoPeriodUser, UniformInfo,
                        UniformP, UserList, profit_convergence, run, sample_population, truth_audit)

TWO = PricingParams(2.0, 1.5)
THREE = ThreePeriodParams(2.0, 1.0, 0.25)


def _cfg(**kw):
    base = dict(mechanism=TWO, population=UniformP(0.0, 1.0), n_users=2000, replications=20, seed=1)
    base.update(kw)
    return SimConfig(**base)


@pytest.mark.parametrize("p", [0.0, 1.0])
def test_degenerate_users_break_even(p):
    res = run(_cfg(population=UserList([TwoPeriodUser(p)]), n_users=500, replications=3))
    for r in res.records:
        assert r.profit == 0.0
        assert r.shortfall_cost == 0.0
        assert r.usage == (500 if p == 1.0 else 0)


def test_accounting_identity():
    for cfg in (_cfg(), SimConfig(THREE, UniformInfo(), n_users=1000, replications=5, seed=3)):
        for r in run(cfg).records:
            assert r.profit == pytest.approx(r.payments - r.reservation_cost - r.shortfall_cost, abs=1e-9)
            assert r.shortfall_cost >= 0.0


def test_two_period_reservation_is_reported_total():
    cfg = _cfg(replications=1)
    pop = sample_population(cfg)
    r = run(cfg).records[0]
    assert r.reserved == pytest.approx(pop["p"].sum(), rel=1e-12)
    assert r.reservation_cost == r.reserved


def test_deterministic_across_workers_and_backends():
    cfg = _cfg()
    a = run(cfg).records
    assert run(cfg).records == a
    assert run(cfg, workers=4).records == a
    for name in kernels.available():
        assert run(cfg, backend=name).records == a
    assert run(_cfg(seed=2)).records != a


def test_three_period_deterministic_across_backends():
    cfg = SimConfig(THREE, UniformInfo(with_values=True), n_users=3000, replications=4, seed=8)
    ref = run(cfg, backend="numpy").records
    for name in kernels.available():
        assert run(cfg, backend=name, workers=3).records == ref


def test_grid_strategy_matches_truthful_on_grid_points():
    users = UserList([TwoPeriodUser(p) for p in (0.1, 0.25, 0.5, 0.75, 0.9)])
    truthful = run(_cfg(population=users, n_users=None, replications=5))
    grid = run(_cfg(population=users, n_users=None, replications=5, strategy=GridOptimizer(1e-3)))
    assert [r.payments for r in grid.records] == pytest.approx([r.payments for r in truthful.records], abs=1e-9)


def test_misreporting_costs_users_more():
    users = UserList([TwoPeriodUser(0.3)])
    honest = run(_cfg(population=users, replications=200))
    liar = run(_cfg(population=users, replications=200, strategy=FixedReport(0.6)))
    pay_h = np.mean([r.payments for r in honest.records]) / honest.n_users
    pay_l = np.mean([r.payments for r in liar.records]) / liar.n_users
    assert pay_h == pytest.approx(expected_payment(TWO, 0.3), abs=0.005)
    gap = TWO.k / 2 * 0.3 ** 2
    assert pay_l - pay_h == pytest.approx(gap, abs=0.005)


def test_margin_estimate_is_calibrated():
    # across seeds the standardized error of the k/12 estimate should look N(0, 1)
    z = []
    for seed in range(60):
        mean, se = run(_cfg(n_users=2000, replications=20, seed=seed)).margin_per_user
        z.append((mean - TWO.k / 12) / se)
    z = np.array(z)
    assert abs(z.mean()) < 0.5
    assert 0.7 < z.std() < 1.4
    assert np.mean(np.abs(z) <= 3) >= 0.95


def test_users_with_low_values_opt_out():
    users = UserList([TwoPeriodUser(0.5, v=0.1), TwoPeriodUser(0.5, v=0.9)])
    res = run(_cfg(population=users, n_users=2, replications=1))
    assert res.records[0].n_active == 1


def test_uniform_population_with_values_drops_some_users():
    res = run(_cfg(population=UniformP(0, 1, with_values=True), replications=1))
    r = res.records[0]
    assert 0 < r.n_active < 2000


def test_three_period_payment_matches_expected_cost():
    info = InfoStructure(0.7, 0.6, 0.2)
    cfg = SimConfig(THREE, InfoList([ThreePeriodUser(info)]), n_users=10_000, replications=30, seed=0)
    res = run(cfg)
    pay = np.array([r.payments for r in res.records]) / cfg.n_users
    c12 = expected_cost_both(THREE, info, info.prior)
    assert c12 == pytest.approx(0.5964, abs=1e-12)
    assert abs(pay.mean() - c12) <= 3 * pay.std(ddof=1) / math.sqrt(len(pay))


def test_three_period_without_information_collapses():
    # p21 == p22: the revision carries no news, so payments average w1(p)
    info = InfoStructure(0.4, 0.35, 0.35)
    cfg = SimConfig(THREE, InfoList([ThreePeriodUser(info)]), n_users=10_000, replications=30, seed=4)
    res = run(cfg)
    pay = np.array([r.payments for r in res.records]) / cfg.n_users
    assert abs(pay.mean() - w1(THREE, 0.35)) <= 3 * pay.std(ddof=1) / math.sqrt(len(pay))
    for r in res.records:
        assert r.reservation_cost == pytest.approx(r.reserved, rel=1e-12)


def test_resale_never_hurts_the_coordinator():
    base = dict(mechanism=THREE, population=UniformInfo(), n_users=2000, replications=10, seed=6)
    forfeit = run(SimConfig(cost_model="forfeit", **base)).records
    resale = run(SimConfig(cost_model="resale", **base)).records
    for a, b in zip(forfeit, resale):
        assert b.profit >= a.profit
        assert b.payments == a.payments


def test_config_errors_name_the_field():
    cases = [
        (dict(n_users=0), "n_users"),
        (dict(replications=0), "replications"),
        (dict(seed=-1), "seed"),
        (dict(cost_model="refund"), "cost_model"),
        (dict(strategy=FixedReport(1.5)), "strategy.q"),
        (dict(strategy=GridOptimizer(0.05)), "strategy.step"),
        (dict(population=UniformP(0.8, 0.2)), "population.a"),
        (dict(population=UniformInfo()), "population"),
        (dict(population=UserList([TwoPeriodUser(0.5)] * 3), n_users=10), "n_users"),
        (dict(population=UserList([TwoPeriodUser(1.2)]), n_users=1), "users[0].p"),
    ]
    for kw, field in cases:
        with pytest.raises(ConfigError) as err:
            _cfg(**kw)
        assert err.value.field == field, kw


def test_truth_audit():
    audit = truth_audit(TWO, np.round(np.arange(0.05, 1.0, 0.05), 12), q_grid_step=0.01)
    assert audit.passed
    for row in audit.rows:
        assert row.best_q == pytest.approx(row.p, abs=1e-12)
        assert row.misreport_penalty == pytest.approx(TWO.k / 2 * 0.01 ** 2, abs=1e-12)
    with pytest.raises(DomainError):
        truth_audit(TWO, [0.5], q_grid_step=0.1)


def test_profit_becomes_reliable_with_scale():
    rows = profit_convergence(TWO, [10, 1000, 10_000], replications=100, seed=0)
    fracs = [r.frac_profitable for r in rows]
    assert fracs == sorted(fracs)
    assert fracs[-1] == 1.0
    per_user = [r.mean_profit_per_user for r in rows]
    assert per_user == sorted(per_user)
    assert per_user[-1] < TWO.k / 12


def test_truth_audit_edges():
    audit = truth_audit(TWO, [0.0, 0.5], q_grid_step=1e-3)
    assert audit.rows[0].best_q == 0.0
    assert audit.rows[1].best_q == pytest.approx(0.5, abs=1e-12)
    from resopt.pricing import misreport_penalty
    for q in (0.4, 0.6):
        assert misreport_penalty(TWO, 0.5, q) == pytest.approx(0.0075, abs=1e-12)


def test_usage_and_payments_track_their_means():
    res = run(_cfg(n_users=10_000, replications=50, seed=11))
    n = res.n_users
    usage = np.array([r.usage for r in res.records]) / n
    pay = np.array([r.payments for r in res.records]) / n
    for series, target in ((usage, 0.5), (pay, 0.5 + TWO.k / 12)):
        se = series.std(ddof=1) / math.sqrt(len(series))
        assert abs(series.mean() - target) <= 4 * se


def test_profit_grows_linearly_in_n():
    rows = profit_convergence(TWO, [1000, 10_000], replications=100, seed=2)
    slope = (rows[1].mean_profit - rows[0].mean_profit) / (10_000 - 1000)
    # payment-side margin k/12 minus a shortfall term that shrinks per user
    assert 0.11 < slope < TWO.k / 12


def test_single_user_with_zero_probability():
    rows = profit_convergence(TWO, [1], replications=20, population=UserList([TwoPeriodUser(0.0)]))
    assert rows[0].mean_profit == 0.0 and rows[0].frac_profitable == 0.0

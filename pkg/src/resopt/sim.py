"""Monte Carlo coordinator games.

Each replication draws a user population, collects reports according to a
strategy, reserves the reported total at the advance price, realises usage
and settles payments.  Randomness is counter based: every (seed, replication,
user, purpose) tuple hashes to its own uniform draw, so results do not
depend on evaluation order, on the number of worker threads or on the kernel
backend.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Sequence, Union

import numpy as np

from . import kernels
from .errors import ConfigError, DomainError
from .multiperiod import InfoStructure, ThreePeriodParams
from .pricing import PricingParams, report_cost, submission_grid

__all__ = [
    "Truthful",
    "FixedReport",
    "GridOptimizer",
    "TwoPeriodUser",
    "ThreePeriodUser",
    "UniformP",
    "UniformInfo",
    "UserList",
    "InfoList",
    "SimConfig",
    "ReplicationRecord",
    "SimResult",
    "COST_MODELS",
    "run",
    "sample_population",
    "run_two_period",
    "run_three_period",
    "AuditRow",
    "TruthAudit",
    "truth_audit",
    "ConvergenceRow",
    "profit_convergence",
]

COST_MODELS = ("forfeit", "resale")
_Z95 = NormalDist().inv_cdf(0.975)


@dataclass(frozen=True)
class Truthful:
    pass


@dataclass(frozen=True)
class FixedReport:
    q: float


@dataclass(frozen=True)
class GridOptimizer:
    """Each user brute-forces the cheapest report on a grid."""

    step: float = 1e-3


Strategy = Union[Truthful, FixedReport, GridOptimizer]


@dataclass(frozen=True)
class TwoPeriodUser:
    p: float
    v: float | None = None


@dataclass(frozen=True)
class ThreePeriodUser:
    info: InfoStructure
    v: float | None = None


@dataclass(frozen=True)
class UniformP:
    """Use probabilities uniform on ``[a, b]``; values uniform on [0, 1] when
    ``with_values`` is set."""

    a: float = 0.0
    b: float = 1.0
    with_values: bool = False


@dataclass(frozen=True)
class UniformInfo:
    """``p1``, ``p21`` and ``p22`` independently uniform on [0, 1]."""

    with_values: bool = False


@dataclass(frozen=True)
class UserList:
    users: tuple

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))


@dataclass(frozen=True)
class InfoList:
    users: tuple

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))


Population = Union[UniformP, UniformInfo, UserList, InfoList]


def _check_unit(x, name):
    if not (isinstance(x, (int, float)) and 0.0 <= x <= 1.0):
        raise ConfigError(f"{name} must lie in [0, 1], got {x!r}", field=name)


@dataclass(frozen=True)
class SimConfig:
    mechanism: PricingParams | ThreePeriodParams
    population: Population
    n_users: int | None = None
    replications: int = 1
    seed: int = 0
    cost_model: str = "forfeit"
    strategy: Strategy = field(default_factory=Truthful)

    def __post_init__(self):
        pop = self.population
        if isinstance(pop, (UserList, InfoList)):
            if not pop.users:
                raise ConfigError("user list is empty", field="population")
            if self.n_users is None:
                object.__setattr__(self, "n_users", len(pop.users))
            elif self.n_users != len(pop.users) and len(pop.users) != 1:
                raise ConfigError(
                    f"n_users={self.n_users} does not match {len(pop.users)} listed users",
                    field="n_users",
                )
        if self.n_users is None or int(self.n_users) != self.n_users or self.n_users < 1:
            raise ConfigError(f"n_users must be a positive integer, got {self.n_users!r}", field="n_users")
        if int(self.replications) != self.replications or self.replications < 1:
            raise ConfigError(
                f"replications must be a positive integer, got {self.replications!r}", field="replications"
            )
        if int(self.seed) != self.seed or not (0 <= self.seed < 2 ** 64):
            raise ConfigError(f"seed must be an integer in [0, 2^64), got {self.seed!r}", field="seed")
        if self.cost_model not in COST_MODELS:
            raise ConfigError(f"cost_model must be one of {COST_MODELS}, got {self.cost_model!r}",
                              field="cost_model")
        self._check_strategy()
        self._check_population()

    def _check_strategy(self):
        s = self.strategy
        if isinstance(s, FixedReport):
            _check_unit(s.q, "strategy.q")
        elif isinstance(s, GridOptimizer):
            if not (0.0 < s.step <= 0.01):
                raise ConfigError(f"grid step must lie in (0, 0.01], got {s.step!r}", field="strategy.step")
        elif not isinstance(s, Truthful):
            raise ConfigError(f"unknown strategy {s!r}", field="strategy")

    def _check_population(self):
        pop = self.population
        two = isinstance(self.mechanism, PricingParams)
        if not two and not isinstance(self.mechanism, ThreePeriodParams):
            raise ConfigError(f"unsupported mechanism {self.mechanism!r}", field="mechanism")
        if isinstance(pop, UniformP):
            _check_unit(pop.a, "population.a")
            _check_unit(pop.b, "population.b")
            if pop.a > pop.b:
                raise ConfigError(f"population interval has a={pop.a} > b={pop.b}", field="population.a")
            if not two:
                raise ConfigError("uniform_p populations need a two-period mechanism", field="population")
        elif isinstance(pop, UniformInfo):
            if two:
                raise ConfigError("uniform_info populations need a three-period mechanism", field="population")
        elif isinstance(pop, UserList):
            if not two:
                raise ConfigError("user lists need a two-period mechanism", field="population")
            for i, u in enumerate(pop.users):
                _check_unit(u.p, f"users[{i}].p")
                if u.v is not None:
                    _check_unit(u.v, f"users[{i}].v")
        elif isinstance(pop, InfoList):
            if two:
                raise ConfigError("info-structure lists need a three-period mechanism", field="population")
            for i, u in enumerate(pop.users):
                for name in ("p1", "p21", "p22"):
                    _check_unit(getattr(u.info, name), f"users[{i}].{name}")
                if u.v is not None:
                    _check_unit(u.v, f"users[{i}].v")
        else:
            raise ConfigError(f"unknown population {pop!r}", field="population")


@dataclass(frozen=True)
class ReplicationRecord:
    replication: int
    n_active: int
    usage: int
    reserved: float
    payments: float
    reservation_cost: float
    shortfall_cost: float
    profit: float


@dataclass
class SimResult:
    n_users: int
    records: list[ReplicationRecord]

    def _per_user(self, values):
        return np.asarray(values, dtype=float) / self.n_users

    @property
    def profits_per_user(self) -> np.ndarray:
        return self._per_user([r.profit for r in self.records])

    @property
    def margins_per_user(self) -> np.ndarray:
        """Payments minus reservation cost, per user (shortfall excluded)."""
        return self._per_user([r.payments - r.reservation_cost for r in self.records])

    @staticmethod
    def _mean_se(x):
        mean = float(np.mean(x))
        if len(x) < 2:
            return mean, 0.0, 0.0
        std = float(np.std(x, ddof=1))
        return mean, std, std / math.sqrt(len(x))

    @property
    def mean_profit_per_user(self) -> float:
        return self._mean_se(self.profits_per_user)[0]

    @property
    def std_profit_per_user(self) -> float:
        return self._mean_se(self.profits_per_user)[1]

    @property
    def ci95(self) -> tuple[float, float]:
        mean, _, se = self._mean_se(self.profits_per_user)
        return mean - _Z95 * se, mean + _Z95 * se

    @property
    def margin_per_user(self) -> tuple[float, float]:
        """(mean, standard error) of the payment-side margin per user."""
        mean, _, se = self._mean_se(self.margins_per_user)
        return mean, se

    @property
    def frac_profitable(self) -> float:
        return float(np.mean([r.profit > 0.0 for r in self.records]))

    def summary(self) -> dict:
        lo, hi = self.ci95
        margin, margin_se = self.margin_per_user
        return {
            "replications": len(self.records),
            "n_users": self.n_users,
            "mean_profit_per_user": self.mean_profit_per_user,
            "std_profit_per_user": self.std_profit_per_user,
            "ci95_low": lo,
            "ci95_high": hi,
            "margin_per_user": margin,
            "margin_se": margin_se,
            "frac_profitable": self.frac_profitable,
        }


def _value_array(users):
    return np.array([np.nan if u.v is None else u.v for u in users], dtype=float)


def _broadcast(arr, n):
    return np.broadcast_to(arr, (n,)).copy() if len(arr) == 1 else arr


def _two_period_population(config, kern, rep):
    n, pop = config.n_users, config.population
    if isinstance(pop, UniformP):
        p = pop.a + (pop.b - pop.a) * kern.uniforms(config.seed, rep, n, kernels.SLOT_P)
        v = (kern.uniforms(config.seed, rep, n, kernels.SLOT_V) if pop.with_values
             else np.full(n, np.nan))
    else:
        p = _broadcast(np.array([u.p for u in pop.users], dtype=float), n)
        v = _broadcast(_value_array(pop.users), n)
    return np.ascontiguousarray(p), v


def _three_period_population(config, kern, rep):
    n, pop = config.n_users, config.population
    if isinstance(pop, UniformInfo):
        p1, p21, p22 = (kern.uniforms(config.seed, rep, n, slot)
                        for slot in (kernels.SLOT_P1, kernels.SLOT_P21, kernels.SLOT_P22))
        v = (kern.uniforms(config.seed, rep, n, kernels.SLOT_V) if pop.with_values
             else np.full(n, np.nan))
    else:
        p1, p21, p22 = (
            _broadcast(np.array([getattr(u.info, name) for u in pop.users], dtype=float), n)
            for name in ("p1", "p21", "p22")
        )
        v = _broadcast(_value_array(pop.users), n)
    return [np.ascontiguousarray(x) for x in (p1, p21, p22)], v


def sample_population(config: SimConfig, rep: int = 0, backend: str | None = None) -> dict:
    """The user population drawn for replication ``rep`` as column arrays.

    Columns are ``p, v`` (two-period) or ``p1, p21, p22, v`` (three-period);
    ``v`` is NaN for users without a value.
    """
    kern = kernels.get(backend)
    if isinstance(config.mechanism, ThreePeriodParams):
        (p1, p21, p22), v = _three_period_population(config, kern, rep)
        return {"p1": p1, "p21": p21, "p22": p22, "v": v}
    p, v = _two_period_population(config, kern, rep)
    return {"p": p, "v": v}


def _reports(strategy, p, k, kern):
    if isinstance(strategy, Truthful):
        return p.copy()
    if isinstance(strategy, FixedReport):
        return np.full(len(p), float(strategy.q))
    return kern.grid_argmin(np.ascontiguousarray(p), k, submission_grid(strategy.step))


def _active(v, cost):
    # users who carry a value opt out when it is below their expected cost
    return (np.isnan(v) | (v >= cost)).astype(np.uint8)


def _two_period_rep(config, kern, rep):
    params = config.mechanism
    p, v = _two_period_population(config, kern, rep)
    q = _reports(config.strategy, p, params.k, kern)
    active = _active(v, report_cost(params, p, q))
    usage, payments, reserved = kern.two_period_rep(
        config.seed, rep, p, q, active, params.k, kernels.SLOT_USE)
    reservation_cost = reserved
    shortfall_cost = params.C * max(0.0, usage - reserved)
    return ReplicationRecord(
        replication=rep,
        n_active=int(active.sum()),
        usage=int(usage),
        reserved=reserved,
        payments=payments,
        reservation_cost=reservation_cost,
        shortfall_cost=shortfall_cost,
        profit=payments - reservation_cost - shortfall_cost,
    )


def _three_period_rep(config, kern, rep):
    params = config.mechanism
    (p1, p21, p22), v = _three_period_population(config, kern, rep)
    k, C, alpha = params.k, params.C, params.alpha
    prior = p1 * p21 + (1.0 - p1) * p22
    strategy = config.strategy
    q1 = _reports(strategy, prior, k, kern)
    q2a = _reports(strategy, p21, k, kern)
    q2b = _reports(strategy, p22, k, kern)
    s = alpha * C
    two = PricingParams(C, k)
    cost = ((1.0 - s) * report_cost(two, prior, q1)
            + s * (p1 * report_cost(two, p21, q2a) + (1.0 - p1) * report_cost(two, p22, q2b)))
    active = _active(v, cost)
    usage, payments, res1, res2 = kern.three_period_rep(
        config.seed, rep, p1, p21, p22, q1, q2a, q2b, active, k, C, alpha,
        kernels.SLOT_STATE, kernels.SLOT_USE)
    change = res2 - res1
    reservation_cost = res1 + C * max(0.0, change)
    if config.cost_model == "resale":
        reservation_cost -= max(0.0, -change)
    shortfall_cost = C * C * max(0.0, usage - res2)
    return ReplicationRecord(
        replication=rep,
        n_active=int(active.sum()),
        usage=int(usage),
        reserved=res2,
        payments=payments,
        reservation_cost=reservation_cost,
        shortfall_cost=shortfall_cost,
        profit=payments - reservation_cost - shortfall_cost,
    )


def _run(config, one_rep, workers, backend):
    kern = kernels.get(backend)
    reps = range(config.replications)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda r: one_rep(config, kern, r), reps))
    else:
        records = [one_rep(config, kern, r) for r in reps]
    return SimResult(n_users=config.n_users, records=records)


def run_two_period(config: SimConfig, workers: int = 1, backend: str | None = None) -> SimResult:
    """Simulate the two-period game.

    Users report, the coordinator reserves the reported total at price 1,
    users needing the unit pay ``f(q)`` and the rest ``g(q)``; usage above
    the reservation is bought at ``C``.
    """
    if not isinstance(config.mechanism, PricingParams):
        raise ConfigError("run_two_period needs a two-period mechanism", field="mechanism")
    return _run(config, _two_period_rep, workers, backend)


def run_three_period(config: SimConfig, workers: int = 1, backend: str | None = None) -> SimResult:
    """Simulate the three-period game with one revision.

    Period-1 reports are reserved at 1.  In period 2 the coordinator moves
    its holdings to the revised total: increases cost ``C`` per unit,
    decreases are forfeited (``forfeit``) or refunded at 1 (``resale``).
    Period-3 shortfall is bought at ``C^2``.
    """
    if not isinstance(config.mechanism, ThreePeriodParams):
        raise ConfigError("run_three_period needs a three-period mechanism", field="mechanism")
    return _run(config, _three_period_rep, workers, backend)


def run(config: SimConfig, workers: int = 1, backend: str | None = None) -> SimResult:
    if isinstance(config.mechanism, ThreePeriodParams):
        return run_three_period(config, workers, backend)
    return run_two_period(config, workers, backend)


@dataclass(frozen=True)
class AuditRow:
    p: float
    best_q: float
    truthful_cost: float
    best_misreport: float
    misreport_penalty: float
    ok: bool


@dataclass
class TruthAudit:
    grid_step: float
    rows: list[AuditRow]

    @property
    def passed(self) -> bool:
        return all(r.ok for r in self.rows)


def truth_audit(params, p_grid: Sequence[float], q_grid_step: float = 1e-3) -> TruthAudit:
    """Brute-force the best report for each true ``p`` on ``p_grid``.

    Also reports the cheapest report other than the best one and its extra
    cost, which is positive whenever truth-telling is strict.
    """
    two = PricingParams(params.C, params.k)
    if not (0.0 < q_grid_step <= 0.01):
        raise DomainError(f"q_grid_step must lie in (0, 0.01], got {q_grid_step!r}")
    grid = submission_grid(q_grid_step)
    rows = []
    for p in p_grid:
        if not (0.0 <= p <= 1.0):
            raise DomainError(f"p must lie in [0, 1], got {p!r}")
        costs = report_cost(two, p, grid)
        order = np.argsort(costs, kind="stable")
        best, runner_up = grid[order[0]], grid[order[1]]
        truthful = float(report_cost(two, p, p))
        rows.append(AuditRow(
            p=float(p),
            best_q=float(best),
            truthful_cost=truthful,
            best_misreport=float(runner_up),
            misreport_penalty=float(costs[order[1]]) - truthful,
            ok=abs(best - p) <= q_grid_step + 1e-12,
        ))
    return TruthAudit(grid_step=q_grid_step, rows=rows)


@dataclass(frozen=True)
class ConvergenceRow:
    n_users: int
    frac_profitable: float
    mean_profit: float
    mean_profit_per_user: float


def profit_convergence(params: PricingParams, n_list: Sequence[int], replications: int = 100,
                       seed: int = 0, population: Population | None = None,
                       workers: int = 1) -> list[ConvergenceRow]:
    """Profit statistics of the two-period game as the population grows."""
    population = population or UniformP(0.0, 1.0)
    rows = []
    for n in n_list:
        res = run_two_period(SimConfig(params, population, n_users=n,
                                       replications=replications, seed=seed), workers=workers)
        rows.append(ConvergenceRow(
            n_users=n,
            frac_profitable=res.frac_profitable,
            mean_profit=res.mean_profit_per_user * n,
            mean_profit_per_user=res.mean_profit_per_user,
        ))
    return rows

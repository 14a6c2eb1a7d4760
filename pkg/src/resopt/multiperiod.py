"""Three-period adjustable contracts and the m-period option generalisation.

A user may submit ``q1`` in period 1 (advance price 1), revise it to ``q2``
in period 2 (price ``C``) and consumes or not in period 3 (spot ``C^2``).
Period-1 curves ``f1, g1`` use curvature ``k``; period-2 curves use
``k2 = C k`` so that ``f2 = C f1`` and ``g2 = C g1``.  Revising swaps a
fraction ``alpha`` of the contract at period-2 prices, which keeps both
reports truthful when ``0 < alpha < 1/C``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import DomainError, InfeasibleSwapSchedule, InvalidFriction
from .pricing import PricingParams, _check_prob, submission_grid

__all__ = [
    "ThreePeriodParams",
    "InfoStructure",
    "FirstOnly",
    "SecondOnly",
    "Both",
    "SubmissionPattern",
    "MPeriodContract",
    "f1",
    "g1",
    "f2",
    "g2",
    "w1",
    "payment",
    "adjustment_fee",
    "expected_cost_both",
    "expected_cost_second_only",
    "option_form_payment",
    "mperiod_weights",
    "mperiod_execute",
    "IncentiveAudit",
    "incentive_audit",
]


@dataclass(frozen=True)
class ThreePeriodParams:
    C: float
    k: float
    alpha: float

    def __post_init__(self):
        # reuses the two-period (C, k) checks
        PricingParams(self.C, self.k)
        if not (0.0 < self.alpha < 1.0 / self.C):
            raise InvalidFriction(
                f"friction alpha={self.alpha!r} must lie in (0, 1/C) = (0, {1.0 / self.C:.6g})"
            )

    @property
    def delta(self) -> float:
        return 1.0 / self.C

    @property
    def k1(self) -> float:
        return self.k

    @property
    def k2(self) -> float:
        return self.C * self.k

    @property
    def swap_share(self) -> float:
        """``alpha C``, the share of the period-1 contract swapped in period 2."""
        return self.alpha * self.C


@dataclass(frozen=True)
class InfoStructure:
    """Belief tree: state A with probability ``p1``; use probability ``p21``
    in state A and ``p22`` in state B."""

    p1: float
    p21: float
    p22: float

    def __post_init__(self):
        for name in ("p1", "p21", "p22"):
            _check_prob(getattr(self, name), name)

    @property
    def prior(self) -> float:
        return self.p1 * self.p21 + (1.0 - self.p1) * self.p22


@dataclass(frozen=True)
class FirstOnly:
    q1: float


@dataclass(frozen=True)
class SecondOnly:
    q2: float


@dataclass(frozen=True)
class Both:
    q1: float
    q2: float


SubmissionPattern = Union[FirstOnly, SecondOnly, Both]


# Raw curve helpers take plain floats/arrays so the audits can vectorise over
# sampled parameters.

def _f1(q, k):
    return 1.0 + k / 2.0 * (1.0 - q) * (1.0 - q)


def _g1(q, k):
    return k * q * q / 2.0


def _f2(q, k, C):
    k2 = C * k
    return C + k2 / 2.0 * (1.0 - q) * (1.0 - q)


def _g2(q, k, C):
    k2 = C * k
    return k2 * q * q / 2.0


def _w1(p, k):
    return p + k / 2.0 * p * (1.0 - p)


def f1(params, q):
    _check_prob(q, "q")
    return _f1(q, params.k)


def g1(params, q):
    _check_prob(q, "q")
    return _g1(q, params.k)


def f2(params, q):
    _check_prob(q, "q")
    return _f2(q, params.k, params.C)


def g2(params, q):
    _check_prob(q, "q")
    return _g2(q, params.k, params.C)


def w1(params, p):
    """Truthful period-1 expected payment ``p + (k/2) p (1 - p)``."""
    _check_prob(p)
    return _w1(p, params.k)


def payment(params: ThreePeriodParams, pattern: SubmissionPattern, uses: bool) -> float:
    """Final payment for a submission pattern, per the three-period table."""
    k, C, a = params.k, params.C, params.alpha
    if isinstance(pattern, FirstOnly):
        _check_prob(pattern.q1, "q1")
        q1 = pattern.q1
        return _f1(q1, k) if uses else _g1(q1, k)
    if isinstance(pattern, SecondOnly):
        _check_prob(pattern.q2, "q2")
        q2 = pattern.q2
        return _f2(q2, k, C) if uses else _g2(q2, k, C)
    if isinstance(pattern, Both):
        _check_prob(pattern.q1, "q1")
        _check_prob(pattern.q2, "q2")
        q1, q2 = pattern.q1, pattern.q2
        if uses:
            return _f1(q1, k) - a * _f2(q1, k, C) + a * _f2(q2, k, C)
        return _g1(q1, k) - a * _g2(q1, k, C) + a * _g2(q2, k, C)
    raise TypeError(f"unknown submission pattern {pattern!r}")


def _adjustment_fee(q1, q2, p2, k, C, alpha):
    return (p2 * alpha * (_f2(q2, k, C) - _f2(q1, k, C))
            + (1.0 - p2) * alpha * (_g2(q2, k, C) - _g2(q1, k, C)))


def adjustment_fee(params: ThreePeriodParams, q1, q2, p2):
    """Expected period-3 fee for revising ``q1`` to ``q2`` when the period-2
    use probability is ``p2``.  Minimised (and non-positive) at ``q2 = p2``."""
    for name, val in (("q1", q1), ("q2", q2), ("p2", p2)):
        _check_prob(val, name)
    return _adjustment_fee(q1, q2, p2, params.k, params.C, params.alpha)


def _state_value(p1, p21, p22, k):
    return p1 * _w1(p21, k) + (1.0 - p1) * _w1(p22, k)


def _cost_both(q1, p1, p21, p22, k, C, alpha):
    p = p1 * p21 + (1.0 - p1) * p22
    s = alpha * C
    return ((1.0 - s) * (p * _f1(q1, k) + (1.0 - p) * _g1(q1, k))
            + s * _state_value(p1, p21, p22, k))


def expected_cost_both(params: ThreePeriodParams, info: InfoStructure, q1) -> float:
    """Expected cost of reporting ``q1`` in period 1 and then revising
    truthfully in period 2 (``c12`` as a function of ``q1``)."""
    _check_prob(q1, "q1")
    return _cost_both(q1, info.p1, info.p21, info.p22, params.k, params.C, params.alpha)


def expected_cost_second_only(params, info: InfoStructure) -> float:
    """Expected cost of skipping period 1 and reporting truthfully in period 2."""
    return params.C * _state_value(info.p1, info.p21, info.p22, params.k)


def option_form_payment(params: ThreePeriodParams, q1: float, q2: float, uses: bool) -> float:
    """Total paid under the option reading of the ``Both(q1, q2)`` contract.

    Period 1: premium ``g1(q1)``.  Period 2: swap share ``alpha C`` of the
    ``q1`` option into a ``q2`` option for the premium difference.  Period 3:
    exercise both holdings at their strikes if the unit is used.
    """
    _check_prob(q1, "q1")
    _check_prob(q2, "q2")
    k = params.k
    s = params.swap_share
    if not s < 1.0:
        raise InvalidFriction(f"swap share alpha*C={s!r} must be < 1")
    premium = _g1(q1, k)
    swap = s * (_g1(q2, k) - _g1(q1, k))
    total = premium + swap
    if uses:
        total += (1.0 - s) * (_f1(q1, k) - _g1(q1, k)) + s * (_f1(q2, k) - _g1(q2, k))
    return total


@dataclass(frozen=True)
class MPeriodContract:
    beta: float
    m: int
    submissions: Sequence[float]

    def __post_init__(self):
        object.__setattr__(self, "submissions", tuple(float(q) for q in self.submissions))
        if len(self.submissions) != self.m - 1:
            raise DomainError(
                f"an {self.m}-period contract takes {self.m - 1} submissions, got {len(self.submissions)}"
            )
        for i, q in enumerate(self.submissions, start=1):
            _check_prob(q, f"q{i}")
        # raises on an infeasible schedule
        mperiod_weights(self.beta, self.m)


def mperiod_weights(beta: float, m: int) -> list[float]:
    """Shares held of each period's option at exercise time.

    ``[1 - (beta + ... + beta^(m-2)), beta, beta^2, ..., beta^(m-2)]``; the
    first share must stay positive.
    """
    if int(m) != m or m < 3:
        raise InfeasibleSwapSchedule(f"need m >= 3 periods, got {m!r}")
    if not beta > 0.0:
        raise InfeasibleSwapSchedule(f"beta must be positive, got {beta!r}")
    swaps = [beta ** i for i in range(1, int(m) - 1)]
    swapped = math.fsum(swaps)
    if not swapped < 1.0:
        raise InfeasibleSwapSchedule(
            f"beta={beta!r}, m={m}: swapped share {swapped:.6g} must be < 1"
        )
    return [1.0 - swapped] + swaps


def mperiod_execute(params, contract: MPeriodContract, uses: bool) -> float:
    """Total paid over an m-period option contract (no discounting)."""
    shares = mperiod_weights(contract.beta, contract.m)
    k = params.k
    qs = contract.submissions
    q1 = qs[0]
    total = _g1(q1, k)
    for share, q in zip(shares[1:], qs[1:]):
        total += share * (_g1(q, k) - _g1(q1, k))
    if uses:
        for share, q in zip(shares, qs):
            total += share * (_f1(q, k) - _g1(q, k))
    return total


@dataclass
class IncentiveAudit:
    """Violation counts of the three-period incentive properties.

    ``adjust`` counts draws where the best revision was not (within one grid
    step) the true period-2 probability or did not lower the fee;
    ``period1`` where the best period-1 report missed the prior; ``twice``
    where reporting twice was not strictly cheaper than waiting; ``margin``
    where the expected payment fell below the prior.
    """

    n_samples: int
    grid_step: float
    adjust: int
    period1: int
    twice: int
    margin: int
    max_adjust_gap: float
    max_period1_gap: float

    @property
    def passed(self) -> bool:
        return self.adjust == 0 and self.period1 == 0 and self.twice == 0 and self.margin == 0


def _grid_argmin(values, grid):
    # first occurrence, i.e. smallest argument on ties
    return grid[np.argmin(values, axis=1)]


def incentive_audit(C: float, k: float, n_samples: int = 10_000, seed: int = 0,
                grid_step: float = 1e-3, alpha: float | None = None,
                chunk: int = 2048) -> IncentiveAudit:
    """Brute-force check of the three-period incentive properties.

    Samples ``(p1, p21, p22)`` and a period-1 report ``q1`` uniformly; when
    ``alpha`` is None it is drawn uniformly from ``(0, 1/C)`` per sample.
    """
    if alpha is None:
        PricingParams(C, k)
    else:
        ThreePeriodParams(C, k, alpha)
    rng = np.random.default_rng(seed)
    grid = submission_grid(grid_step)[None, :]
    counts = dict(adjust=0, period1=0, twice=0, margin=0)
    max_adjust_gap = 0.0
    max_period1_gap = 0.0
    for start in range(0, n_samples, chunk):
        n = min(chunk, n_samples - start)
        p1, p21, p22, q1 = rng.random((4, n))
        if alpha is None:
            a = rng.uniform(0.0, 1.0 / C, n)
            a = np.where(a > 0.0, a, 0.5 / C)
        else:
            a = np.full(n, float(alpha))
        p = p1 * p21 + (1.0 - p1) * p22

        col = lambda x: x[:, None]
        for p2 in (p21, p22):
            fee = _adjustment_fee(col(q1), grid, col(p2), k, C, col(a))
            best = _grid_argmin(fee, grid[0])
            gap = np.abs(best - p2)
            # the grid may not contain p2 itself, so the sign is checked there
            at_truth = _adjustment_fee(q1, p2, p2, k, C, a)
            bad = (gap > grid_step + 1e-12) | (at_truth > 1e-12)
            counts["adjust"] += int(bad.sum())
            max_adjust_gap = max(max_adjust_gap, float(gap.max()))

        c12_curve = _cost_both(grid, col(p1), col(p21), col(p22), k, C, col(a))
        best_q1 = _grid_argmin(c12_curve, grid[0])
        gap = np.abs(best_q1 - p)
        counts["period1"] += int((gap > grid_step + 1e-12).sum())
        max_period1_gap = max(max_period1_gap, float(gap.max()))

        c12 = _cost_both(p, p1, p21, p22, k, C, a)
        c2 = C * _state_value(p1, p21, p22, k)
        counts["twice"] += int((~(c12 < c2)).sum())
        counts["margin"] += int((c12 < p).sum())
    return IncentiveAudit(n_samples=n_samples, grid_step=grid_step,
                      max_adjust_gap=max_adjust_gap, max_period1_gap=max_period1_gap,
                      **counts)

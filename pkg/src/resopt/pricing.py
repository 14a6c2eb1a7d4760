"""Two-period truth-telling payment curves.

A user who reports probability ``q`` pays ``f(q)`` if they end up using the
reserved unit and ``g(q)`` otherwise, with

    f(q) = 1 + k/2 - k q + k q^2 / 2
    g(q) = k q^2 / 2

Reporting the true use probability ``p`` minimises ``p f(q) + (1 - p) g(q)``;
the excess cost of a misreport is exactly ``(k/2) (q - p)^2``, i.e. the
schedule is a scaled quadratic (Brier) scoring rule.  Prices are in units of
the advance (discount) price; ``C`` is the spot-to-advance price ratio.

All curve functions accept scalars or numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import CurvatureOutOfRange, DomainError, InvalidDistribution, InvalidSpotRatio, NotOnCurve

__all__ = [
    "PricingParams",
    "Quote",
    "UnitDemandDistribution",
    "validate_params",
    "curvature_window",
    "pay_if_use",
    "pay_if_not",
    "expected_payment",
    "report_cost",
    "misreport_penalty",
    "baseline_cost",
    "quote",
    "infer_probability",
    "price_premium_curve",
    "submission_grid",
    "optimal_submission",
    "decompose_units",
    "uniform_time_bundle",
]


def curvature_window(C: float) -> tuple[float, float]:
    """Interval of curvatures ``k`` for which the mechanism is individually
    rational for both sides: ``[1, min(2(C - 1), 2)]`` (may be empty)."""
    return 1.0, min(2.0 * (C - 1.0), 2.0)


@dataclass(frozen=True)
class PricingParams:
    C: float
    k: float

    def __post_init__(self):
        if not (math.isfinite(self.C) and self.C > 1.0):
            raise InvalidSpotRatio(f"spot ratio C must be > 1, got {self.C!r}")
        lo, hi = curvature_window(self.C)
        if not (lo <= self.k <= hi):
            raise CurvatureOutOfRange(
                f"curvature k={self.k!r} outside [{lo}, {hi:.6g}] for C={self.C!r}"
            )


def validate_params(C: float, k: float) -> PricingParams:
    """Build a :class:`PricingParams`, raising on an invalid ``(C, k)`` pair."""
    return PricingParams(float(C), float(k))


def _check_prob(p, name="p"):
    arr = np.asarray(p, dtype=float)
    if arr.size and not np.all((arr >= 0.0) & (arr <= 1.0)):
        raise DomainError(f"{name} must lie in [0, 1], got {p!r}")
    return p


def _f(q, k):
    return 1.0 + k / 2.0 * (1.0 - q) * (1.0 - q)


def _g(q, k):
    return k * q * q / 2.0


def pay_if_use(params: PricingParams, p):
    """``f(p)``: payment when the reserved unit is used.  Strictly decreasing."""
    _check_prob(p)
    return _f(p, params.k)


def pay_if_not(params: PricingParams, p):
    """``g(p)``: payment when the unit is not used (the option premium)."""
    _check_prob(p)
    return _g(p, params.k)


def report_cost(params: PricingParams, p, q):
    """Expected payment of a user with true probability ``p`` reporting ``q``."""
    _check_prob(p)
    _check_prob(q, "q")
    return p * _f(q, params.k) + (1.0 - p) * _g(q, params.k)


def expected_payment(params: PricingParams, p):
    """``w(p) = p + (k/2) p (1 - p)``, the truthful expected payment.

    Written in this factored form so that ``w(p) >= p`` and ``w(1) = 1`` hold
    exactly in floating point.
    """
    _check_prob(p)
    k = params.k
    return p + k / 2.0 * p * (1.0 - p)


def misreport_penalty(params: PricingParams, p, q):
    """Extra expected cost of reporting ``q`` instead of the truth ``p``.

    Equal to ``(k/2) (q - p)^2``; computed here from the payment curves so
    that the identity can be checked rather than assumed.
    """
    return report_cost(params, p, q) - report_cost(params, p, p)


def baseline_cost(C: float, p):
    """Best expected cost without a coordinator: ``min(1, C p)``."""
    if not C > 1.0:
        raise InvalidSpotRatio(f"spot ratio C must be > 1, got {C!r}")
    _check_prob(p)
    return np.minimum(1.0, C * np.asarray(p, dtype=float))[()]


@dataclass(frozen=True)
class Quote:
    """A contract for reported probability ``q`` in both readings.

    Contract form: pay ``pay_if_use`` or ``pay_if_not`` at delivery time.
    Option form: pay ``premium`` up front for the right to take one unit at
    ``strike``.
    """

    q: float
    pay_if_use: float
    pay_if_not: float
    premium: float
    strike: float


def quote(params: PricingParams, q: float) -> Quote:
    _check_prob(q, "q")
    q = float(q)
    f = _f(q, params.k)
    g = _g(q, params.k)
    return Quote(q=q, pay_if_use=f, pay_if_not=g, premium=g, strike=f - g)


def infer_probability(params: PricingParams, premium: float) -> float:
    """Recover the reported probability from a chosen premium (inverse of g)."""
    top = params.k / 2.0
    if not (0.0 <= premium <= top):
        raise NotOnCurve(f"premium {premium!r} is not on the curve [0, {top:.6g}]")
    return math.sqrt(2.0 * premium / params.k)


def price_premium_curve(params: PricingParams, n_points: int) -> list[tuple[float, float]]:
    """Sample ``(premium, strike)`` pairs along the curve for ``p`` evenly
    spaced on [0, 1].  Strike falls as the premium rises."""
    if n_points < 2:
        raise ValueError(f"n_points must be >= 2, got {n_points}")
    ps = np.linspace(0.0, 1.0, n_points)
    g = _g(ps, params.k)
    strike = _f(ps, params.k) - g
    return [(float(a), float(b)) for a, b in zip(g, strike)]


def submission_grid(grid_step: float) -> np.ndarray:
    """Candidate reports ``{0, s, 2s, ..., 1}``; 1 is appended if ``s`` does
    not divide it."""
    if not (0.0 < grid_step <= 1.0):
        raise DomainError(f"grid_step must lie in (0, 1], got {grid_step!r}")
    n = int(math.floor(1.0 / grid_step + 1e-9))
    grid = np.arange(n + 1) * grid_step
    if grid[-1] < 1.0 - 1e-12:
        grid = np.append(grid, 1.0)
    else:
        grid[-1] = 1.0
    return grid


def optimal_submission(params: PricingParams, p: float, grid_step: float = 1e-3) -> float:
    """Brute-force best report for a user with true probability ``p``.

    Minimises the expected payment over :func:`submission_grid`; ties go to
    the smallest report.  Used as the truth-telling oracle, so it never
    relies on the first-order condition.
    """
    _check_prob(p)
    if not (0.0 < grid_step <= 0.01):
        raise DomainError(f"grid_step must lie in (0, 0.01], got {grid_step!r}")
    grid = submission_grid(grid_step)
    costs = p * _f(grid, params.k) + (1.0 - p) * _g(grid, params.k)
    return float(grid[int(np.argmin(costs))])


@dataclass(frozen=True)
class UnitDemandDistribution:
    """Distribution of how many units are needed, ``{count: probability}``."""

    probabilities: Mapping[int, float]

    def __post_init__(self):
        probs = dict(self.probabilities)
        for units, prob in probs.items():
            if int(units) != units or units < 0:
                raise InvalidDistribution(f"unit count must be a non-negative integer, got {units!r}")
            if not (0.0 <= prob <= 1.0):
                raise InvalidDistribution(f"probability for {units} units is {prob!r}")
        total = math.fsum(probs.values())
        if abs(total - 1.0) > 1e-12:
            raise InvalidDistribution(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "probabilities", probs)


def decompose_units(dist: UnitDemandDistribution) -> list[float]:
    """Split a multi-unit demand into one single-unit option per unit.

    Entry ``j`` (1-based) is ``P(demand >= j)``.  Options for successive units
    are dependent, which is fine as long as different users are independent.
    """
    if not isinstance(dist, UnitDemandDistribution):
        dist = UnitDemandDistribution(dist)
    probs = dist.probabilities
    positive = [u for u, pr in probs.items() if pr > 0.0]
    top = max(positive, default=0)
    return [
        math.fsum(pr for u, pr in probs.items() if u >= j)
        for j in range(1, top + 1)
    ]


def uniform_time_bundle(params: PricingParams, m_days: int) -> tuple[float, float]:
    """One option per day for a single need spread uniformly over ``m_days``.

    Returns ``(per_day_p, total_expected_cost)``: a premium on every day plus
    one exercise at the strike.
    """
    if m_days < 1:
        raise ValueError(f"m_days must be >= 1, got {m_days}")
    p = 1.0 / m_days
    g = _g(p, params.k)
    total = m_days * g + _f(p, params.k) - g
    return p, total

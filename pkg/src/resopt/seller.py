"""Seller revenue: direct reservation/spot pricing versus selling options.

A user is described by a value ``v`` and use probability ``p`` and buys
when ``v`` is at least the expected price ``t(p)``.  Revenue per user is

    R = integral of f(v, p) * 1[v >= t(p)] * t(p) dv dp

with ``t(p) = min(C1, C2 p)`` for direct selling and
``t(p) = C1 ((1 + k/2) p - (k/2) p^2)`` for options.  The v-integral is
always done exactly (piecewise constant density in v), so the only
quadrature is over ``p``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .errors import DomainError, InvalidDistribution, InvalidPricing

__all__ = [
    "UniformRect",
    "TabulatedDensity",
    "PopulationDensity",
    "DirectPricing",
    "OptionPricing",
    "revenue_direct",
    "revenue_options",
    "direct_closed_form",
    "options_closed_form",
    "golden_section_max",
    "Optimum",
    "optimize_direct",
    "optimize_options",
    "ComparisonRow",
    "compare_table",
    "REFERENCE_INTERVALS",
]

REFERENCE_INTERVALS = [
    (0.0, 1.0),
    (0.0, 1 / 2),
    (1 / 2, 1.0),
    (0.0, 1 / 3),
    (1 / 3, 2 / 3),
    (2 / 3, 1.0),
    (0.0, 1 / 5),
    (2 / 5, 3 / 5),
    (4 / 5, 1.0),
]


@dataclass(frozen=True)
class UniformRect:
    """``v`` uniform on [0, 1] independent of ``p`` uniform on ``[a, b]``."""

    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.a <= self.b <= 1.0):
            raise InvalidDistribution(f"need 0 <= a <= b <= 1, got a={self.a!r}, b={self.b!r}")

    def tabulate(self, n_p: int = 4000) -> "TabulatedDensity":
        """Midpoint discretisation in ``p`` with uniform ``v``."""
        if self.a == self.b:
            return TabulatedDensity.from_p_marginal([self.a], [1.0])
        edges = np.linspace(self.a, self.b, n_p + 1)
        mids = 0.5 * (edges[:-1] + edges[1:])
        return TabulatedDensity.from_p_marginal(mids, np.full(n_p, 1.0 / n_p))


@dataclass(frozen=True, eq=False)
class TabulatedDensity:
    """Density tabulated on v-cells and p-nodes.

    ``weights[i, j]`` is the probability mass in v-cell
    ``[v_edges[i], v_edges[i + 1])`` at p-node ``p_nodes[j]``; the density is
    taken as constant in ``v`` inside each cell.
    """

    v_edges: np.ndarray
    p_nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        v_edges = np.asarray(self.v_edges, dtype=float)
        p_nodes = np.asarray(self.p_nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if v_edges.ndim != 1 or len(v_edges) < 2 or np.any(np.diff(v_edges) <= 0):
            raise InvalidDistribution("v_edges must be strictly increasing with at least two entries")
        if v_edges[0] < 0.0 or v_edges[-1] > 1.0:
            raise InvalidDistribution("v_edges must lie in [0, 1]")
        if p_nodes.ndim != 1 or np.any((p_nodes < 0.0) | (p_nodes > 1.0)):
            raise InvalidDistribution("p_nodes must lie in [0, 1]")
        if weights.shape != (len(v_edges) - 1, len(p_nodes)):
            raise InvalidDistribution(
                f"weights shape {weights.shape} != ({len(v_edges) - 1}, {len(p_nodes)})"
            )
        if np.any(weights < 0.0):
            raise InvalidDistribution("weights must be non-negative")
        total = math.fsum(weights.ravel())
        if abs(total - 1.0) > 1e-9:
            raise InvalidDistribution(f"weights sum to {total!r}, not 1")
        for name, arr in (("v_edges", v_edges), ("p_nodes", p_nodes), ("weights", weights)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_p_marginal(cls, p_nodes, p_weights, v_edges=(0.0, 1.0)) -> "TabulatedDensity":
        """``v`` uniform on ``v_edges`` (one cell by default), independent of ``p``."""
        v_edges = np.asarray(v_edges, dtype=float)
        v_share = np.diff(v_edges) / (v_edges[-1] - v_edges[0])
        return cls(v_edges, np.asarray(p_nodes, dtype=float),
                   np.outer(v_share, np.asarray(p_weights, dtype=float)))


PopulationDensity = Union[UniformRect, TabulatedDensity]


@dataclass(frozen=True)
class DirectPricing:
    C1: float
    C2: float

    def __post_init__(self):
        if not (0.0 <= self.C1 <= self.C2 <= 1.0):
            raise InvalidPricing(f"need 0 <= C1 <= C2 <= 1, got C1={self.C1!r}, C2={self.C2!r}")


@dataclass(frozen=True)
class OptionPricing:
    C1: float
    k: float

    def __post_init__(self):
        if not (0.0 <= self.C1 <= 1.0 and 1.0 <= self.k <= 2.0):
            raise InvalidPricing(f"need 0 <= C1 <= 1 <= k <= 2, got C1={self.C1!r}, k={self.k!r}")


# --- exact integrals for uniform rectangles --------------------------------
# Inner v-integral for uniform v is (1 - t) t; what remains is a polynomial
# in p (piecewise for direct selling), integrated with its antiderivative.

def _direct_uniform(C1, C2, a, b):
    C1 = np.asarray(C1, dtype=float)
    C2 = np.asarray(C2, dtype=float)
    if a == b:
        t = np.minimum(C1, C2 * a)
        return t * (1.0 - t)
    with np.errstate(divide="ignore", invalid="ignore"):
        kink = np.where(C2 > 0.0, C1 / C2, b)
    m = np.clip(kink, a, b)
    rising = C2 * (m * m - a * a) / 2.0 - C2 * C2 * (m ** 3 - a ** 3) / 3.0
    flat = (C1 - C1 * C1) * (b - m)
    return (rising + flat) / (b - a)


def _options_uniform(C1, k, a, b):
    C1 = np.asarray(C1, dtype=float)
    k = np.asarray(k, dtype=float)
    lin = 1.0 + k / 2.0
    quad = k / 2.0
    if a == b:
        t = C1 * (lin * a - quad * a * a)
        return t * (1.0 - t)

    def anti(p):
        return (C1 * (lin * p ** 2 / 2.0 - quad * p ** 3 / 3.0)
                - C1 * C1 * (lin * lin * p ** 3 / 3.0 - lin * quad * p ** 4 / 2.0 + quad * quad * p ** 5 / 5.0))

    return (anti(b) - anti(a)) / (b - a)


def direct_closed_form(C1: float, C2: float) -> float:
    """Direct-selling revenue for ``v, p`` uniform on [0, 1]^2 (needs C2 > 0)."""
    return C1 - C1 ** 2 + (2.0 / 3.0 * C1 ** 3 - 0.5 * C1 ** 2) / C2


def options_closed_form(C1: float, k: float) -> float:
    """Option revenue for ``v, p`` uniform on [0, 1]^2."""
    return C1 / 2 - C1 ** 2 / 3 + C1 * k / 12 - C1 ** 2 * k / 12 - C1 ** 2 * k ** 2 / 120


# --- tabulated densities ----------------------------------------------------

def _tabulated(dist: TabulatedDensity, thresholds):
    """Revenue for thresholds of shape (..., n_p) against a tabulated density."""
    t = np.asarray(thresholds, dtype=float)[..., None, :]
    lo = dist.v_edges[:-1, None]
    hi = dist.v_edges[1:, None]
    # share of each v-cell at or above the threshold
    share = np.clip((hi - t) / (hi - lo), 0.0, 1.0)
    return np.sum(dist.weights * share * t, axis=(-2, -1))


def _direct_thresholds(C1, C2, p):
    return np.minimum(np.asarray(C1)[..., None], np.asarray(C2)[..., None] * p)


def _option_thresholds(C1, k, p):
    C1 = np.asarray(C1)[..., None]
    k = np.asarray(k)[..., None]
    return C1 * ((1.0 + k / 2.0) * p - k / 2.0 * p * p)


def _direct_many(C1, C2, dist, method):
    if isinstance(dist, UniformRect) and method != "quadrature":
        return _direct_uniform(C1, C2, dist.a, dist.b)
    tab = dist.tabulate() if isinstance(dist, UniformRect) else dist
    return _chunked(lambda c1, c2: _tabulated(tab, _direct_thresholds(c1, c2, tab.p_nodes)),
                    C1, C2, len(tab.p_nodes) * (len(tab.v_edges) - 1))


def _options_many(C1, k, dist, method):
    if isinstance(dist, UniformRect) and method != "quadrature":
        return _options_uniform(C1, k, dist.a, dist.b)
    tab = dist.tabulate() if isinstance(dist, UniformRect) else dist
    return _chunked(lambda c1, kk: _tabulated(tab, _option_thresholds(c1, kk, tab.p_nodes)),
                    C1, k, len(tab.p_nodes) * (len(tab.v_edges) - 1))


def _chunked(fn, x, y, cells, budget=4_000_000):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 0:
        return fn(x, y)
    x, y = np.broadcast_arrays(x, y)
    flat_x, flat_y = x.ravel(), y.ravel()
    step = max(1, budget // max(cells, 1))
    out = np.concatenate([fn(flat_x[s:s + step], flat_y[s:s + step])
                          for s in range(0, len(flat_x), step)])
    return out.reshape(x.shape)


def _check_search(grid_step, tol):
    if not (0.0 < grid_step <= 0.5):
        raise DomainError(f"grid_step must lie in (0, 0.5], got {grid_step!r}")
    if not tol > 0.0:
        raise DomainError(f"tol must be positive, got {tol!r}")


def _check_dist(dist):
    if not isinstance(dist, (UniformRect, TabulatedDensity)):
        raise InvalidDistribution(f"unsupported population density {dist!r}")


def revenue_direct(pricing: DirectPricing, dist: PopulationDensity, method: str = "exact") -> float:
    """Expected revenue per user from reservation price C1 and spot price C2.

    ``method="exact"`` integrates uniform rectangles analytically;
    ``"quadrature"`` forces the tabulated midpoint path.  Tabulated densities
    always use quadrature.
    """
    _check_dist(dist)
    if method not in ("exact", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    return float(_direct_many(pricing.C1, pricing.C2, dist, method))


def revenue_options(pricing: OptionPricing, dist: PopulationDensity, method: str = "exact") -> float:
    """Expected revenue per user from selling options scaled by C1 with curvature k."""
    _check_dist(dist)
    if method not in ("exact", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    return float(_options_many(pricing.C1, pricing.k, dist, method))


def golden_section_max(fn: Callable[[float], float], lo: float, hi: float, tol: float = 1e-5) -> float:
    """Maximiser of a unimodal ``fn`` on ``[lo, hi]`` to within ``tol``."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = fn(d)
    return (a + b) / 2.0


@dataclass(frozen=True)
class Optimum:
    scheme: str
    x: float
    y: float
    revenue: float

    @property
    def C1(self) -> float:
        return self.x

    @property
    def C2(self) -> float:
        if self.scheme != "direct":
            raise AttributeError("option pricing has no spot price")
        return self.y

    @property
    def k(self) -> float:
        if self.scheme != "options":
            raise AttributeError("direct pricing has no curvature")
        return self.y


_TIE = 1e-13


def _first_best(values):
    # canonical representative: first index within _TIE of the maximum
    values = np.asarray(values)
    return int(np.flatnonzero(values >= values.max() - _TIE)[0])


def _refine(objective, x, y, bounds_x, bounds_y, step, tol, sweeps=30):
    best = objective(x, y)
    for _ in range(sweeps):
        moved = False
        for axis in (0, 1):
            lo, hi = (bounds_x if axis == 0 else bounds_y)(x, y)
            centre = x if axis == 0 else y
            lo, hi = max(lo, centre - step), min(hi, centre + step)
            if hi - lo <= 0.0:
                continue
            line = (lambda s: objective(s, y)) if axis == 0 else (lambda s: objective(x, s))
            cands = sorted({lo, golden_section_max(line, lo, hi, tol), hi})
            vals = [line(s) for s in cands]
            i = _first_best(vals)
            if vals[i] > best + _TIE:
                if axis == 0:
                    x = cands[i]
                else:
                    y = cands[i]
                best = vals[i]
                moved = True
        if not moved:
            break
    return x, y, best


def optimize_direct(dist: PopulationDensity, grid_step: float = 0.01, tol: float = 1e-5,
                    return_grid: bool = False):
    """Best ``(C1, C2)`` with ``0 <= C1 <= C2 <= 1``.

    Grid search at ``grid_step`` followed by coordinate-wise golden-section
    refinement.  Ties go to the smallest C1, then the smallest C2.
    """
    _check_dist(dist)
    _check_search(grid_step, tol)
    g = np.round(np.arange(0.0, 1.0 + grid_step / 2, grid_step), 12)
    C1, C2 = np.meshgrid(g, g, indexing="ij")
    keep = C1 <= C2
    c1s, c2s = C1[keep], C2[keep]
    vals = _direct_many(c1s, c2s, dist, "exact")
    i = _first_best(vals)

    def objective(c1, c2):
        return float(_direct_many(c1, c2, dist, "exact"))

    x, y, best = _refine(objective, float(c1s[i]), float(c2s[i]),
                         lambda x, y: (0.0, y), lambda x, y: (x, 1.0), grid_step, tol)
    opt = Optimum("direct", x, y, best)
    if return_grid:
        return opt, np.column_stack([c1s, c2s, vals])
    return opt


def optimize_options(dist: PopulationDensity, grid_step: float = 0.01, tol: float = 1e-5,
                     return_grid: bool = False):
    """Best ``(C1, k)`` on ``[0, 1] x [1, 2]``; same search and tie rule as
    :func:`optimize_direct`."""
    _check_dist(dist)
    _check_search(grid_step, tol)
    c1_axis = np.round(np.arange(0.0, 1.0 + grid_step / 2, grid_step), 12)
    k_axis = np.round(np.arange(1.0, 2.0 + grid_step / 2, grid_step), 12)
    C1, K = np.meshgrid(c1_axis, k_axis, indexing="ij")
    c1s, ks = C1.ravel(), K.ravel()
    vals = _options_many(c1s, ks, dist, "exact")
    i = _first_best(vals)

    def objective(c1, k):
        return float(_options_many(c1, k, dist, "exact"))

    x, y, best = _refine(objective, float(c1s[i]), float(ks[i]),
                         lambda x, y: (0.0, 1.0), lambda x, y: (1.0, 2.0), grid_step, tol)
    opt = Optimum("options", x, y, best)
    if return_grid:
        return opt, np.column_stack([c1s, ks, vals])
    return opt


@dataclass(frozen=True)
class ComparisonRow:
    a: float
    b: float
    direct: float | None
    options: float | None
    winner: str | None
    error: str | None = None


def compare_table(intervals: Sequence[tuple[float, float]], tie_tol: float = 1e-6) -> list[ComparisonRow]:
    """Optimised direct and option revenue for ``p`` uniform on each interval.

    An invalid interval yields a row carrying ``error``; the other rows are
    still computed.
    """
    rows = []
    for a, b in intervals:
        try:
            dist = UniformRect(float(a), float(b))
        except InvalidDistribution as exc:
            rows.append(ComparisonRow(a, b, None, None, None, str(exc)))
            continue
        d = optimize_direct(dist).revenue
        o = optimize_options(dist).revenue
        if abs(d - o) <= tie_tol:
            winner = "tie"
        else:
            winner = "options" if o > d else "direct"
        rows.append(ComparisonRow(float(a), float(b), d, o, winner))
    return rows

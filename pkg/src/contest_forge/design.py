"""Optimal contest design.

Covers the designer's choices for both objectives:

* maximum individual effort: always a two-contestant winner-take-all contest;
* total effort under linear cost: a complete simple contest ``(m, n, m-1)``,
  found exactly by enumerating ``m`` or asymptotically through the optimal
  admission ratio ``k*`` and its distribution-free cap ``k_bar``;
* :func:`sup_optimal_m`, an upper bound on the optimal shortlist for every
  prior at a given ``n``;
* a brute-force prize oracle that checks optimality claims on small grids.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterator

import numpy as np

from .beliefs import ShortlistContext
from .distributions import AbilityDistribution
from .equilibrium import ContestConfig, CostModel, LinearCost, gap_weight, solve_equilibrium
from .errors import BudgetExceeded, DomainError, NoSignChange
from .numerics import PanelRule, RootBracket, binomial_log_terms, find_root, scan_for_bracket
from .objectives import (
    Objective,
    SimpleContestSpec,
    complete_kernels,
    foc_lhs,
    max_effort,
    total_effort,
    total_effort_beta_rep,
)

#: Largest number of prize vectors the brute-force oracle will evaluate.
MAX_CANDIDATES = 10_000_000

#: Below this ``n`` a designer who does not know the prior runs a
#: two-contestant winner-take-all contest.
SMALL_CONTEST = 32

#: Relative gap under which two objective values count as a tie.
TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class DesignReport:
    """A recommended contest: shortlist size, prize vector and its objective value."""

    objective: Objective
    n: int
    chosen_m: int
    chosen_prizes: tuple[float, ...]
    objective_value: float
    diagnostics: dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def admission_ratio(self) -> float:
        return self.chosen_m / self.n

    @property
    def prize_count(self) -> int:
        """Number of strictly positive prizes."""
        return sum(1 for v in self.chosen_prizes if v > 0)

    def to_dict(self) -> dict[str, Any]:
        return {
            "objective": self.objective.value,
            "n": self.n,
            "m": self.chosen_m,
            "prizes": list(self.chosen_prizes),
            "objective_value": self.objective_value,
            "admission_ratio": self.admission_ratio,
            "diagnostics": self.diagnostics,
        }


def _equal_prizes(m: int, l: int, budget: float) -> tuple[float, ...]:
    return tuple([budget / l] * l + [0.0] * (m - l))


def _check_n(n: int, minimum: int = 2) -> None:
    if n < 2:
        raise DomainError("n must be ≥ 2")
    if n < minimum:
        raise DomainError(f"n must be ≥ {minimum}")


# ---------------------------------------------------------------------------
# Maximum individual effort
# ---------------------------------------------------------------------------


def optimal_max_effort(dist: AbilityDistribution, n: int, budget: float = 1.0) -> DesignReport:
    """The contest maximizing expected highest effort: admit two, winner takes all.

    The objective value is the expected effort of the strongest registrant
    under linear cost, which scales linearly in the budget.
    """
    _check_n(n)
    if budget < 0:
        raise DomainError("budget must be non-negative")
    value = budget * max_effort(dist, SimpleContestSpec(n, 2, 1))
    diagnostics: dict[str, Any] = {}
    if dist.bounded:
        ctx = ShortlistContext(dist, n, 2)
        schedule = solve_equilibrium(ctx, ContestConfig.winner_take_all(n, 2, budget))
        diagnostics["effort_at_top"] = float(schedule(dist.support[1]))
    return DesignReport(Objective.MAX, n, 2, (float(budget), 0.0), float(value), diagnostics)


# ---------------------------------------------------------------------------
# Total effort: exact enumeration
# ---------------------------------------------------------------------------


def complete_simple_value(dist: AbilityDistribution, n: int, m: int) -> tuple[float, str]:
    """``S(m, n, m-1)`` and the representation that produced it."""
    if m < n:
        return total_effort_beta_rep(dist, n, m), "beta"
    return total_effort(dist, SimpleContestSpec(n, n, n - 1)), "quantile"


def optimal_complete_simple(dist: AbilityDistribution, n: int, workers: int = 1) -> DesignReport:
    """Enumerate complete simple contests ``(m, n, m-1)`` and return the best one.

    Ties go to the smaller shortlist.  The full sweep is kept in
    ``diagnostics["sweep"]`` as ``(m, value, representation)`` rows.
    """
    _check_n(n, minimum=3)
    ms = list(range(2, n + 1))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda m: complete_simple_value(dist, n, m), ms))
    else:
        results = [complete_simple_value(dist, n, m) for m in ms]
    best_m, best_value = ms[0], results[0][0]
    for m, (value, _) in zip(ms[1:], results[1:]):
        if value > best_value * (1 + TIE_TOLERANCE):
            best_m, best_value = m, value
    sweep = [(m, value, how) for m, (value, how) in zip(ms, results)]
    return DesignReport(
        Objective.TOTAL,
        n,
        best_m,
        _equal_prizes(best_m, best_m - 1, 1.0),
        float(best_value),
        {"sweep": sweep},
    )


# ---------------------------------------------------------------------------
# Total effort: asymptotic admission ratio
# ---------------------------------------------------------------------------


def _universal_equation(k: float) -> float:
    return math.log(k) - (2.0 - k) * (k - 1.0)


def universal_bound() -> float:
    """``k_bar``: the root in ``(0, 1)`` of ``ln k = (2 - k)(k - 1)`` other than ``k = 1``.

    No prior has an optimal admission ratio above this value.
    """
    return find_root(_universal_equation, RootBracket(0.1, 0.9, tolerance=1e-15))


def universal_bound_residual() -> float:
    k = universal_bound()
    return abs(_universal_equation(k))


def optimal_ratio(dist: AbilityDistribution, scan_points: int = 64) -> float:
    """Asymptotically optimal admission ratio ``k*``: the root of :func:`foc_lhs`.

    The scan covers ``[1e-3, 0.35]`` first, then widens to ``(1e-4, 0.99)``.

    Raises:
        NoSignChange: if no bracket exists in ``(1e-4, 0.99)``.
    """

    def foc(k: float) -> float:
        return foc_lhs(dist, k)

    try:
        bracket = scan_for_bracket(foc, 1e-3, 0.35, points=scan_points)
    except NoSignChange:
        bracket = scan_for_bracket(foc, 1e-4, 0.99, points=2 * scan_points)
    return find_root(foc, bracket)


# ---------------------------------------------------------------------------
# Supremum of the optimal shortlist
# ---------------------------------------------------------------------------


def complete_kernel_totals(n: int, panels: int = 256, order: int = 16) -> np.ndarray:
    """``H_(m, m-1)(1)`` for ``m = 2..n`` on one composite Gauss rule."""
    edges = np.unique(
        np.concatenate([np.linspace(0.0, 1.0, panels + 1), np.geomspace(1e-12, 1.0, 24), 1.0 - np.geomspace(1e-12, 1.0, 24)])
    )
    rule = PanelRule(edges, order)
    nodes = np.clip(rule.nodes.ravel(), np.finfo(float).tiny, np.nextafter(1.0, 0.0))
    weights = rule.weights.ravel()
    totals = np.zeros(n - 1)
    chunk = max(1, 2_000_000 // n)
    for start in range(0, len(nodes), chunk):
        g = complete_kernels(n, nodes[start : start + chunk])
        totals += weights[start : start + chunk] @ g
    return totals


def sup_optimal_m(n: int, panels: int = 256) -> int:
    """The ``m`` maximizing ``H_(m, m-1)(1)``, an upper bound on every prior's optimal shortlist.

    The table is recomputed with twice the panels until the maximizer and
    the leading values agree.
    """
    _check_n(n, minimum=3)
    totals = complete_kernel_totals(n, panels)
    for _ in range(6):
        finer = complete_kernel_totals(n, 2 * panels)
        settled = int(np.argmax(finer)) == int(np.argmax(totals)) and np.max(np.abs(finer - totals)) < 1e-11
        totals, panels = finer, 2 * panels
        if settled:
            break
    return int(np.argmax(totals)) + 2


def sup_optimal_m_table(n: int) -> list[tuple[int, float]]:
    """``(m, H_(m, m-1)(1))`` rows for ``m = 2..n``."""
    _check_n(n, minimum=3)
    return [(m, float(h)) for m, h in zip(range(2, n + 1), complete_kernel_totals(n, 512))]


# ---------------------------------------------------------------------------
# Brute-force prize oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PrizeGrid:
    """Rank-ordered prize vectors with total at most ``budget`` on a lattice.

    Candidates are enumerated through the gaps ``Z_l = l (V_l - V_{l+1})``
    for ``l < m`` with ``V_m = 0``: each ``Z_l`` is a multiple of
    ``budget / resolution`` and ``sum Z_l <= budget``.  Every such vector
    satisfies ``V_1 >= ... >= V_m >= 0``.
    """

    resolution: int
    m: int
    budget: float = 1.0

    def __post_init__(self) -> None:
        if self.resolution < 5:
            raise DomainError("grid resolution must be at least 5")
        if not 2 <= self.m <= 4:
            raise DomainError("brute-force grids support 2 ≤ m ≤ 4")
        if self.budget < 0:
            raise DomainError("budget must be non-negative")

    @property
    def count(self) -> int:
        """Number of candidates, including the slack that leaves budget unspent."""
        return math.comb(self.resolution + self.m - 1, self.m - 1)

    def gap_vectors(self) -> np.ndarray:
        """All gap vectors, one row per candidate, in lexicographic order."""
        if self.count > MAX_CANDIDATES:
            raise BudgetExceeded(f"grid generates {self.count} candidates, more than {MAX_CANDIDATES}")
        rows = list(_compositions(self.resolution, self.m - 1))
        return np.asarray(rows, dtype=float).reshape(-1, self.m - 1) * (self.budget / self.resolution)

    def prize_vectors(self) -> np.ndarray:
        return np.asarray([gaps_to_prizes(z) for z in self.gap_vectors()])

    def __iter__(self) -> Iterator[np.ndarray]:
        return iter(self.prize_vectors())


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """Non-negative integer vectors of length ``parts`` with sum at most ``total``."""
    if parts == 0:
        yield ()
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first, *rest)


def gaps_to_prizes(gaps) -> np.ndarray:
    """Invert ``Z_l = l (V_l - V_{l+1})`` with ``V_m = 0``."""
    gaps = np.asarray(gaps, dtype=float)
    steps = gaps / np.arange(1, len(gaps) + 1)
    return np.append(np.cumsum(steps[::-1])[::-1], 0.0)


@dataclass(frozen=True)
class OracleResult:
    """Winner of a brute-force search with the full table of values."""

    prizes: tuple[float, ...]
    gaps: tuple[float, ...]
    value: float
    candidates: int
    values: np.ndarray = field(repr=False, compare=False)


def _oracle_rule(dist: AbilityDistribution) -> PanelRule:
    q_lo, q_hi = dist.quantile_bounds()
    edges = np.concatenate(
        [
            np.linspace(q_lo, q_hi, 129),
            q_lo + (q_hi - q_lo) * np.geomspace(1e-12, 1.0, 40),
            q_hi - (q_hi - q_lo) * np.geomspace(1e-12, 1.0, 40),
            np.asarray(dist.quantile_kinks(), dtype=float),
        ]
    )
    return PanelRule(np.unique(edges), 16)


def brute_force_prize_oracle(
    dist: AbilityDistribution,
    n: int,
    m: int,
    grid: PrizeGrid,
    objective: Objective | str = Objective.TOTAL,
    cost: CostModel | None = None,
) -> OracleResult:
    """Evaluate every grid prize vector and return the best one.

    Each candidate's equilibrium is assembled from per-rank basis integrals
    ``int_q^1 weight_l(s) v(s) ds`` (linear in the gaps), mapped through the
    inverse cost, and integrated against the order-statistic weights
    ``Pr(Bin(n-1, q) <= m-1)`` (total) or ``(1-q)^{n-1}`` (maximum).
    Ties keep the first candidate in lexicographic gap order.
    """
    objective = Objective(objective)
    cost = cost or LinearCost()
    _check_n(n)
    if grid.m != m:
        raise DomainError(f"grid is for m={grid.m}, not m={m}")
    ShortlistContext(dist, n, m)
    gaps = grid.gap_vectors()
    rule = _oracle_rule(dist)
    q = np.clip(rule.nodes.ravel(), np.finfo(float).tiny, np.nextafter(1.0, 0.0))
    w = rule.weights.ravel()

    # Y_l(q) = int_q^1 weight_l(1 - s) v(s) ds for the basis prize vector of rank l.
    basis = np.empty((m - 1, q.size))
    for l in range(1, m):
        prizes = gaps_to_prizes(np.eye(m - 1)[l - 1])
        integrand = gap_weight(n, m, prizes, 1.0 - rule.nodes, rule.nodes) * dist.ability_at(rule.nodes)
        at_edges, at_nodes = rule.cumulative(integrand)
        basis[l - 1] = (at_edges[-1] - at_nodes).ravel()
    basis = np.maximum(basis, 0.0)

    if objective is Objective.TOTAL:
        log_weight = (
            np.logaddexp.reduce(binomial_log_terms(n - 1, q, m - 1), axis=-1) if m < n else np.zeros_like(q)
        )
    else:
        log_weight = (n - 1) * np.log1p(-q)
    density = n * np.exp(log_weight) * w

    values = np.empty(len(gaps))
    chunk = max(1, 4_000_000 // q.size)
    for start in range(0, len(gaps), chunk):
        cumulative = gaps[start : start + chunk] @ basis
        values[start : start + chunk] = np.asarray(cost.inverse(cumulative), dtype=float) @ density
    best = int(np.argmax(values))
    return OracleResult(
        tuple(float(x) for x in gaps_to_prizes(gaps[best])),
        tuple(float(x) for x in gaps[best]),
        float(values[best]),
        len(gaps),
        values,
    )


# ---------------------------------------------------------------------------
# Cheatsheet
# ---------------------------------------------------------------------------


def cheatsheet(dist_known: bool, n: int, dist: AbilityDistribution | None = None) -> DesignReport:
    """Rule-of-thumb total-effort design.

    * prior known: admit ``round(k* n)`` with ``k* = optimal_ratio(dist)``;
    * prior unknown, ``n < 32``: two-contestant winner-take-all;
    * prior unknown otherwise: admit ``round(k_bar n)``.

    Every branch is a complete simple contest with a unit budget.  The
    objective value is filled in only when the prior is known.
    """
    _check_n(n)
    diagnostics: dict[str, Any] = {}
    if dist_known:
        if dist is None:
            raise DomainError("a known prior must be supplied")
        k = optimal_ratio(dist)
        diagnostics["ratio"] = k
        diagnostics["rule"] = "known prior: admit k* n"
    elif n < SMALL_CONTEST:
        k = 2.0 / n
        diagnostics["rule"] = "unknown prior, small n: two-contestant winner-take-all"
    else:
        k = universal_bound()
        diagnostics["ratio"] = k
        diagnostics["rule"] = "unknown prior: admit k_bar n"
    m = int(min(max(round(k * n), 2), n))
    value = float("nan")
    if dist is not None and dist_known:
        value = complete_simple_value(dist, n, m)[0]
    return DesignReport(Objective.TOTAL, n, m, _equal_prizes(m, m - 1, 1.0), value, diagnostics)

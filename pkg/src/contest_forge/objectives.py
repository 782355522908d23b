"""Effort objectives of simple contests and their independent representations.

A simple contest with shortlist ``m`` splits a unit budget equally among its
top ``l`` ranks.  Its ex-ante total effort ``S(m, n, l)`` (and maximum
individual effort ``S^(1)(m, n, l)``) can be computed three ways here:

* quantile form: ``n * int |v'(q)| H(q) dq`` with a distribution-free
  kernel ``H(q) = int_0^q G(t) dt``;
* beta form (complete contests ``l = m - 1`` only), built from beta
  densities and regularized incomplete beta functions;
* order statistics: integrate the solved equilibrium schedule against the
  densities of the top ``m`` order statistics.

Agreement between them is the main correctness check of the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import special

from .beliefs import ShortlistContext
from .distributions import AbilityDistribution
from .equilibrium import ContestConfig, CostModel, EffortSchedule, LinearCost, solve_equilibrium
from .errors import DomainError, NonConvergence
from .numerics import (
    PanelRule,
    Quadrature,
    adaptive_panels,
    binomial_log_terms,
    gauss_legendre,
    integrate,
    log_beta_pdf,
    log_binomial_coefficient,
    log_regularized_incomplete_beta,
)

#: Tolerances used for objective integrals unless the caller overrides them.
OBJECTIVE_QUADRATURE = Quadrature(relative_tolerance=1e-10, absolute_tolerance=1e-14, max_subdivisions=400)

#: Largest acceptable ratio of the truncated upper tail to the integral.
TAIL_TOLERANCE = 1e-8


class Objective(str, Enum):
    """Designer objective: ex-ante total effort or maximum individual effort."""

    TOTAL = "total"
    MAX = "max"


@dataclass(frozen=True)
class SimpleContestSpec:
    """``l`` equal prizes of ``1 / l`` among a shortlist of ``m`` out of ``n``."""

    n: int
    m: int
    l: int

    def __post_init__(self) -> None:
        if self.n < 2:
            raise DomainError("n must be ≥ 2")
        if not 2 <= self.m <= self.n:
            raise DomainError(f"shortlist size must satisfy 2 ≤ m ≤ n, got m={self.m}")
        if not 1 <= self.l <= self.m:
            raise DomainError(f"number of prizes must satisfy 1 ≤ l ≤ m, got l={self.l}")

    @property
    def trivial(self) -> bool:
        """All admitted contestants receive the same prize, so nobody exerts effort."""
        return self.l == self.m

    def config(self, budget: float = 1.0) -> ContestConfig:
        return ContestConfig.simple(self.n, self.m, self.l, budget)


# ---------------------------------------------------------------------------
# Distribution-free kernels
# ---------------------------------------------------------------------------


def _log_zeta(n: int, m: int, t: np.ndarray) -> np.ndarray:
    """``log Pr(Bin(n-1, t) <= m-1)``: admission probability at upper quantile ``t``."""
    if m >= n:
        return np.zeros_like(t)
    return special.logsumexp(binomial_log_terms(n - 1, t, m - 1), axis=-1)


def _zeta_integral(n: int, m: int, t: np.ndarray) -> np.ndarray:
    """``int_0^t Pr(Bin(n-1, p) <= m-1) dp = E[min(Bin(n, t), m)] / n``."""
    j = np.arange(m, dtype=float)
    return special.bdtrc(j, n, t[..., None]).sum(axis=-1) / n


def _top_integral(n: int, t: np.ndarray) -> np.ndarray:
    """``int_0^t (1-p)^{n-1} dp = (1 - (1-t)^n) / n``."""
    return -np.expm1(n * np.log1p(-t)) / n


def kernel_g(spec: SimpleContestSpec, t, which: Objective | str = Objective.TOTAL):
    """Kernel ``G_(m,l)(t)`` (total effort) or ``G^(1)_(m,l)(t)`` (max effort).

    ``C(n-1, l) (1-t)^{n-l-1} t^{l-1} / zeta(t) * int_0^t kappa(p) dp`` where
    ``zeta(t) = sum_{j<m} C(n-1, j) t^j (1-t)^{n-1-j}`` and ``kappa`` is
    ``zeta`` for total effort or its first summand ``(1-p)^{n-1}`` for
    maximum effort.

    Raises:
        DomainError: if any ``t`` lies outside ``(0, 1)``.
    """
    which = Objective(which)
    arr = np.asarray(t, dtype=float)
    if np.any((arr <= 0) | (arr >= 1)):
        raise DomainError("kernel argument must lie in (0, 1)")
    value = _kernel(spec.n, spec.m, spec.l, arr, which)
    return float(value) if np.ndim(t) == 0 else value


def _kernel(n: int, m: int, l: int, t: np.ndarray, which: Objective) -> np.ndarray:
    if l >= m:
        return np.zeros_like(t)
    # Gauss nodes in the outermost panels can round onto the endpoints.
    t = np.clip(t, np.finfo(float).tiny, np.nextafter(1.0, 0.0))
    with np.errstate(divide="ignore"):
        inner = _zeta_integral(n, m, t) if which is Objective.TOTAL else _top_integral(n, t)
        log_g = (
            log_binomial_coefficient(n - 1, l)
            + special.xlog1py(n - l - 1, -t)
            + special.xlogy(l - 1, t)
            - _log_zeta(n, m, t)
            + np.log(inner)
        )
    return np.exp(log_g)


def complete_kernels(n: int, t) -> np.ndarray:
    """``G_(m,m-1)(t)`` for every ``m = 2..n`` at once (columns), O(n) work per node.

    Uses one row of binomial log-probabilities per node: the ``m``-th column
    needs the pmf at ``m-1``, the CDF up to ``m-1`` (a running log-sum-exp)
    and ``E[min(Bin(n, t), m)]`` (a running sum of tail probabilities).
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    log_pmf = binomial_log_terms(n - 1, t, n - 1)
    log_cdf = np.logaddexp.accumulate(log_pmf, axis=-1)
    tails = special.bdtrc(np.arange(n, dtype=float), n, t[:, None])
    e_min = np.cumsum(tails, axis=-1)
    g = np.exp(log_pmf - log_cdf - np.log(t)[:, None]) * e_min / n
    return g[:, 1:]


def _default_edges(n: int, m: int, l: int) -> np.ndarray:
    """A partition of ``[0, 1]`` graded toward both ends and the kernel's bulk."""
    edges = [
        np.linspace(0.0, 1.0, 65),
        np.geomspace(1e-14, 1.0, 60),
        1.0 - np.geomspace(1e-14, 1.0, 60),
    ]
    for centre in {l / n, m / n, 1.0 / n}:
        width = 4.0 * math.sqrt(max(centre * (1 - centre), 1.0 / n) / n)
        edges.append(np.clip(np.linspace(centre - width, centre + width, 17), 0.0, 1.0))
    return np.unique(np.concatenate(edges))


@dataclass(frozen=True)
class KernelTable:
    """Tabulated ``G`` and ``H = int_0^q G`` on a composite Gauss rule over ``[0, 1]``.

    ``q``, ``g`` and ``h`` are flattened node arrays; :meth:`h_at` evaluates
    ``H`` accurately at arbitrary quantiles.
    """

    n: int
    m: int
    l: int
    which: Objective
    q: np.ndarray
    g: np.ndarray
    h: np.ndarray
    h_edges: np.ndarray
    rule: PanelRule = field(repr=False)

    @property
    def total(self) -> float:
        """``H(1) = int_0^1 G``."""
        return float(self.h_edges[-1])

    def h_at(self, q) -> np.ndarray:
        """``H(q)`` via the tabulated panel totals plus a Gauss rule on the partial panel."""
        arr = np.asarray(q, dtype=float)
        flat = np.clip(arr.ravel(), 0.0, 1.0)
        edges = self.rule.edges
        idx = np.clip(np.searchsorted(edges, flat, side="right") - 1, 0, len(edges) - 2)
        left = edges[idx]
        x, w = gauss_legendre(self.rule.order)
        half = 0.5 * (flat - left)
        nodes = (left + half)[:, None] + half[:, None] * x[None, :]
        nodes = np.clip(nodes, 1e-300, 1.0 - 1e-16)
        partial = np.sum(_kernel(self.n, self.m, self.l, nodes, self.which) * w[None, :], axis=1) * half
        value = self.h_edges[idx] + partial
        return value.reshape(arr.shape)


def build_kernel_table(
    spec: SimpleContestSpec,
    which: Objective | str = Objective.TOTAL,
    quad: Quadrature | None = None,
) -> KernelTable:
    """Resolve ``G`` adaptively on ``[0, 1]`` and accumulate ``H``."""
    which = Objective(which)
    quad = quad or OBJECTIVE_QUADRATURE
    n, m, l = spec.n, spec.m, spec.l

    def g(t):
        return _kernel(n, m, l, t, which)

    if spec.trivial:
        rule = PanelRule(np.array([0.0, 1.0]), 12)
    else:
        rule = adaptive_panels(g, _default_edges(n, m, l), quad)
    values = g(rule.nodes)
    h_edges, h_nodes = rule.cumulative(values)
    return KernelTable(n, m, l, which, rule.nodes.ravel(), values.ravel(), h_nodes.ravel(), h_edges, rule)


# ---------------------------------------------------------------------------
# Quantile form
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuantileFormResult:
    """Value of the quantile form with its truncation diagnostics."""

    value: float
    boundary_term: float
    tail_bound: float
    panels: int


def quantile_form(
    dist: AbilityDistribution,
    spec: SimpleContestSpec,
    which: Objective | str = Objective.TOTAL,
    quad: Quadrature | None = None,
    table: KernelTable | None = None,
) -> QuantileFormResult:
    """``n [v(1) H(1) + int |v'(q)| H(q) dq]`` with diagnostics.

    On ``[1/2, 1]`` the integral is taken in its by-parts form
    ``int (v(q) - v(1)) G(q) dq`` plus a boundary piece at ``q = 1/2``.

    The boundary term vanishes when the support starts at 0.  For an
    unbounded support the integral runs over ``[Q_MIN, 1]``; the dropped
    piece is bounded by ``n int_0^{Q_MIN} G(q) v(q) dq`` and must stay below
    ``TAIL_TOLERANCE`` times the result.

    Raises:
        NonConvergence: if the truncated tail is not negligible.
    """
    which = Objective(which)
    quad = quad or OBJECTIVE_QUADRATURE
    n = spec.n
    if spec.trivial:
        return QuantileFormResult(0.0, 0.0, 0.0, 0)
    table = table or build_kernel_table(spec, which, quad)
    q_lo, q_hi = dist.quantile_bounds()
    v_top = float(dist.ability_at(1.0))
    split = 0.5

    def lower(q):
        h = table.h_at(q)
        # H vanishes faster than |v'| can blow up where the density dies out.
        with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
            return np.where(h > 0, dist.quantile_slope(q) * h, 0.0)

    def upper(q):
        # By parts on [split, 1]: |v'| can be singular at q = 1, where the
        # nodes themselves carry few significant digits of 1 - q.
        return (dist.ability_at(q) - v_top) * _kernel(n, spec.m, spec.l, q, which)

    edges = np.concatenate([table.rule.edges, dist.quantile_kinks()])
    low_edges = np.unique(np.concatenate([[q_lo], edges[(edges > q_lo) & (edges < split)], [split]]))
    high_edges = np.unique(np.concatenate([[split], edges[(edges > split) & (edges < q_hi)], [q_hi]]))
    low_rule = adaptive_panels(lower, low_edges, quad)
    high_rule = adaptive_panels(upper, high_edges, quad)
    body = low_rule.integrate(lower(low_rule.nodes)) + high_rule.integrate(upper(high_rule.nodes))
    body += (float(dist.ability_at(split)) - v_top) * float(table.h_at(split))
    boundary = n * v_top * table.total
    value = n * body + boundary
    panels = len(low_rule.edges) + len(high_rule.edges) - 2
    tail = 0.0
    if q_lo > 0:
        tail_rule = adaptive_panels(
            lambda q: _kernel(n, spec.m, spec.l, q, which) * dist.quantile_value(q),
            np.geomspace(q_lo * 1e-30, q_lo, 40),
            quad,
        )
        tail = n * tail_rule.integrate(
            _kernel(n, spec.m, spec.l, tail_rule.nodes, which) * dist.quantile_value(tail_rule.nodes)
        )
        if tail > TAIL_TOLERANCE * abs(value):
            raise NonConvergence(f"truncated upper tail {tail:.3e} is not negligible against {value:.3e}")
    return QuantileFormResult(float(value), float(boundary), float(tail), panels)


def total_effort(dist: AbilityDistribution, spec: SimpleContestSpec, quad: Quadrature | None = None) -> float:
    """Ex-ante total effort ``S(m, n, l)`` of a simple contest, by the quantile form."""
    return quantile_form(dist, spec, Objective.TOTAL, quad).value


def max_effort(dist: AbilityDistribution, spec: SimpleContestSpec, quad: Quadrature | None = None) -> float:
    """Ex-ante maximum individual effort ``S^(1)(m, n, l)``, by the quantile form."""
    return quantile_form(dist, spec, Objective.MAX, quad).value


# ---------------------------------------------------------------------------
# Beta form
# ---------------------------------------------------------------------------


def beta_form_ratio(n: int, m: int, q) -> np.ndarray:
    """``beta(q; n-m, m) / I_q(n-m, m)``, evaluated in log space."""
    q = np.asarray(q, dtype=float)
    return np.exp(log_beta_pdf(q, n - m, m) - log_regularized_incomplete_beta(q, n - m, m))


def total_effort_beta_rep(
    dist: AbilityDistribution, n: int, m: int, quad: Quadrature | None = None
) -> float:
    """Total effort of the complete simple contest ``(m, n, m-1)`` by the beta form.

    ``int F^{-1}(q) beta(q; n-m+1, m) dq + m/(n-m) int F^{-1}(q) q/(1-q)
    beta(q; n-m, m)/I_q(n-m, m) (1 - I_q(n-m, m+1)) dq``, where ``q`` is a
    CDF level (lower-tail probability).

    Raises:
        DomainError: unless ``2 <= m < n``.
    """
    if not 2 <= m < n:
        raise DomainError("the beta form needs 2 ≤ m < n")
    quad = quad or OBJECTIVE_QUADRATURE
    lo, hi = 0.0, 1.0 - dist.quantile_bounds()[0]

    def integrand(p):
        p = np.clip(p, np.finfo(float).tiny, min(hi, np.nextafter(1.0, 0.0)))
        x = dist.inverse_cdf(p)
        first = np.exp(log_beta_pdf(p, n - m + 1, m))
        # 1 - I_p(n-m, m+1) = I_{1-p}(m+1, n-m), accurate as p -> 1.
        upper = special.betainc(m + 1, n - m, 1.0 - p)
        second = (m / (n - m)) * p / (1.0 - p) * beta_form_ratio(n, m, p) * upper
        return x * (first + second)

    centre = 1.0 - m / n
    width = 4.0 * math.sqrt(max(centre * (1 - centre), 1.0 / n) / n)
    edges = np.unique(
        np.concatenate(
            [
                np.linspace(lo, hi, 33),
                np.clip(np.linspace(centre - width, centre + width, 17), lo, hi),
                hi - (hi - lo) * np.geomspace(1e-14, 1.0, 40),
                lo + (hi - lo) * np.geomspace(1e-14, 1.0, 40),
                1.0 - np.asarray(dist.quantile_kinks(), dtype=float),
            ]
        )
    )
    rule = adaptive_panels(integrand, edges, quad)
    return rule.integrate(integrand(rule.nodes))


# ---------------------------------------------------------------------------
# Order-statistics form
# ---------------------------------------------------------------------------


def order_statistic_density(dist: AbilityDistribution, k: int, n: int, x):
    """Density of the ``k``-th highest of ``n`` abilities,
    ``n C(n-1, k-1) (1-F)^{k-1} F^{n-k} f``."""
    u = np.asarray(dist.cdf(x), dtype=float)
    log_coef = math.log(n) + log_binomial_coefficient(n - 1, k - 1)
    with np.errstate(divide="ignore"):
        log_d = log_coef + special.xlog1py(k - 1, -u) + special.xlogy(n - k, u)
    return np.exp(log_d) * dist.pdf(x)


def effort_by_order_statistics(
    dist: AbilityDistribution,
    config: ContestConfig,
    cost: CostModel | None = None,
    which: Objective | str = Objective.TOTAL,
    schedule: EffortSchedule | None = None,
    quad: Quadrature | None = None,
) -> float:
    """``sum_{i<=m} E[b*(X_(i))]`` (total) or ``E[b*(X_(1))]`` (max), any prizes and cost.

    Integrates the solved schedule against order-statistic densities,
    independently of the kernels above.  The integral runs over the CDF
    level ``u = F(x)``, where those densities are polynomials, so singular
    prior densities do not reach the integrand.
    """
    which = Objective(which)
    cost = cost or LinearCost()
    quad = quad or Quadrature(relative_tolerance=1e-10, absolute_tolerance=1e-14, max_subdivisions=500)
    ctx = ShortlistContext(dist, config.n, config.m)
    schedule = schedule or solve_equilibrium(ctx, config, cost, grid_size=512)
    n = config.n
    ranks = np.arange(1, config.m + 1) if which is Objective.TOTAL else np.array([1])
    log_coef = math.log(n) + log_binomial_coefficient(n - 1, ranks - 1)
    u_hi = 1.0 - dist.quantile_bounds()[0]

    def integrand(u):
        with np.errstate(divide="ignore"):
            log_w = log_coef + special.xlog1py(ranks - 1, -u) + special.xlogy(n - ranks, u)
        return float(np.exp(log_w).sum() * schedule(float(dist.inverse_cdf(u))))

    knots = [1.0 - k for k in dist.quantile_kinks()] + list(np.linspace(0, u_hi, 9)[1:-1])
    return integrate(integrand, 0.0, u_hi, quad, points=knots)


# ---------------------------------------------------------------------------
# Asymptotics
# ---------------------------------------------------------------------------


def _check_ratio(k: float) -> None:
    if not 0 < k < 1:
        raise DomainError("admission ratio must lie in (0, 1)")


def asymptotic_phi(dist: AbilityDistribution, k: float, quad: Quadrature | None = None) -> float:
    """Large-``n`` limit of ``S(kn, n) / n`` for complete simple contests.

    ``int_0^{1-k} F^{-1}(q) (q/(1-q)) (k/(1-k)) (1/q - k/(q(1-q))) dq``.
    """
    _check_ratio(k)
    quad = quad or OBJECTIVE_QUADRATURE

    def integrand(q):
        return float(dist.inverse_cdf(q)) * (q / (1 - q)) * (k / (1 - k)) * (1 / q - k / (q * (1 - q)))

    return integrate(integrand, 0.0, 1.0 - k, quad)


def foc_lhs(dist: AbilityDistribution, k: float, quad: Quadrature | None = None) -> float:
    """Stationarity condition of the admission ratio, ``int_k^1 v(q) (1/q - (2k-k^2)/q^2) dq``.

    Proportional to the derivative of :func:`asymptotic_phi`; its root in
    ``k`` is the asymptotically optimal ratio.
    """
    _check_ratio(k)
    quad = quad or Quadrature(relative_tolerance=1e-11, absolute_tolerance=1e-14, max_subdivisions=400)
    c = 2 * k - k * k

    def integrand(q):
        return float(dist.ability_at(q)) * (1 / q - c / (q * q))

    return integrate(integrand, k, 1.0, quad, points=[c])


def complete_simple_efforts(
    dist: AbilityDistribution, n: int, quad: Quadrature | None = None
) -> dict[int, tuple[float, str]]:
    """``S(m, n, m-1)`` for every ``m = 2..n`` with the representation used.

    The beta form serves ``m < n``; at ``m = n`` its parameters degenerate
    and the quantile form takes over.
    """
    out: dict[int, tuple[float, str]] = {}
    for m in range(2, n + 1):
        if m < n:
            out[m] = (total_effort_beta_rep(dist, n, m, quad), "beta")
        else:
            out[m] = (total_effort(dist, SimpleContestSpec(n, n, n - 1), quad), "quantile")
    return out

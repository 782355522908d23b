"""Symmetric equilibrium effort of admitted contestants.

Under a shortlist, admitted contestants play the unique symmetric equilibrium

    b*(x) = g^{-1}( int_0^x sum_{l<m} C(n-1,l-1) (n-l) (V_l - V_{l+1})
                        F^{n-l-1}(t) (1-F(t))^{l-1} f(t) t / J(t) dt ),

where ``g`` is the effort cost (divided by ability) and ``J`` the admission
probability.  The cumulative integral is tabulated once over a Chebyshev
grid in quantile space and interpolated with a monotone cubic whose node
slopes are the exact integrand values.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PPoly
from scipy.special import logsumexp, xlogy

from .beliefs import ShortlistContext, rank_probabilities
from .errors import ConfigMismatch, DomainError, NonConvergence
from .numerics import (
    Quadrature,
    RootBracket,
    adaptive_panels,
    find_root,
    log_binomial_coefficient,
)

# ---------------------------------------------------------------------------
# Cost models
# ---------------------------------------------------------------------------


class CostModel(ABC):
    """Strictly increasing effort cost ``g`` with ``g(0) = 0``."""

    @abstractmethod
    def g(self, effort): ...

    @abstractmethod
    def inverse(self, value): ...

    @property
    @abstractmethod
    def spec(self) -> str: ...

    @property
    def is_linear(self) -> bool:
        return False


@dataclass(frozen=True)
class LinearCost(CostModel):
    slope: float = 1.0

    def __post_init__(self) -> None:
        if not self.slope > 0:
            raise DomainError("linear cost slope must be positive")

    def g(self, effort):
        return self.slope * np.asarray(effort, dtype=float)

    def inverse(self, value):
        return np.asarray(value, dtype=float) / self.slope

    @property
    def spec(self) -> str:
        return f"linear:{self.slope:g}"

    @property
    def is_linear(self) -> bool:
        return True


@dataclass(frozen=True)
class PowerCost(CostModel):
    """``g(e) = scale * e^exponent`` with ``exponent >= 1``."""

    exponent: float = 2.0
    scale: float = 1.0

    def __post_init__(self) -> None:
        if not (self.exponent >= 1 and self.scale > 0):
            raise DomainError("power cost needs exponent >= 1 and scale > 0")

    def g(self, effort):
        return self.scale * np.power(np.maximum(np.asarray(effort, dtype=float), 0.0), self.exponent)

    def inverse(self, value):
        return np.power(np.maximum(np.asarray(value, dtype=float), 0.0) / self.scale, 1.0 / self.exponent)

    @property
    def spec(self) -> str:
        return f"power:{self.exponent:g},{self.scale:g}"

    @property
    def is_linear(self) -> bool:
        return self.exponent == 1


@dataclass(frozen=True)
class CustomCost(CostModel):
    """A user-supplied cost; the inverse is found by bracketed root finding if omitted."""

    func: Callable[[float], float]
    func_inverse: Callable[[float], float] | None = None
    name: str = "custom"

    def g(self, effort):
        arr = np.asarray(effort, dtype=float)
        return np.vectorize(self.func, otypes=[float])(arr)

    def _invert_one(self, y: float) -> float:
        if y <= 0:
            return 0.0
        hi = 1.0
        while self.func(hi) < y:
            hi *= 2.0
            if hi > 1e300:
                raise NonConvergence(f"cannot bracket g^-1({y})")
        return find_root(lambda e: self.func(e) - y, RootBracket(0.0, hi, 1e-14))

    def inverse(self, value):
        arr = np.asarray(value, dtype=float)
        fn = self.func_inverse or self._invert_one
        return np.vectorize(fn, otypes=[float])(arr)

    @property
    def spec(self) -> str:
        return self.name


def parse_cost(text: str) -> CostModel:
    """``linear:k`` or ``power:p[,scale]``."""
    name, _, args = text.strip().partition(":")
    try:
        if name == "linear":
            return LinearCost(float(args) if args else 1.0)
        if name == "power":
            parts = [float(a) for a in args.split(",")] if args else [2.0]
            return PowerCost(*parts)
    except (TypeError, ValueError) as exc:
        raise DomainError(f"cannot parse cost spec {text!r}: {exc}") from exc
    raise DomainError(f"unknown cost model {text!r}")


# ---------------------------------------------------------------------------
# Contest configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContestConfig:
    """Registrants ``n``, shortlist ``m``, prize vector ``V`` and budget ``B``."""

    n: int
    m: int
    prizes: tuple[float, ...]
    budget: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "prizes", tuple(float(v) for v in self.prizes))
        if self.n < 2:
            raise DomainError("n must be ≥ 2")
        if not 2 <= self.m <= self.n:
            raise DomainError(f"shortlist size must satisfy 2 ≤ m ≤ n, got m={self.m}, n={self.n}")
        if len(self.prizes) != self.m:
            raise DomainError(f"need {self.m} prizes, got {len(self.prizes)}")
        v = np.asarray(self.prizes)
        if np.any(v < 0) or np.any(np.diff(v) > 1e-15):
            raise DomainError("prizes must be non-negative and non-increasing")
        if self.budget < 0 or v.sum() > self.budget * (1 + 1e-12) + 1e-15:
            raise DomainError(f"prizes sum to {v.sum():g}, above the budget {self.budget:g}")

    @classmethod
    def winner_take_all(cls, n: int, m: int, budget: float = 1.0) -> "ContestConfig":
        return cls(n, m, (budget,) + (0.0,) * (m - 1), budget)

    @classmethod
    def simple(cls, n: int, m: int, l: int, budget: float = 1.0) -> "ContestConfig":
        """``l`` equal prizes of ``budget / l`` and ``m - l`` empty ones."""
        if not 1 <= l <= m:
            raise DomainError(f"number of prizes must lie in [1, m], got {l}")
        return cls(n, m, (budget / l,) * l + (0.0,) * (m - l), budget)

    @classmethod
    def from_gaps(cls, n: int, m: int, gaps: Sequence[float], budget: float = 1.0) -> "ContestConfig":
        """Build prizes from ``Z_l = l (V_l - V_{l+1})`` (with ``V_{m+1} = 0``)."""
        z = np.asarray(gaps, dtype=float)
        if z.shape != (m,):
            raise DomainError(f"need {m} prize gaps")
        steps = z / np.arange(1, m + 1)
        prizes = np.cumsum(steps[::-1])[::-1]
        return cls(n, m, tuple(prizes), budget)

    @property
    def prize_gaps(self) -> np.ndarray:
        """``Z_l = l (V_l - V_{l+1})`` for ``l = 1..m``; they sum to ``sum(V)``."""
        v = np.append(np.asarray(self.prizes), 0.0)
        return np.arange(1, self.m + 1) * (v[:-1] - v[1:])


def parse_prizes(text: str, n: int, m: int, budget: float = 1.0) -> ContestConfig:
    """``wta``, ``equal:l``, ``complete`` or a comma-separated prize list."""
    text = text.strip().lower()
    if text == "wta":
        return ContestConfig.winner_take_all(n, m, budget)
    if text == "complete":
        return ContestConfig.simple(n, m, m - 1, budget)
    if text.startswith("equal:"):
        return ContestConfig.simple(n, m, int(text.split(":", 1)[1]), budget)
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise DomainError(f"cannot parse prizes {text!r}") from exc
    return ContestConfig(n, m, values, budget)


def _check_config(ctx: ShortlistContext, config: ContestConfig) -> None:
    if config.n != ctx.n or config.m != ctx.m:
        raise ConfigMismatch(
            f"config is for (n={config.n}, m={config.m}) but context is (n={ctx.n}, m={ctx.m})"
        )


# ---------------------------------------------------------------------------
# Integrand
# ---------------------------------------------------------------------------


def gap_weight(n: int, m: int, prizes: Sequence[float], u, q=None) -> np.ndarray:
    """Distribution-free part of the equilibrium integrand.

    ``sum_{l<m} C(n-1,l-1) (n-l) (V_l - V_{l+1}) u^{n-l-1} (1-u)^{l-1} / J(u)``
    with ``u = F(t)``.  Pass ``q = 1 - u`` as well when it is known to more
    digits than ``1 - u`` (tiny upper-tail quantiles).
    """
    u = np.asarray(u, dtype=float)
    q = 1.0 - u if q is None else np.asarray(q, dtype=float)
    u = np.maximum(u, 1e-300)
    v = np.append(np.asarray(prizes, dtype=float), 0.0)
    diffs = v[:-1] - v[1:]
    if m < n:
        # Same clamped u as the numerator, so the ratio stays finite at u = 0.
        k = np.arange(m, dtype=float)
        log_j = logsumexp(
            log_binomial_coefficient(n - 1, k) + xlogy(k, q[..., None]) + xlogy(n - 1 - k, u[..., None]), axis=-1
        )
    else:
        log_j = 0.0
    out = np.zeros(np.broadcast(u, q).shape)
    for l in range(1, m):
        if diffs[l - 1] <= 0:
            continue
        log_term = (
            log_binomial_coefficient(n - 1, l - 1)
            + math.log(n - l)
            + xlogy(n - l - 1, u)
            + xlogy(l - 1, q)
            - log_j
        )
        out = out + diffs[l - 1] * np.exp(log_term)
    return out


def equilibrium_integrand(ctx: ShortlistContext, config: ContestConfig, t):
    """Integrand of the equilibrium formula at ability ``t``."""
    _check_config(ctx, config)
    t_arr = np.asarray(t, dtype=float)
    u = np.asarray(ctx.dist.cdf(t_arr), dtype=float)
    weight = gap_weight(ctx.n, ctx.m, config.prizes, u)
    # A vanishing weight wins over an unbounded density at the support's edge.
    with np.errstate(invalid="ignore", over="ignore"):
        value = np.where(weight > 0, weight * ctx.dist.pdf(t_arr) * t_arr, 0.0)
    return float(value) if np.ndim(t) == 0 else value


# ---------------------------------------------------------------------------
# Schedule
# ---------------------------------------------------------------------------


def _limit_slopes(x: np.ndarray, y: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Fritsch-Carlson limiter: shrink node slopes so the Hermite cubic stays monotone."""
    d = np.maximum(d.copy(), 0.0)
    secant = np.diff(y) / np.diff(x)
    for k, s in enumerate(secant):
        if s <= 0:
            d[k] = d[k + 1] = 0.0
            continue
        a, b = d[k] / s, d[k + 1] / s
        r = a * a + b * b
        if r > 9.0:
            tau = 3.0 / math.sqrt(r)
            d[k], d[k + 1] = tau * a * s, tau * b * s
    return d


def _limit_piecewise(
    x: np.ndarray, y: np.ndarray, right: np.ndarray, left: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Apply :func:`_limit_slopes` on each piece between slope jumps."""
    right, left = right.copy(), left.copy()
    last = len(x) - 1
    bounds = [0] + [i for i in range(1, last) if left[i] != right[i]] + [last]
    for a, b in zip(bounds, bounds[1:]):
        d = _limit_slopes(x[a : b + 1], y[a : b + 1], np.append(right[a:b], left[b]))
        right[a:b] = d[:-1]
        left[a + 1 : b] = d[1:-1]
        left[b] = d[-1]
    right[last] = left[last]
    left[0] = right[0]
    return right, left


@dataclass(frozen=True)
class EffortSchedule:
    """Tabulated equilibrium effort with monotone cubic interpolation.

    ``cumulative`` holds the integral inside ``g^{-1}``; interpolation acts
    on it (it is smooth with known slopes) and the cost inverse is applied
    afterwards, so the schedule is monotone for every cost model.

    ``slopes`` are right-hand derivatives.  Where the prior density jumps,
    ``left_slopes`` differs from ``slopes`` and the interpolant is split
    there, with each piece using its own one-sided slope.
    """

    grid: np.ndarray
    quantiles: np.ndarray
    efforts: np.ndarray
    cumulative: np.ndarray
    slopes: np.ndarray
    cost: CostModel
    left_slopes: np.ndarray | None = None
    interpolation: str = "monotone-cubic-hermite"
    _spline: PPoly = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        left = self.slopes if self.left_slopes is None else self.left_slopes
        last = len(self.grid) - 1
        bounds = [0] + [i for i in range(1, last) if left[i] != self.slopes[i]] + [last]
        pieces = [
            CubicHermiteSpline(
                self.grid[a : b + 1], self.cumulative[a : b + 1], np.append(self.slopes[a:b], left[b])
            )
            for a, b in zip(bounds, bounds[1:])
        ]
        breaks = np.concatenate([pieces[0].x] + [p.x[1:] for p in pieces[1:]])
        spline = PPoly(np.hstack([p.c for p in pieces]), breaks, extrapolate=False)
        object.__setattr__(self, "_spline", spline)

    def cumulative_at(self, x):
        """Interpolated value of the integral inside ``g^{-1}``."""
        arr = np.asarray(x, dtype=float)
        lo, hi = self.grid[0], self.grid[-1]
        inner = self._spline(np.clip(arr, lo, hi))
        beyond = self.cumulative[-1] + self.slopes[-1] * (arr - hi)
        value = np.where(arr <= lo, 0.0, np.where(arr > hi, beyond, inner))
        return np.maximum(value, 0.0)

    def __call__(self, x):
        value = self.cost.inverse(self.cumulative_at(x))
        return float(value) if np.ndim(x) == 0 else value


def _chebyshev_quantiles(q_lo: float, q_hi: float, size: int) -> np.ndarray:
    k = np.arange(size + 1)
    return q_lo + (q_hi - q_lo) * 0.5 * (1.0 - np.cos(np.pi * k / size))


def solve_equilibrium(
    ctx: ShortlistContext,
    config: ContestConfig,
    cost: CostModel | None = None,
    grid_size: int = 256,
    quad: Quadrature | None = None,
) -> EffortSchedule:
    """Tabulate ``b*(x)`` on ``grid_size + 1`` Chebyshev-spaced quantiles plus any density kinks.

    The inner integral is accumulated once in quantile space,
    ``int_q^1 gap_weight(1 - s) v(s) ds``, on an adaptive composite rule
    seeded with the Chebyshev nodes, and reused at every grid point.
    """
    _check_config(ctx, config)
    if grid_size < 64:
        raise DomainError("grid_size must be at least 64")
    cost = cost or LinearCost()
    quad = quad or Quadrature(relative_tolerance=1e-12, absolute_tolerance=1e-15)
    dist = ctx.dist
    q_lo, q_hi = dist.quantile_bounds()
    kinks = np.asarray(dist.quantile_kinks(), dtype=float)
    q_nodes = np.unique(np.concatenate([_chebyshev_quantiles(q_lo, q_hi, grid_size), kinks]))

    def integrand(q):
        u = 1.0 - q
        return gap_weight(ctx.n, ctx.m, config.prizes, u, q) * dist.ability_at(np.clip(q, q_lo, q_hi))

    if np.all(np.asarray(config.prizes) == config.prizes[0]):
        running = np.zeros_like(q_nodes)
    else:
        rule = adaptive_panels(integrand, q_nodes, quad)
        at_edges, _ = rule.cumulative(integrand(rule.nodes))
        idx = np.searchsorted(rule.edges, q_nodes)
        if not np.allclose(rule.edges[idx], q_nodes, rtol=0, atol=0):
            raise NonConvergence("adaptive partition lost a grid node")
        from_lo = at_edges[idx]
        running = np.maximum(from_lo[-1] - from_lo, 0.0)  # int_q^1

    # Reverse to ascending ability.
    quantiles = q_nodes[::-1].copy()
    cumulative = running[::-1].copy()
    cumulative[0] = 0.0
    grid = np.asarray(dist.ability_at(quantiles), dtype=float)
    slopes = np.asarray(equilibrium_integrand(ctx, config, grid), dtype=float)
    if not np.all(np.isfinite(slopes)):
        secant = np.gradient(cumulative, grid)
        slopes = np.where(np.isfinite(slopes), slopes, secant)
    left = slopes.copy()
    at_kink = np.isin(quantiles, kinks)
    if np.any(at_kink):
        # The density is right-continuous at a kink; take the other side just below it.
        below = np.nextafter(grid[at_kink], -np.inf)
        left[at_kink] = np.asarray(equilibrium_integrand(ctx, config, below), dtype=float)
    slopes, left = _limit_piecewise(grid, cumulative, slopes, left)
    efforts = np.asarray(cost.inverse(cumulative), dtype=float)
    return EffortSchedule(grid, quantiles, efforts, cumulative, slopes, cost, left)


# ---------------------------------------------------------------------------
# Utility and equilibrium certificate
# ---------------------------------------------------------------------------


def expected_utility(
    ctx: ShortlistContext,
    config: ContestConfig,
    cost: CostModel,
    x: float,
    gamma: float,
    schedule: EffortSchedule,
) -> float:
    """Interim payoff of ability ``x`` mimicking ability ``gamma``.

    ``sum_l V_l P_l(gamma | x) - g(b(gamma)) / x``.
    """
    _check_config(ctx, config)
    if not x > 0:
        raise DomainError("ability must be positive to evaluate utility")
    probs = rank_probabilities(ctx, x, gamma)
    return float(np.dot(config.prizes, probs) - cost.g(schedule(gamma)) / x)


def best_response_gap(
    ctx: ShortlistContext,
    config: ContestConfig,
    cost: CostModel,
    schedule: EffortSchedule,
    x: float,
    deviation_grid: int = 101,
) -> float:
    """Largest utility gain from mimicking any ability on a quantile-uniform grid.

    The grid spans the whole support, so deviations both below and above
    the true ability are tried.  A correct equilibrium gives a gap near 0.
    """
    if deviation_grid < 11:
        raise DomainError("deviation_grid must be at least 11")
    q_lo, q_hi = ctx.dist.quantile_bounds()
    gammas = ctx.dist.ability_at(np.linspace(q_lo, q_hi, deviation_grid))
    truthful = expected_utility(ctx, config, cost, x, x, schedule)
    best = max(expected_utility(ctx, config, cost, x, float(g), schedule) for g in gammas)
    return max(best - truthful, 0.0)

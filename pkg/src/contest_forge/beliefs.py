"""Posterior beliefs of an admitted contestant.

Once the top ``m`` of ``n`` registrants (by ability) are shortlisted, an
admitted contestant with ability ``x1`` knows their opponents are drawn from
a posterior that is tilted upward relative to the prior.  Everything here is
written in terms of ``u = F(x)`` so one code path serves every prior.

Notation: ``J(x)`` is the prior probability that ability ``x`` ranks in the
top ``m`` of ``n`` draws, ``Pr(Bin(n-1, 1-F(x)) <= m-1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.special import logsumexp

from .distributions import AbilityDistribution
from .errors import DimensionMismatch, DomainError, RankOutOfRange
from .numerics import binomial_log_terms, incomplete_beta

#: Below this gap a report is treated as truthful, which selects the
#: analytic limit branch of the rank probabilities.
TRUTHFUL_GAP = 1e-12


@dataclass(frozen=True)
class ShortlistContext:
    """A prior together with the registrant count ``n`` and shortlist size ``m``."""

    dist: AbilityDistribution
    n: int
    m: int

    def __post_init__(self) -> None:
        if int(self.n) != self.n or int(self.m) != self.m:
            raise DomainError("n and m must be integers")
        if self.n < 2:
            raise DomainError("n must be ≥ 2")
        if not 2 <= self.m <= self.n:
            raise DomainError(f"shortlist size must satisfy 2 ≤ m ≤ n, got m={self.m}, n={self.n}")


def _scalar_or_array(value: np.ndarray, like):
    return float(value) if np.ndim(like) == 0 else value


def admission_probability(n: int, m: int, u) -> np.ndarray:
    """``J`` as a function of ``u = F(x)``: ``Pr(Bin(n-1, 1-u) <= m-1)``.

    Summed in log space, so it stays accurate when most terms underflow.
    """
    u = np.asarray(u, dtype=float)
    if m >= n:
        return np.ones_like(u)
    terms = binomial_log_terms(n - 1, 1.0 - u, m - 1)
    return np.exp(np.minimum(logsumexp(terms, axis=-1), 0.0))


def normalizer_j(ctx: ShortlistContext, x):
    """``J(F, n, m, x) = sum_{j=1}^{m} C(n-1, j-1) F^{n-j} (1-F)^{j-1}``."""
    u = ctx.dist.cdf(x)
    return _scalar_or_array(admission_probability(ctx.n, ctx.m, u), x)


def normalizer_j_integral_form(ctx: ShortlistContext, x):
    """The same normalizer written with an incomplete beta integral.

    ``C(n-1, m-1) [F^{n-m} (1-F)^{m-1} + (m-1) B_F(n-m+1, m-1)]``.
    """
    n, m = ctx.n, ctx.m
    u = np.asarray(ctx.dist.cdf(x), dtype=float)
    value = comb(n - 1, m - 1) * (
        u ** (n - m) * (1.0 - u) ** (m - 1) + (m - 1) * incomplete_beta(u, n - m + 1, m - 1)
    )
    return _scalar_or_array(value, x)


def joint_posterior_pdf(ctx: ShortlistContext, x1: float, others) -> float:
    """Posterior density of the other ``m-1`` admitted abilities given ``x1``.

    Equals ``C(n-1, m-1) F^{n-m}(min(x_(1), x1)) prod f(x_j) / J(x1)``,
    where ``x_(1)`` is the smallest of the other admitted abilities: the
    ``n - m`` eliminated registrants must all fall below every admitted one.

    Raises:
        DimensionMismatch: if ``others`` does not hold ``m - 1`` abilities.
    """
    others = np.atleast_1d(np.asarray(others, dtype=float))
    if others.shape != (ctx.m - 1,):
        raise DimensionMismatch(f"expected {ctx.m - 1} opponent abilities, got {others.shape}")
    floor = min(float(others.min()), float(x1))
    dens = np.prod(ctx.dist.pdf(others))
    u_floor = ctx.dist.cdf(floor)
    return float(comb(ctx.n - 1, ctx.m - 1) * u_floor ** (ctx.n - ctx.m) * dens / normalizer_j(ctx, x1))


def _reduced_normalizer(n: int, m: int, u: np.ndarray) -> np.ndarray:
    """``F^{n-m}(1-F)^{m-2} + (m-2) B_F(n-m+1, m-2)`` at ``F = u``.

    This is the normalizer of the (n-1, m-1) problem divided by
    ``C(n-2, m-2)``; the incomplete-beta term is absent when ``m = 2``.
    """
    value = u ** (n - m) * (1.0 - u) ** (m - 2)
    if m > 2:
        value = value + (m - 2) * incomplete_beta(u, n - m + 1, m - 2)
    return value


def marginal_posterior_pdf(ctx: ShortlistContext, x1: float, z):
    """Posterior density of one co-admitted opponent's ability at ``z``.

    ``C(n-1, m-1) * R(min(z, x1)) * f(z) / J(x1)`` with ``R`` from
    :func:`_reduced_normalizer`.
    """
    n, m, dist = ctx.n, ctx.m, ctx.dist
    z_arr = np.asarray(z, dtype=float)
    u = np.asarray(dist.cdf(np.minimum(z_arr, x1)), dtype=float)
    value = comb(n - 1, m - 1) * _reduced_normalizer(n, m, u) * dist.pdf(z_arr) / normalizer_j(ctx, x1)
    return _scalar_or_array(value, z)


def _cdf_below(n: int, m: int, u: np.ndarray) -> np.ndarray:
    """Unnormalized posterior CDF for ``z <= x1`` as a function of ``u = F(z)``.

    ``B_u(n-m+1, m-1) + (m-2) int_0^u B_t(n-m+1, m-2) dt`` where the inner
    integral is ``u B_u(a, b) - B_u(a+1, b)`` by parts.
    """
    a = n - m + 1
    value = incomplete_beta(u, a, m - 1)
    if m > 2:
        value = value + (m - 2) * (u * incomplete_beta(u, a, m - 2) - incomplete_beta(u, a + 1, m - 2))
    return value


def marginal_posterior_cdf(ctx: ShortlistContext, x1: float, z):
    """Posterior probability that a co-admitted opponent's ability is at most ``z``."""
    n, m, dist = ctx.n, ctx.m, ctx.dist
    z_arr = np.asarray(z, dtype=float)
    coef = comb(n - 1, m - 1) / normalizer_j(ctx, x1)
    u_z = np.asarray(dist.cdf(z_arr), dtype=float)
    u_1 = float(dist.cdf(x1))
    below = coef * _cdf_below(n, m, np.minimum(u_z, u_1))
    above = coef * np.maximum(u_z - u_1, 0.0) * _reduced_normalizer(n, m, np.asarray(u_1))
    value = np.clip(below + above, 0.0, 1.0)
    return _scalar_or_array(value, z)


def _check_rank(ctx: ShortlistContext, l: int, allow_last: bool = True) -> None:
    top = ctx.m if allow_last else ctx.m - 1
    if int(l) != l or not 1 <= l <= top:
        raise RankOutOfRange(f"rank must lie in [1, {top}], got {l}")


def rank_probability(ctx: ShortlistContext, x: float, gamma: float, l: int) -> float:
    """Perceived probability of finishing at rank ``l`` when reporting ``gamma``.

    The contestant has true ability ``x`` (which fixes their posterior) and
    mimics the equilibrium effort of ability ``gamma``.  Four branches cover
    ``gamma <= x`` versus ``gamma > x`` and ``l < m`` versus ``l = m``.
    """
    _check_rank(ctx, l)
    n, m = ctx.n, ctx.m
    s = float(ctx.dist.cdf(x))
    u = float(ctx.dist.cdf(gamma))
    j_x = float(normalizer_j(ctx, x))
    c_m = comb(n - 1, m - 1)
    if gamma <= x or abs(gamma - x) < TRUTHFUL_GAP:
        u = min(u, s)
        if l < m:
            value = comb(n - 1, l - 1) * u ** (n - l) * (1.0 - u) ** (l - 1)
        else:
            tail = incomplete_beta(s, n - m + 1, m - 1) - incomplete_beta(u, n - m + 1, m - 1)
            value = c_m * (s ** (n - m) * (1.0 - s) ** (m - 1) + (m - 1) * tail)
    elif l < m:
        # int_0^s t^{n-m} (u-t)^{m-l-1} dt = u^{n-l} B_{s/u}(n-m+1, m-l)
        inner = u ** (n - l) * incomplete_beta(s / u, n - m + 1, m - l)
        bracket = s ** (n - m) * (u - s) ** (m - l) + (m - l) * inner
        value = c_m * comb(m - 1, l - 1) * (1.0 - u) ** (l - 1) * bracket
    else:
        value = c_m * s ** (n - m) * (1.0 - u) ** (m - 1)
    return float(min(max(value / j_x, 0.0), 1.0))


def rank_probabilities(ctx: ShortlistContext, x: float, gamma: float) -> np.ndarray:
    """Vector of :func:`rank_probability` over ``l = 1..m``."""
    return np.array([rank_probability(ctx, x, gamma, l) for l in range(1, ctx.m + 1)])


def rank_probability_derivative(ctx: ShortlistContext, x: float, l: int) -> float:
    """Derivative of :func:`rank_probability` in ``gamma`` at the truthful report."""
    _check_rank(ctx, l)
    n, m = ctx.n, ctx.m
    u = float(ctx.dist.cdf(x))
    f = float(ctx.dist.pdf(x))
    j_x = float(normalizer_j(ctx, x))
    if l < m:
        value = (n - l) * u ** (n - l - 1) * (1.0 - u) ** (l - 1)
        if l > 1:
            value -= (l - 1) * u ** (n - l) * (1.0 - u) ** (l - 2)
        value *= comb(n - 1, l - 1)
    else:
        value = -comb(n - 1, m - 1) * (m - 1) * u ** (n - m) * (1.0 - u) ** (m - 2)
    return float(value * f / j_x)


def threat_probability(ctx: ShortlistContext, x1: float, l: int) -> float:
    """Posterior probability that the ``l``-th strongest opponent is no stronger than ``x1``.

    ``(n-1) C(n-2, l-1) B_{F(x1)}(n-l, l) / J(x1)``.  Its complement, the
    chance of facing ``l`` stronger opponents, grows with ``m``.
    """
    _check_rank(ctx, l, allow_last=False)
    n = ctx.n
    u = float(ctx.dist.cdf(x1))
    value = (n - 1) * comb(n - 2, l - 1) * incomplete_beta(u, n - l, l) / float(normalizer_j(ctx, x1))
    return float(min(max(value, 0.0), 1.0))

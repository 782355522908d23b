"""Numerical kernels shared by every other module.

Adaptive quadrature and Brent root finding are thin contracts over
``scipy.integrate.quad`` and ``scipy.optimize.brentq``.  The composite
Gauss-Legendre helpers below serve the vectorized integrals over quantile
space, where calling a scalar integrator thousands of times would be slow.
Binomial and beta quantities are evaluated in log space because shortlist
sizes in the thousands overflow direct factorials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import integrate as _integrate
from scipy import optimize as _optimize
from scipy import special

from .errors import DomainError, NonConvergence, NoSignChange


@dataclass(frozen=True)
class Quadrature:
    """Accuracy contract for :func:`integrate`.

    Attributes:
        relative_tolerance: Target relative error of the returned integral.
        absolute_tolerance: Target absolute error of the returned integral.
        max_subdivisions: Largest number of interval bisections allowed.
    """

    relative_tolerance: float = 1e-9
    absolute_tolerance: float = 1e-12
    max_subdivisions: int = 200

    def __post_init__(self) -> None:
        if not (self.relative_tolerance > 0 and self.absolute_tolerance > 0):
            raise DomainError("quadrature tolerances must be strictly positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be at least 1")


DEFAULT_QUADRATURE = Quadrature()


class IntegrationResult(NamedTuple):
    value: float
    error: float


def integrate_with_error(
    f: Callable[[float], float],
    a: float,
    b: float,
    quad: Quadrature | None = None,
    points: Sequence[float] | None = None,
) -> IntegrationResult:
    """Integrate ``f`` over ``[a, b]`` by adaptive Gauss-Kronrod.

    Integrable endpoint singularities are fine because the 21-point
    Kronrod rule never evaluates the endpoints themselves.

    Raises:
        NonConvergence: if the subdivision budget runs out before the
            estimated error drops below ``max(atol, rtol * |I|)``.
    """
    quad = quad or DEFAULT_QUADRATURE
    if a == b:
        return IntegrationResult(0.0, 0.0)
    inner = None
    if points is not None:
        lo, hi = min(a, b), max(a, b)
        inner = sorted({float(p) for p in points if lo < p < hi}) or None
    value, error, info, *rest = _integrate.quad(
        f,
        a,
        b,
        epsabs=quad.absolute_tolerance,
        epsrel=quad.relative_tolerance,
        limit=quad.max_subdivisions,
        points=inner,
        full_output=1,
    )
    target = max(quad.absolute_tolerance, quad.relative_tolerance * abs(value))
    if not math.isfinite(value) or error > 10.0 * target:
        raise NonConvergence(
            f"quadrature on [{a}, {b}] stopped at estimated error {error:.3e} "
            f"(target {target:.3e}, {info['last']} subintervals)"
        )
    return IntegrationResult(float(value), float(error))


def integrate(
    f: Callable[[float], float],
    a: float,
    b: float,
    quad: Quadrature | None = None,
    points: Sequence[float] | None = None,
) -> float:
    """Return the integral of ``f`` over ``[a, b]``; see :func:`integrate_with_error`."""
    return integrate_with_error(f, a, b, quad, points).value


# ---------------------------------------------------------------------------
# Composite Gauss-Legendre rules for vectorized integrands
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the ``order``-point rule on ``[-1, 1]``."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@lru_cache(maxsize=None)
def partial_integration_matrix(order: int) -> np.ndarray:
    """Matrix ``W`` with ``W @ f(nodes) ~ [int_{-1}^{x_i} f]_i`` on ``[-1, 1]``.

    Built from the Legendre expansion of the interpolant through the
    Gauss nodes, so it is exact for polynomials of degree below ``order``.
    """
    nodes, _ = gauss_legendre(order)
    vander = np.polynomial.legendre.legvander(nodes, order - 1)
    antider = np.empty((order, order))
    antider[:, 0] = nodes + 1.0
    ext = np.polynomial.legendre.legvander(nodes, order)
    for k in range(1, order):
        antider[:, k] = (ext[:, k + 1] - ext[:, k - 1]) / (2 * k + 1)
    matrix = antider @ np.linalg.inv(vander)
    matrix.setflags(write=False)
    return matrix


@dataclass(frozen=True)
class PanelRule:
    """A composite Gauss-Legendre rule on a partition of an interval."""

    edges: np.ndarray
    order: int

    @property
    def nodes(self) -> np.ndarray:
        x, _ = gauss_legendre(self.order)
        a, b = self.edges[:-1], self.edges[1:]
        return (0.5 * (a + b))[:, None] + (0.5 * (b - a))[:, None] * x[None, :]

    @property
    def weights(self) -> np.ndarray:
        _, w = gauss_legendre(self.order)
        return (0.5 * np.diff(self.edges))[:, None] * w[None, :]

    def integrate(self, values: np.ndarray) -> float:
        """Integrate node values shaped like :attr:`nodes`."""
        return float(np.sum(self.weights * values))

    def cumulative(self, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Running integral from the left edge.

        Returns:
            ``(at_edges, at_nodes)``: the integral up to every panel edge and
            up to every node, the latter via :func:`partial_integration_matrix`.
        """
        panel_totals = np.sum(self.weights * values, axis=1)
        at_edges = np.concatenate([[0.0], np.cumsum(panel_totals)])
        half = 0.5 * np.diff(self.edges)
        within = (values @ partial_integration_matrix(self.order).T) * half[:, None]
        return at_edges, at_edges[:-1, None] + within


def adaptive_panels(
    f: Callable[[np.ndarray], np.ndarray],
    edges: Sequence[float],
    quad: Quadrature | None = None,
    order: int = 12,
    max_rounds: int = 30,
) -> PanelRule:
    """Refine a partition until a vectorized integrand is resolved.

    Each panel is integrated with ``order`` and ``2 * order`` point rules;
    panels whose two estimates disagree by more than their share of the
    tolerance are bisected.  ``f`` must accept and return arrays.

    Raises:
        NonConvergence: if ``max_rounds`` bisection rounds do not suffice or
            the panel count exceeds ``quad.max_subdivisions`` times the
            initial count.
    """
    quad = quad or DEFAULT_QUADRATURE
    edges = np.unique(np.asarray(edges, dtype=float))
    limit = max(quad.max_subdivisions, 1) * max(len(edges), 16)
    for _ in range(max_rounds):
        coarse = PanelRule(edges, order)
        fine = PanelRule(edges, 2 * order)
        ic = np.sum(coarse.weights * f(coarse.nodes), axis=1)
        fi = np.sum(fine.weights * f(fine.nodes), axis=1)
        total = abs(np.sum(fi))
        target = max(quad.absolute_tolerance, quad.relative_tolerance * total)
        width = np.diff(edges)
        # Half the budget is spread by width, half evenly, so that the tiny
        # panels of a graded partition are not held to a vanishing share.
        share = 0.5 * target * (width / (edges[-1] - edges[0]) + 1.0 / len(width))
        bad = np.abs(fi - ic) > share
        if not np.any(bad):
            return coarse if np.all(np.abs(fi - ic) <= 0.1 * share) else fine
        midpoints = 0.5 * (edges[:-1][bad] + edges[1:][bad])
        edges = np.sort(np.concatenate([edges, midpoints]))
        if len(edges) > limit:
            break
    raise NonConvergence(f"composite rule did not resolve integrand with {len(edges)} panels")


# ---------------------------------------------------------------------------
# Root finding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RootBracket:
    """An interval expected to contain a sign change of the target function."""

    lo: float
    hi: float
    tolerance: float = 1e-13

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise DomainError(f"bracket needs lo < hi, got [{self.lo}, {self.hi}]")
        if not self.tolerance > 0:
            raise DomainError("bracket tolerance must be positive")


def find_root(f: Callable[[float], float], bracket: RootBracket) -> float:
    """Brent's method on a bracket with a sign change.

    Raises:
        NoSignChange: if ``f(lo)`` and ``f(hi)`` share a strict sign.
    """
    flo, fhi = f(bracket.lo), f(bracket.hi)
    if flo == 0.0:
        return float(bracket.lo)
    if fhi == 0.0:
        return float(bracket.hi)
    if flo * fhi > 0:
        raise NoSignChange(
            f"f({bracket.lo})={flo:.3e} and f({bracket.hi})={fhi:.3e} have the same sign"
        )
    root = _optimize.brentq(
        f, bracket.lo, bracket.hi, xtol=bracket.tolerance, rtol=4 * np.finfo(float).eps, maxiter=500
    )
    return float(root)


def scan_for_bracket(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    points: int = 64,
    log_spaced: bool = True,
    tolerance: float = 1e-13,
) -> RootBracket:
    """Locate the first sign change of ``f`` on a grid over ``[lo, hi]``.

    Raises:
        NoSignChange: if no adjacent pair of grid values changes sign.
    """
    if log_spaced:
        if lo <= 0:
            raise DomainError("log-spaced scan needs lo > 0")
        grid = np.geomspace(lo, hi, points)
    else:
        grid = np.linspace(lo, hi, points)
    prev_x, prev_f = grid[0], f(grid[0])
    for x in grid[1:]:
        fx = f(x)
        if prev_f == 0.0 or prev_f * fx < 0:
            return RootBracket(float(prev_x), float(x), tolerance)
        prev_x, prev_f = x, fx
    raise NoSignChange(f"no sign change of f on [{lo}, {hi}] over {points} scan points")


# ---------------------------------------------------------------------------
# Special functions
# ---------------------------------------------------------------------------


def _check_beta_args(x, a: float, b: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not (a > 0 and b > 0):
        raise DomainError(f"beta parameters must be positive, got a={a}, b={b}")
    if np.any((x < 0) | (x > 1)) or np.any(np.isnan(x)):
        raise DomainError("incomplete beta argument must lie in [0, 1]")
    return x


def _maybe_scalar(value: np.ndarray, like) -> float | np.ndarray:
    return float(value) if np.ndim(like) == 0 else value


def log_beta_function(a: float, b: float) -> float:
    """Natural log of the complete beta function B(a, b)."""
    return float(special.betaln(a, b))


def incomplete_beta(x, a: float, b: float):
    """Non-regularized incomplete beta ``B_x(a, b) = int_0^x t^(a-1)(1-t)^(b-1) dt``."""
    arr = _check_beta_args(x, a, b)
    value = special.betainc(a, b, arr) * np.exp(special.betaln(a, b))
    return _maybe_scalar(value, x)


def regularized_incomplete_beta(x, a: float, b: float):
    """Regularized incomplete beta ``I_x(a, b) = B_x(a, b) / B(a, b)``."""
    arr = _check_beta_args(x, a, b)
    return _maybe_scalar(special.betainc(a, b, arr), x)


def log_binomial_coefficient(n, k):
    """``log C(n, k)`` via log-gamma; accepts arrays."""
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    value = special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1)
    return float(value) if value.ndim == 0 else value


def binomial_log_pmf(k, trials: int, p):
    """``log Pr(Bin(trials, p) = k)`` with exact handling of ``p`` in {0, 1}.

    Broadcasts ``k`` against ``p``.
    """
    k = np.asarray(k, dtype=float)
    p = np.asarray(p, dtype=float)
    return (
        log_binomial_coefficient(trials, k)
        + special.xlogy(k, p)
        + special.xlog1py(trials - k, -p)
    )


def binomial_log_terms(trials: int, p, kmax: int | None = None) -> np.ndarray:
    """Matrix of ``log Pr(Bin(trials, p) = k)`` for ``k = 0..kmax`` along the last axis."""
    kmax = trials if kmax is None else kmax
    k = np.arange(kmax + 1, dtype=float)
    p = np.asarray(p, dtype=float)
    return binomial_log_pmf(k, trials, p[..., None])


def log_binomial_cdf(k: int, trials: int, p):
    """``log Pr(Bin(trials, p) <= k)`` by log-sum-exp of the pmf terms."""
    if k < 0:
        return np.full(np.shape(p), -np.inf) if np.ndim(p) else -np.inf
    k = min(k, trials)
    value = special.logsumexp(binomial_log_terms(trials, p, k), axis=-1)
    return float(value) if np.ndim(p) == 0 else value


#: Values of ``betainc`` below this are recomputed in log space; scipy loses
#: relative accuracy deep in the tail for large parameters.
_UNDERFLOW_GUARD = 1e-100


def log_regularized_incomplete_beta(x, a: float, b: float):
    """``log I_x(a, b)`` without underflow.

    Uses ``log(betainc)`` wherever the value is comfortably representable.
    Underflowing entries with integer ``a, b`` are summed exactly through
    ``I_x(a, b) = Pr(Bin(a + b - 1, x) >= a)`` in log space; for other
    parameters they stay at ``-inf``.
    """
    arr = _check_beta_args(x, a, b)
    direct = special.betainc(a, b, arr)
    with np.errstate(divide="ignore"):
        value = np.log(direct)
    tiny = direct < _UNDERFLOW_GUARD
    if np.any(tiny) and float(a).is_integer() and float(b).is_integer():
        a_i, b_i = int(a), int(b)
        trials = a_i + b_i - 1
        k = np.arange(a_i, trials + 1, dtype=float)
        value = np.array(value, dtype=float, copy=True)
        value[tiny] = special.logsumexp(binomial_log_pmf(k, trials, arr[tiny][..., None]), axis=-1)
    return _maybe_scalar(value, x)


def log_beta_pdf(x, a: float, b: float):
    """Log density of the Beta(a, b) distribution."""
    arr = _check_beta_args(x, a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = special.xlogy(a - 1, arr) + special.xlog1py(b - 1, -arr) - special.betaln(a, b)
    return _maybe_scalar(value, x)


def beta_pdf(x, a: float, b: float):
    """Beta(a, b) density ``x^(a-1) (1-x)^(b-1) / B(a, b)`` computed through log-gamma."""
    return _maybe_scalar(np.exp(log_beta_pdf(x, a, b)), x)


def scaled_upper_beta_identity(x: float, a: int, b: int) -> float:
    """Closed form of ``int_0^x t^(a-1) (x-t)^(b-1) dt`` for positive integers a, b.

    Equals ``(a-1)! (b-1)! / (a+b-1)! * x^(a+b-1)``.
    """
    if not (int(a) == a and int(b) == b and a >= 1 and b >= 1):
        raise DomainError("a and b must be positive integers")
    if x <= 0:
        raise DomainError("x must be positive")
    log_coef = special.gammaln(a) + special.gammaln(b) - special.gammaln(a + b)
    return float(np.exp(log_coef + (a + b - 1) * np.log(x)))


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------


@dataclass
class RandomStream:
    """A reproducible random stream keyed by ``(seed, stream_id)``.

    Streams with different ``stream_id`` under the same seed are disjoint
    children of one ``SeedSequence`` and drive a counter-based Philox
    generator, so parallel workers draw independent, replayable sequences.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self) -> None:
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if int(self.stream_id) < 0:
            raise DomainError("stream_id must be non-negative")
        sequence = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),))
        self._generator = np.random.Generator(np.random.Philox(sequence))

    @property
    def generator(self) -> np.random.Generator:
        return self._generator

    def uniform(self, size=None) -> np.ndarray:
        """Draw uniforms on ``[0, 1)``."""
        return self._generator.random(size)

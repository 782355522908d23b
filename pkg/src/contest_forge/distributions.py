"""Prior ability distributions.

Every distribution exposes its CDF ``F``, density ``f``, inverse CDF and the
quantile map ``v(q) = F^{-1}(1 - q)`` (ability of the contestant whose upper
tail mass is ``q``).  Downstream code works almost entirely in quantile space,
so ``quantile_value`` and ``quantile_slope`` (``|v'(q)| = 1 / f(v(q))``) are
the workhorses.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import DomainError

#: Upper-tail quantile at which unbounded supports are truncated.
Q_MIN = 1e-10


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


def _out(value: np.ndarray, like):
    return float(value) if np.ndim(like) == 0 else value


def _check_probability(p: np.ndarray) -> None:
    if np.any(np.isnan(p)) or np.any((p < 0) | (p > 1)):
        raise DomainError("probability argument must lie in [0, 1]")


class AbilityDistribution(ABC):
    """A continuous prior over abilities with positive density on its support."""

    @property
    @abstractmethod
    def support(self) -> tuple[float, float]:
        """``(x_min, x_max)``; ``x_max`` may be ``inf``."""

    @property
    @abstractmethod
    def spec(self) -> str:
        """Round-trippable spec string understood by :func:`parse_distribution`."""

    @abstractmethod
    def _cdf(self, x: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _pdf(self, x: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _inverse_cdf(self, p: np.ndarray) -> np.ndarray: ...

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.support[1])

    def cdf(self, x):
        """``F(x)``, clamped to 0 below and 1 above the support."""
        arr = _as_array(x)
        lo, hi = self.support
        inside = np.clip(arr, lo, hi if math.isfinite(hi) else np.inf)
        value = np.where(arr <= lo, 0.0, np.where(arr >= hi, 1.0, self._cdf(inside)))
        return _out(value, x)

    def pdf(self, x):
        """``f(x)``; zero outside the support."""
        arr = _as_array(x)
        lo, hi = self.support
        inside = (arr >= lo) & (arr <= hi)
        safe = np.clip(arr, lo, hi if math.isfinite(hi) else np.inf)
        value = np.where(inside, self._pdf(safe), 0.0)
        return _out(value, x)

    def inverse_cdf(self, p):
        """``F^{-1}(p)`` for ``p`` in ``[0, 1]``."""
        arr = _as_array(p)
        _check_probability(arr)
        return _out(self._inverse_cdf(arr), p)

    def quantile_value(self, q):
        """``v(q) = F^{-1}(1 - q)``; strictly decreasing in ``q``.

        Raises:
            DomainError: for ``q`` outside ``[0, 1]``, or at ``q`` in {0, 1}
                when the support is unbounded.
        """
        arr = _as_array(q)
        _check_probability(arr)
        if not self.bounded and np.any((arr <= 0) | (arr >= 1)):
            raise DomainError("quantile_value needs q in (0, 1) for unbounded support")
        return _out(self._inverse_cdf(1.0 - arr), q)

    def ability_at(self, q):
        """``v(q)`` that also accepts ``q = 1`` (the support minimum) for unbounded priors."""
        arr = _as_array(q)
        if self.bounded:
            return self.quantile_value(q)
        lo = self.support[0]
        safe = np.where(arr >= 1.0, 0.5, arr)
        return _out(np.where(arr >= 1.0, lo, self.quantile_value(safe)), q)

    def quantile_slope(self, q):
        """``|v'(q)| = 1 / f(v(q))``, computed analytically."""
        arr = _as_array(q)
        with np.errstate(divide="ignore"):
            value = 1.0 / self._pdf(self._inverse_cdf(1.0 - arr))
        return _out(value, q)

    def quantile_kinks(self) -> tuple[float, ...]:
        """Upper-tail quantiles where ``v'`` jumps; quadrature panels break there."""
        return ()

    def quantile_bounds(self) -> tuple[float, float]:
        """Range of ``q`` integrated over by objective computations."""
        return (0.0 if self.bounded else Q_MIN, 1.0)

    def sample(self, uniforms):
        """Map uniform draws to abilities by the inverse-CDF transform."""
        return self._inverse_cdf(_as_array(uniforms))

    def __str__(self) -> str:
        return self.spec


@dataclass(frozen=True)
class Uniform(AbilityDistribution):
    """Uniform abilities on ``[lo, hi]``."""

    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self) -> None:
        if not (0 <= self.lo < self.hi < math.inf):
            raise DomainError(f"uniform needs 0 <= lo < hi < inf, got ({self.lo}, {self.hi})")

    @property
    def support(self):
        return (self.lo, self.hi)

    @property
    def spec(self):
        return f"uniform:{self.lo:g},{self.hi:g}"

    def _cdf(self, x):
        return (x - self.lo) / (self.hi - self.lo)

    def _pdf(self, x):
        return np.full_like(x, 1.0 / (self.hi - self.lo))

    def _inverse_cdf(self, p):
        return self.lo + (self.hi - self.lo) * p


@dataclass(frozen=True)
class Power(AbilityDistribution):
    """``F(x) = x^a`` on ``[0, 1]``."""

    exponent: float = 2.0

    def __post_init__(self) -> None:
        if not self.exponent > 0:
            raise DomainError("power exponent must be positive")

    @property
    def support(self):
        return (0.0, 1.0)

    @property
    def spec(self):
        return f"power:{self.exponent:g}"

    def _cdf(self, x):
        return x**self.exponent

    def _pdf(self, x):
        a = self.exponent
        with np.errstate(divide="ignore"):
            return a * np.power(x, a - 1.0)

    def _inverse_cdf(self, p):
        return p ** (1.0 / self.exponent)


@dataclass(frozen=True)
class Exponential(AbilityDistribution):
    """Exponential abilities with rate ``rate``; unbounded above."""

    rate: float = 1.0

    def __post_init__(self) -> None:
        if not self.rate > 0:
            raise DomainError("exponential rate must be positive")

    @property
    def support(self):
        return (0.0, math.inf)

    @property
    def spec(self):
        return f"exp:{self.rate:g}"

    def _cdf(self, x):
        return -np.expm1(-self.rate * x)

    def _pdf(self, x):
        return self.rate * np.exp(-self.rate * x)

    def _inverse_cdf(self, p):
        with np.errstate(divide="ignore"):
            return -np.log1p(-p) / self.rate

    def quantile_value(self, q):
        arr = _as_array(q)
        _check_probability(arr)
        if np.any((arr <= 0) | (arr >= 1)):
            raise DomainError("quantile_value needs q in (0, 1) for unbounded support")
        # -ln(q)/rate directly keeps full precision for tiny q.
        return _out(-np.log(arr) / self.rate, q)

    def quantile_slope(self, q):
        arr = _as_array(q)
        with np.errstate(divide="ignore"):
            return _out(1.0 / (self.rate * arr), q)


@dataclass(frozen=True)
class BetaDist(AbilityDistribution):
    """Beta(alpha, beta) abilities on ``[0, 1]``."""

    alpha: float = 2.0
    beta: float = 2.0

    def __post_init__(self) -> None:
        if not (self.alpha > 0 and self.beta > 0):
            raise DomainError("beta parameters must be positive")

    @property
    def support(self):
        return (0.0, 1.0)

    @property
    def spec(self):
        return f"beta:{self.alpha:g},{self.beta:g}"

    def _cdf(self, x):
        return special.betainc(self.alpha, self.beta, x)

    def _pdf(self, x):
        a, b = self.alpha, self.beta
        with np.errstate(divide="ignore", invalid="ignore"):
            log_f = special.xlogy(a - 1, x) + special.xlog1py(b - 1, -x) - special.betaln(a, b)
        return np.exp(log_f)

    def _inverse_cdf(self, p):
        return special.betaincinv(self.alpha, self.beta, p)

    def quantile_value(self, q):
        arr = _as_array(q)
        _check_probability(arr)
        # The complementary inverse avoids cancellation in 1 - q near q = 0.
        return _out(special.betainccinv(self.alpha, self.beta, arr), q)


@dataclass(frozen=True)
class PiecewiseLinearQuantile(AbilityDistribution):
    """A distribution given directly by a piecewise-linear quantile map.

    ``quantiles`` must run from 0 to 1 and ``values`` must be strictly
    decreasing, so that ``v(quantiles[i]) = values[i]``.  The density is
    piecewise constant, equal to the reciprocal of each segment's slope.
    """

    quantiles: tuple[float, ...]
    values: tuple[float, ...]
    label: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        q = np.asarray(self.quantiles, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if q.ndim != 1 or q.shape != v.shape or len(q) < 2:
            raise DomainError("need matching knot vectors with at least two knots")
        if q[0] != 0.0 or q[-1] != 1.0 or np.any(np.diff(q) <= 0):
            raise DomainError("quantile knots must increase from 0 to 1")
        if np.any(np.diff(v) >= 0) or v[-1] < 0:
            raise DomainError("values must be strictly decreasing and non-negative")

    @classmethod
    def from_slopes(cls, q0: float, eps: float) -> "PiecewiseLinearQuantile":
        """``|v'(q)| = 1`` for ``q >= q0`` and ``eps`` below it, with ``v(1) = 0``."""
        if not (0 < q0 < 1 and eps > 0):
            raise DomainError("need 0 < q0 < 1 and eps > 0")
        top = (1.0 - q0) + eps * q0
        return cls((0.0, q0, 1.0), (top, 1.0 - q0, 0.0), label=f"pwl:q0={q0:g},eps={eps:g}")

    @property
    def _q(self) -> np.ndarray:
        return np.asarray(self.quantiles, dtype=float)

    @property
    def _v(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    @property
    def support(self):
        return (float(self.values[-1]), float(self.values[0]))

    @property
    def spec(self):
        if self.label:
            return self.label
        knots = ";".join(f"{q:g}:{v:g}" for q, v in zip(self.quantiles, self.values))
        return f"pwl:knots={knots}"

    def quantile_kinks(self) -> tuple[float, ...]:
        return tuple(float(q) for q in self.quantiles[1:-1])

    def _cdf(self, x):
        # v is decreasing; interpolate q on the reversed (increasing) knots.
        q = np.interp(x, self._v[::-1], self._q[::-1])
        return 1.0 - q

    def _pdf(self, x):
        v_inc = self._v[::-1]
        slopes = np.diff(self._q[::-1]) / np.diff(v_inc)  # dq/dx < 0 per segment
        idx = np.clip(np.searchsorted(v_inc, x, side="right") - 1, 0, len(slopes) - 1)
        return -slopes[idx]

    def _inverse_cdf(self, p):
        return np.interp(1.0 - p, self._q, self._v)


def parse_distribution(text: str) -> AbilityDistribution:
    """Build a distribution from a CLI spec string.

    Accepted forms: ``uniform:lo,hi``, ``power:a``, ``exp:rate``,
    ``beta:alpha,beta``, ``pwl:q0=Q,eps=E`` and ``pwl:knots=q:v;q:v;...``.
    """
    name, _, args = text.strip().partition(":")
    name = name.lower()
    try:
        if name == "uniform":
            lo, hi = (float(a) for a in args.split(",")) if args else (0.0, 1.0)
            return Uniform(lo, hi)
        if name == "power":
            return Power(float(args) if args else 2.0)
        if name in ("exp", "exponential"):
            return Exponential(float(args) if args else 1.0)
        if name == "beta":
            a, b = (float(x) for x in args.split(","))
            return BetaDist(a, b)
        if name == "pwl":
            opts = dict(kv.split("=", 1) for kv in args.split(",") if "=" in kv)
            if "knots" in opts:
                pairs = [pair.split(":") for pair in opts["knots"].split(";")]
                q = tuple(float(a) for a, _ in pairs)
                v = tuple(float(b) for _, b in pairs)
                return PiecewiseLinearQuantile(q, v)
            return PiecewiseLinearQuantile.from_slopes(float(opts["q0"]), float(opts["eps"]))
    except (ValueError, KeyError, TypeError) as exc:
        raise DomainError(f"cannot parse distribution spec {text!r}: {exc}") from exc
    raise DomainError(f"unknown distribution {name!r} in spec {text!r}")

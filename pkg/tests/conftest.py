"""Shared fixtures and independent reference oracles for the test suite."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate

from contest_forge import BetaDist, Exponential, PiecewiseLinearQuantile, Power, Uniform


def binomial_cdf(k: int, trials: int, p: float) -> float:
    """``Pr(Bin(trials, p) <= k)`` by direct summation of exact terms."""
    return math.fsum(math.comb(trials, j) * p**j * (1 - p) ** (trials - j) for j in range(k + 1))


def quad(f, a: float, b: float, **kwargs) -> float:
    """Plain adaptive quadrature used as an independent oracle."""
    kwargs.setdefault("epsabs", 1e-13)
    kwargs.setdefault("epsrel", 1e-12)
    kwargs.setdefault("limit", 500)
    return integrate.quad(f, a, b, **kwargs)[0]


def r_squared(xs, ys) -> float:
    x, y = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (intercept + slope * x)
    return 1.0 - float(np.sum(resid**2) / np.sum((y - y.mean()) ** 2))


BUILTIN_PRIORS = {
    "uniform": Uniform(),
    "uniform_shifted": Uniform(1.0, 2.0),
    "power2": Power(2.0),
    "power_half": Power(0.5),
    "exp1": Exponential(1.0),
    "exp2": Exponential(2.0),
    "beta22": BetaDist(2.0, 2.0),
    "beta_half": BetaDist(0.5, 0.5),
    "pwl": PiecewiseLinearQuantile.from_slopes(0.86, 0.01),
}


@pytest.fixture(params=sorted(BUILTIN_PRIORS), ids=sorted(BUILTIN_PRIORS))
def prior(request):
    return BUILTIN_PRIORS[request.param]


@pytest.fixture
def uniform():
    return Uniform()


@pytest.fixture
def power2():
    return Power(2.0)

"""Effort objectives: kernels, quantile, beta and order-statistics forms, and asymptotics."""

import math

import numpy as np
import pytest
from scipy import stats

from contest_forge import (
    BetaDist,
    ContestConfig,
    Exponential,
    Objective,
    PiecewiseLinearQuantile,
    Power,
    SimpleContestSpec,
    Uniform,
    max_effort,
    total_effort,
    total_effort_beta_rep,
)
from contest_forge.errors import DomainError
from contest_forge.objectives import (
    _zeta_integral,
    asymptotic_phi,
    beta_form_ratio,
    build_kernel_table,
    complete_kernels,
    effort_by_order_statistics,
    foc_lhs,
    kernel_g,
    quantile_form,
)

from conftest import binomial_cdf, quad


def kernel_oracle(n, m, l, t, which="total"):
    """The kernel from its definition, with the inner integral done by quadrature."""
    zeta = lambda p: binomial_cdf(m - 1, n - 1, p)  # noqa: E731
    kappa = zeta if which == "total" else (lambda p: (1 - p) ** (n - 1))
    inner = quad(kappa, 0.0, t)
    return math.comb(n - 1, l) * (1 - t) ** (n - l - 1) * t ** (l - 1) / zeta(t) * inner


class TestKernel:
    def test_small_contest_against_definition(self):
        spec = SimpleContestSpec(3, 2, 1)
        assert kernel_g(spec, 0.5) == pytest.approx(kernel_oracle(3, 2, 1, 0.5), rel=1e-12)

    @pytest.mark.parametrize("n, m, l", [(5, 3, 2), (10, 4, 1), (10, 10, 3), (30, 7, 6)])
    def test_against_definition(self, n, m, l):
        spec = SimpleContestSpec(n, m, l)
        for t in (0.01, 0.2, 0.5, 0.9):
            for which in ("total", "max"):
                assert kernel_g(spec, t, which) == pytest.approx(kernel_oracle(n, m, l, t, which), rel=1e-10)

    def test_max_kernel_below_total(self):
        t = np.linspace(1e-4, 1 - 1e-4, 500)
        for n, m, l in [(6, 4, 2), (20, 10, 5), (50, 50, 1)]:
            spec = SimpleContestSpec(n, m, l)
            assert np.all(kernel_g(spec, t, "max") <= kernel_g(spec, t, "total") * (1 + 1e-13))
            assert np.all(kernel_g(spec, t, "max") >= 0)

    def test_vanishes_at_zero(self):
        assert kernel_g(SimpleContestSpec(8, 4, 2), 1e-12) < 1e-10

    def test_trivial_contest(self):
        np.testing.assert_array_equal(kernel_g(SimpleContestSpec(8, 4, 4), np.array([0.2, 0.7])), 0.0)

    @pytest.mark.parametrize("t", [0.0, 1.0, -0.1])
    def test_domain(self, t):
        with pytest.raises(DomainError):
            kernel_g(SimpleContestSpec(4, 3, 1), t)

    def test_inner_integral_bounds(self):
        # (1/q) int_0^q zeta lies between min(1, m/(nq))/4 and min(1, m/(nq)).
        q = np.geomspace(1e-6, 1.0, 200)
        for n, m in [(10, 10), (100, 100), (100, 30), (500, 5)]:
            mean = _zeta_integral(n, m, q) / q
            cap = np.minimum(1.0, m / (n * q))
            assert np.all(mean <= cap * (1 + 1e-12))
            assert np.all(mean >= 0.25 * cap)

    def test_all_shortlists_at_once(self):
        n = 12
        t = np.array([0.05, 0.3, 0.8])
        table = complete_kernels(n, t)
        for m in range(2, n + 1):
            np.testing.assert_allclose(table[:, m - 2], kernel_g(SimpleContestSpec(n, m, m - 1), t), rtol=1e-12)

    def test_h_ratio_non_increasing(self):
        n = 10
        q = np.linspace(0.01, 1.0, 200)
        h = {m: build_kernel_table(SimpleContestSpec(n, m, m - 1)).h_at(q) for m in range(2, n + 1)}
        for m in range(2, n + 1):
            for other in range(m + 1, n + 1):
                ratio = h[m] / h[other]
                assert np.all(np.diff(ratio) <= 1e-9 * ratio[:-1])


class TestQuantileForm:
    def test_trivial(self):
        assert total_effort(Power(2), SimpleContestSpec(6, 3, 3)) == 0.0

    def test_two_player_total(self):
        assert total_effort(Uniform(), SimpleContestSpec(2, 2, 1)) == pytest.approx(1 / 3, rel=1e-12)

    def test_two_player_max(self):
        # E[max(X1, X2)^2 / 2] with two uniforms.
        assert max_effort(Uniform(), SimpleContestSpec(2, 2, 1)) == pytest.approx(1 / 4, rel=1e-12)

    def test_two_of_three_max_effort(self):
        # b(x) = 4 ln(2/(2-x)) - 2x at n=3, m=2; expectation over the top of three uniforms.
        oracle = quad(lambda x: 3 * x * x * (4 * math.log(2 / (2 - x)) - 2 * x), 0, 1)
        assert max_effort(Uniform(), SimpleContestSpec(3, 2, 1)) == pytest.approx(oracle, rel=1e-10)

    def test_winner_take_all_bounded(self):
        values = [max_effort(Uniform(), SimpleContestSpec(n, n, 1)) for n in (4, 8, 16, 32, 64, 128, 256, 512)]
        assert max(values) / min(values) < 2
        assert all(0.25 < v < 0.5 for v in values)

    @pytest.mark.parametrize(
        "dist",
        [Uniform(), Uniform(1, 2), Power(2), Exponential(1), BetaDist(2, 2), BetaDist(0.5, 0.5),
         PiecewiseLinearQuantile.from_slopes(0.86, 0.01)],
        ids=lambda d: d.spec,
    )
    @pytest.mark.parametrize("n, m, l", [(5, 3, 2), (6, 6, 1), (8, 4, 1), (10, 7, 3)])
    def test_matches_order_statistics(self, dist, n, m, l):
        spec = SimpleContestSpec(n, m, l)
        for which, fn in ((Objective.TOTAL, total_effort), (Objective.MAX, max_effort)):
            oracle = effort_by_order_statistics(dist, spec.config(), which=which)
            assert fn(dist, spec) == pytest.approx(oracle, rel=1e-5)

    def test_boundary_term_for_shifted_support(self):
        result = quantile_form(Uniform(1, 2), SimpleContestSpec(5, 3, 2))
        assert result.boundary_term > 0

    def test_unbounded_tail_is_negligible(self):
        result = quantile_form(Exponential(1), SimpleContestSpec(20, 6, 5))
        assert result.tail_bound <= 1e-8 * result.value

    def test_decreasing_in_shortlist(self):
        for l in (1, 2, 3):
            values = [total_effort(Uniform(), SimpleContestSpec(10, m, l)) for m in range(l + 1, 11)]
            assert all(b < a for a, b in zip(values, values[1:]))

    def test_linear_in_budget(self):
        spec = SimpleContestSpec(6, 4, 2)
        direct = effort_by_order_statistics(Power(2), ContestConfig.simple(6, 4, 2, budget=3.0))
        assert direct == pytest.approx(3 * total_effort(Power(2), spec), rel=1e-5)


class TestBetaForm:
    @pytest.mark.parametrize("dist", [Uniform(), Power(2)], ids=["uniform", "power2"])
    def test_matches_quantile_form(self, dist):
        quantile = total_effort(dist, SimpleContestSpec(10, 3, 2))
        assert total_effort_beta_rep(dist, 10, 3) == pytest.approx(quantile, rel=1e-10)

    @pytest.mark.parametrize("n", [6, 10, 20, 30])
    def test_all_shortlists(self, n):
        for dist in (Uniform(), Power(2), Exponential(1), BetaDist(50, 50)):
            for m in range(2, n):
                quantile = total_effort(dist, SimpleContestSpec(n, m, m - 1))
                assert total_effort_beta_rep(dist, n, m) == pytest.approx(quantile, rel=1e-4)

    def test_density_ratio_identity(self):
        # beta(q; n-m, m) / I_q(n-m, m) = (n-m)/q * Pr(Bin(n-1, q) = n-m) / Pr(Bin(n-1, q) >= n-m).
        for n, m in [(10, 3), (12, 7), (30, 2)]:
            for q in (0.2, 0.5, 0.9):
                pmf = math.comb(n - 1, n - m) * q ** (n - m) * (1 - q) ** (m - 1)
                tail = math.fsum(math.comb(n - 1, j) * q**j * (1 - q) ** (n - 1 - j) for j in range(n - m, n))
                direct = stats.beta.pdf(q, n - m, m) / quad(lambda t: stats.beta.pdf(t, n - m, m), 0, q)
                assert beta_form_ratio(n, m, q) == pytest.approx((n - m) / q * pmf / tail, rel=1e-10)
                assert beta_form_ratio(n, m, q) == pytest.approx(direct, rel=1e-9)

    def test_large_contest(self):
        # Deep-tail incomplete beta values must not stall the adaptive rule.
        values = [total_effort_beta_rep(Uniform(), 1024, m) for m in (37, 38, 39, 40)]
        assert all(b > a for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("m", [1, 10, 11])
    def test_domain(self, m):
        with pytest.raises(DomainError):
            total_effort_beta_rep(Uniform(), 10, m)


class TestAsymptotics:
    def test_vanishes_at_full_admission(self):
        assert asymptotic_phi(Uniform(), 1 - 1e-9) == pytest.approx(0.0, abs=1e-8)

    def test_stationary_at_uniform_optimum(self):
        h = 1e-4
        slope = (asymptotic_phi(Uniform(), 0.1507 + h) - asymptotic_phi(Uniform(), 0.1507 - h)) / (2 * h)
        assert abs(slope) < 1e-3

    def test_finite_n_converges(self):
        k = 0.2
        phi = asymptotic_phi(Uniform(), k)
        errors = [abs(total_effort_beta_rep(Uniform(), n, math.ceil(k * n)) / n - phi) for n in (64, 128, 256, 512)]
        assert all(b < a for a, b in zip(errors, errors[1:]))

    def test_uniform_foc_root(self):
        assert foc_lhs(Uniform(), 0.1497) > 0 > foc_lhs(Uniform(), 0.1517)

    def test_exponential_scale_free(self):
        for k in (0.05, 0.097, 0.2, 0.5):
            scaled = [rate * foc_lhs(Exponential(rate), k) for rate in (0.5, 1.0, 2.0)]
            np.testing.assert_allclose(scaled, scaled[1], rtol=1e-9)

    @pytest.mark.parametrize("k", [0.0, 1.0, 1.5])
    def test_domain(self, k):
        with pytest.raises(DomainError):
            asymptotic_phi(Uniform(), k)
        with pytest.raises(DomainError):
            foc_lhs(Uniform(), k)

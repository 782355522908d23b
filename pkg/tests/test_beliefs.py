"""Posterior beliefs of admitted contestants and their perceived rank probabilities."""

import math

import numpy as np
import pytest
from scipy import integrate

from contest_forge import Power, ShortlistContext, Uniform
from contest_forge.beliefs import (
    joint_posterior_pdf,
    marginal_posterior_cdf,
    marginal_posterior_pdf,
    normalizer_j,
    normalizer_j_integral_form,
    rank_probabilities,
    rank_probability,
    rank_probability_derivative,
    threat_probability,
)
from contest_forge.errors import DimensionMismatch, DomainError, RankOutOfRange

from conftest import binomial_cdf, quad

CONTEXTS = [(3, 2), (5, 2), (5, 3), (6, 6), (8, 3), (10, 9), (20, 5)]


def admitted_fields(dist, n, m, x, trials, seed):
    """Opponent abilities (strongest first) of fields in which ability ``x`` is shortlisted."""
    rng = np.random.default_rng(seed)
    others = dist.inverse_cdf(rng.random((trials, n - 1)))
    keep = np.sum(others > x, axis=1) <= m - 1
    return -np.sort(-others[keep], axis=1)[:, : m - 1]


class TestContext:
    def test_rejects_bad_sizes(self):
        with pytest.raises(DomainError):
            ShortlistContext(Uniform(), 3, 4)
        with pytest.raises(DomainError):
            ShortlistContext(Uniform(), 1, 1)
        with pytest.raises(DomainError):
            ShortlistContext(Uniform(), 5, 1)


class TestNormalizer:
    def test_full_shortlist_is_one(self):
        ctx = ShortlistContext(Power(2), 7, 7)
        np.testing.assert_array_equal(normalizer_j(ctx, np.linspace(0, 1, 11)), 1.0)

    def test_uniform_value(self):
        assert normalizer_j(ShortlistContext(Uniform(), 3, 2), 0.5) == pytest.approx(0.75, abs=1e-15)

    def test_binomial_oracle(self):
        ctx = ShortlistContext(Power(2), 9, 4)
        for x in (0.1, 0.4, 0.77):
            oracle = binomial_cdf(3, 8, 1 - x**2)
            assert normalizer_j(ctx, x) == pytest.approx(oracle, rel=1e-13)

    def test_forms_agree(self):
        dist = Power(2)
        xs = np.linspace(0.02, 0.98, 20)
        for n in range(2, 41):
            for m in range(2, n + 1):
                ctx = ShortlistContext(dist, n, m)
                np.testing.assert_allclose(normalizer_j_integral_form(ctx, xs), normalizer_j(ctx, xs), rtol=1e-8)


class TestJointPosterior:
    def test_full_shortlist_is_prior_product(self):
        ctx = ShortlistContext(Power(2), 4, 4)
        others = np.array([0.2, 0.5, 0.9])
        assert joint_posterior_pdf(ctx, 0.3, others) == pytest.approx(np.prod(2 * others))

    def test_integrates_to_one(self):
        ctx = ShortlistContext(Uniform(), 4, 3)
        x1 = 0.6
        # The density has kinks along a = x1, b = x1 and a = b.
        total, _ = integrate.nquad(
            lambda a, b: joint_posterior_pdf(ctx, x1, [a, b]),
            [[0, 1], [0, 1]],
            opts=[lambda b: {"points": [x1, b], "epsabs": 1e-9}, {"points": [x1], "epsabs": 1e-9}],
        )
        assert total == pytest.approx(1.0, abs=1e-4)

    def test_rejection_sampling(self):
        # n=5, m=2: the one co-admitted opponent has density 4 F^3(min(z, x1)) f(z) / J.
        ctx = ShortlistContext(Uniform(), 5, 2)
        x1 = 0.6
        rival = admitted_fields(ctx.dist, 5, 2, x1, 2_000_000, seed=11)[:, 0]
        for probe in (0.3, 0.6, 0.85):
            lo, hi = probe - 0.025, probe + 0.025
            expected = quad(lambda z: joint_posterior_pdf(ctx, x1, [z]), lo, hi, points=[x1])
            freq = np.mean((rival > lo) & (rival <= hi))
            se = math.sqrt(expected * (1 - expected) / rival.size)
            assert abs(freq - expected) < 4 * se

    def test_dimension_check(self):
        with pytest.raises(DimensionMismatch):
            joint_posterior_pdf(ShortlistContext(Uniform(), 5, 3), 0.5, [0.1])


class TestMarginalPosterior:
    def test_full_shortlist_is_prior(self):
        ctx = ShortlistContext(Power(2), 6, 6)
        z = np.linspace(0.01, 0.99, 50)
        np.testing.assert_allclose(marginal_posterior_pdf(ctx, 0.4, z), ctx.dist.pdf(z), rtol=1e-12)
        np.testing.assert_allclose(marginal_posterior_cdf(ctx, 0.4, z), ctx.dist.cdf(z), atol=1e-12)

    def test_cdf_reaches_one(self):
        ctx = ShortlistContext(Power(2), 5, 2)
        assert marginal_posterior_cdf(ctx, 0.7, 1.0) == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("n, m", CONTEXTS)
    def test_pdf_integrates_to_one(self, n, m):
        ctx = ShortlistContext(Power(2), n, m)
        for x1 in (0.2, 0.55, 0.9):
            total = quad(lambda z: marginal_posterior_pdf(ctx, x1, z), 0, 1, points=[x1])
            assert total == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("n, m", CONTEXTS)
    def test_cdf_is_integral_of_pdf(self, n, m):
        ctx = ShortlistContext(Uniform(), n, m)
        x1 = 0.45
        for z in (0.1, 0.45, 0.7):
            oracle = quad(lambda t: marginal_posterior_pdf(ctx, x1, t), 0, z, points=[x1] if z > x1 else None)
            assert marginal_posterior_cdf(ctx, x1, z) == pytest.approx(oracle, abs=1e-10)

    @pytest.mark.parametrize("n, m", CONTEXTS)
    def test_dominates_prior(self, n, m):
        for dist in (Uniform(), Power(2)):
            ctx = ShortlistContext(dist, n, m)
            z = np.linspace(0, 1, 200)
            for x1 in np.linspace(0.05, 0.95, 10):
                assert np.all(marginal_posterior_cdf(ctx, x1, z) <= dist.cdf(z) + 1e-8)

    @pytest.mark.parametrize("n, m", CONTEXTS)
    def test_ordered_by_ability(self, n, m):
        for dist in (Uniform(), Power(2)):
            ctx = ShortlistContext(dist, n, m)
            z = np.linspace(0, 1, 200)
            cdfs = [marginal_posterior_cdf(ctx, x1, z) for x1 in np.linspace(0.05, 0.95, 10)]
            for weaker, stronger in zip(cdfs, cdfs[1:]):
                assert np.all(stronger <= weaker + 1e-8)


class TestRankProbability:
    def test_zero_report_finishes_last(self):
        ctx = ShortlistContext(Uniform(), 5, 3)
        probs = rank_probabilities(ctx, 0.7, 0.0)
        np.testing.assert_allclose(probs, [0, 0, 1], atol=1e-15)

    def test_uniform_truthful(self):
        ctx = ShortlistContext(Uniform(), 3, 2)
        np.testing.assert_allclose(rank_probabilities(ctx, 0.5, 0.5), [1 / 3, 2 / 3], rtol=1e-13)

    def test_truthful_matches_conditioned_prior(self):
        ctx = ShortlistContext(Power(2), 9, 5)
        x = 0.6
        u = x**2
        j = binomial_cdf(4, 8, 1 - u)
        for l in range(1, 5):
            oracle = math.comb(8, l - 1) * u ** (9 - l) * (1 - u) ** (l - 1) / j
            assert rank_probability(ctx, x, x, l) == pytest.approx(oracle, rel=1e-12)

    @pytest.mark.parametrize("n, m", CONTEXTS)
    def test_sums_to_one(self, n, m):
        ctx = ShortlistContext(Power(2), n, m)
        for x in (0.1, 0.5, 0.93):
            for gamma in (0.0, 0.05, x, 0.5, 0.97, 1.0):
                assert rank_probabilities(ctx, x, gamma).sum() == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("n, m, x, gamma", [(5, 3, 0.6, 0.4), (5, 3, 0.6, 0.8), (6, 4, 0.5, 0.7), (4, 2, 0.7, 0.3)])
    def test_monte_carlo(self, n, m, x, gamma):
        # With a strictly increasing schedule, finishing rank is one plus the
        # number of admitted opponents whose ability exceeds the mimicked one.
        dist = Power(2)
        ctx = ShortlistContext(dist, n, m)
        rivals = admitted_fields(dist, n, m, x, 1_000_000, seed=5)
        ranks = 1 + np.sum(rivals > gamma, axis=1)
        for l in range(1, m + 1):
            p = rank_probability(ctx, x, gamma, l)
            freq = np.mean(ranks == l)
            se = math.sqrt(max(p * (1 - p), 1e-12) / ranks.size)
            assert abs(freq - p) < 4 * se

    def test_decreasing_in_shortlist(self):
        for x in (0.3, 0.6, 0.9):
            values = [rank_probability(ShortlistContext(Uniform(), 10, m), x, x, 1) for m in range(2, 11)]
            assert all(b <= a for a, b in zip(values, values[1:]))

    def test_rank_range(self):
        ctx = ShortlistContext(Uniform(), 5, 3)
        with pytest.raises(RankOutOfRange):
            rank_probability(ctx, 0.5, 0.5, 4)
        with pytest.raises(RankOutOfRange):
            rank_probability(ctx, 0.5, 0.5, 0)


class TestRankDerivative:
    def test_spec_point_central_difference(self):
        ctx = ShortlistContext(Uniform(), 4, 3)
        h = 1e-5
        fd = (rank_probability(ctx, 0.5, 0.5 + h, 1) - rank_probability(ctx, 0.5, 0.5 - h, 1)) / (2 * h)
        assert rank_probability_derivative(ctx, 0.5, 1) == pytest.approx(fd, rel=1e-5)

    @pytest.mark.parametrize("n, m", CONTEXTS)
    def test_last_rank_non_positive(self, n, m):
        ctx = ShortlistContext(Power(2), n, m)
        for x in np.linspace(0.05, 0.95, 10):
            assert rank_probability_derivative(ctx, x, m) <= 0

    @pytest.mark.parametrize("n, m", CONTEXTS)
    def test_sum_is_zero(self, n, m):
        ctx = ShortlistContext(Power(2), n, m)
        for x in np.linspace(0.05, 0.95, 10):
            total = sum(rank_probability_derivative(ctx, x, l) for l in range(1, m + 1))
            scale = max(abs(rank_probability_derivative(ctx, x, l)) for l in range(1, m + 1))
            assert abs(total) <= 1e-12 * max(scale, 1.0)

    @pytest.mark.parametrize("n, m", [(3, 2), (5, 3), (6, 4), (8, 3)])
    def test_one_sided_richardson(self, n, m):
        # The second gamma-derivative jumps at gamma = x, so each side is
        # differenced separately and extrapolated; both must match the closed form.
        ctx = ShortlistContext(Power(2), n, m)
        h = 2e-5
        for x in (0.3, 0.6, 0.85):
            for l in range(1, m + 1):
                p = lambda g: rank_probability(ctx, x, g, l)  # noqa: E731
                exact = rank_probability_derivative(ctx, x, l)
                right = (-3 * p(x) + 4 * p(x + h) - p(x + 2 * h)) / (2 * h)
                left = (3 * p(x) - 4 * p(x - h) + p(x - 2 * h)) / (2 * h)
                tol = 1e-6 * max(abs(exact), 1.0)
                assert right == pytest.approx(exact, abs=tol)
                assert left == pytest.approx(exact, abs=tol)


class TestThreatProbability:
    def test_full_shortlist_is_order_statistic(self):
        ctx = ShortlistContext(Power(2), 6, 6)
        for l in range(1, 6):
            for x1 in (0.3, 0.7):
                oracle = binomial_cdf(l - 1, 5, 1 - x1**2)
                assert threat_probability(ctx, x1, l) == pytest.approx(oracle, rel=1e-12)

    def test_threat_grows_with_shortlist(self):
        values = [1 - threat_probability(ShortlistContext(Uniform(), 8, m), 0.5, 1) for m in range(2, 9)]
        assert all(b >= a - 1e-15 for a, b in zip(values, values[1:]))

    def test_monte_carlo(self):
        ctx = ShortlistContext(Uniform(), 5, 3)
        rivals = admitted_fields(ctx.dist, 5, 3, 0.6, 1_000_000, seed=3)
        freq = np.mean(rivals[:, 0] <= 0.6)
        p = threat_probability(ctx, 0.6, 1)
        assert abs(freq - p) < 4 * math.sqrt(p * (1 - p) / rivals.shape[0])

    def test_last_rank_rejected(self):
        with pytest.raises(RankOutOfRange):
            threat_probability(ShortlistContext(Uniform(), 5, 3), 0.5, 3)

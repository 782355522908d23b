"""Equilibrium effort schedules, utilities and the best-response certificate."""

import math

import numpy as np
import pytest

from contest_forge import ContestConfig, CustomCost, LinearCost, Power, PowerCost, ShortlistContext, Uniform
from contest_forge.equilibrium import (
    EffortSchedule,
    best_response_gap,
    equilibrium_integrand,
    expected_utility,
    parse_cost,
    parse_prizes,
    solve_equilibrium,
)
from contest_forge.errors import ConfigMismatch, DomainError

from conftest import binomial_cdf, quad


def integrand_oracle(dist, n, m, prizes, t):
    """The equilibrium integrand written out term by term with exact binomials."""
    u = float(dist.cdf(t))
    v = list(prizes) + [0.0]
    j = binomial_cdf(m - 1, n - 1, 1 - u)
    total = sum(
        math.comb(n - 1, l - 1) * (n - l) * (v[l - 1] - v[l]) * u ** (n - l - 1) * (1 - u) ** (l - 1)
        for l in range(1, m)
    )
    return total * float(dist.pdf(t)) * t / j


def solve(dist, config, cost=None, grid_size=256):
    return solve_equilibrium(ShortlistContext(dist, config.n, config.m), config, cost, grid_size)


class TestConfig:
    def test_gaps_round_trip(self):
        config = ContestConfig(5, 3, (0.5, 0.3, 0.2))
        back = ContestConfig.from_gaps(5, 3, config.prize_gaps)
        np.testing.assert_allclose(back.prizes, config.prizes, atol=1e-15)
        assert config.prize_gaps.sum() == pytest.approx(1.0)

    @pytest.mark.parametrize(
        "prizes, budget",
        [((0.2, 0.5, 0.3), 1.0), ((0.7, 0.5, 0.0), 1.0), ((0.5, -0.1, 0.0), 1.0), ((0.5, 0.5), 1.0)],
    )
    def test_invalid(self, prizes, budget):
        with pytest.raises(DomainError):
            ContestConfig(5, 3, prizes, budget)

    def test_parse_prizes(self):
        assert parse_prizes("wta", 5, 3).prizes == (1.0, 0.0, 0.0)
        assert parse_prizes("complete", 5, 3).prizes == (0.5, 0.5, 0.0)
        assert parse_prizes("equal:3", 5, 3).prizes == pytest.approx((1 / 3,) * 3)
        assert parse_prizes("0.6,0.4,0", 5, 3).prizes == (0.6, 0.4, 0.0)
        with pytest.raises(DomainError):
            parse_prizes("first,second", 5, 2)

    def test_parse_cost(self):
        assert parse_cost("linear").g(2.0) == pytest.approx(2.0)
        assert parse_cost("power:2").g(3.0) == pytest.approx(9.0)
        with pytest.raises(DomainError):
            parse_cost("cubic")


class TestIntegrand:
    def test_equal_prizes_vanish(self):
        ctx = ShortlistContext(Power(2), 6, 4)
        config = ContestConfig.simple(6, 4, 4)
        np.testing.assert_array_equal(equilibrium_integrand(ctx, config, np.linspace(0, 1, 21)), 0.0)

    def test_two_player_all_pay(self):
        ctx = ShortlistContext(Uniform(), 2, 2)
        t = np.linspace(0, 1, 11)
        np.testing.assert_allclose(equilibrium_integrand(ctx, ContestConfig.winner_take_all(2, 2), t), t, atol=1e-15)

    @pytest.mark.parametrize("n, m, prizes", [(5, 3, (0.5, 0.3, 0.2)), (8, 4, (0.4, 0.3, 0.2, 0.1)), (6, 6, (1, 0, 0, 0, 0, 0))])
    def test_matches_term_by_term_oracle(self, n, m, prizes):
        dist = Power(2)
        ctx = ShortlistContext(dist, n, m)
        config = ContestConfig(n, m, prizes)
        for t in (0.1, 0.45, 0.8, 0.99):
            oracle = integrand_oracle(dist, n, m, prizes, t)
            assert equilibrium_integrand(ctx, config, t) == pytest.approx(oracle, rel=1e-12)

    def test_linear_in_prize_gaps(self):
        ctx = ShortlistContext(Uniform(), 6, 3)
        a = ContestConfig(6, 3, (0.3, 0.1, 0.0))
        b = ContestConfig(6, 3, (0.4, 0.2, 0.0))
        both = ContestConfig(6, 3, (0.7, 0.3, 0.0))
        t = np.linspace(0.05, 0.95, 10)
        np.testing.assert_allclose(
            equilibrium_integrand(ctx, a, t) + equilibrium_integrand(ctx, b, t),
            equilibrium_integrand(ctx, both, t),
            rtol=1e-13,
        )

    def test_non_negative(self):
        ctx = ShortlistContext(Power(2), 10, 4)
        config = ContestConfig(10, 4, (0.4, 0.3, 0.2, 0.1))
        assert np.all(equilibrium_integrand(ctx, config, np.linspace(0, 1, 101)) >= 0)

    def test_mismatched_config(self):
        with pytest.raises(ConfigMismatch):
            equilibrium_integrand(ShortlistContext(Uniform(), 5, 3), ContestConfig.winner_take_all(5, 2), 0.5)


class TestSolve:
    def test_two_player_closed_form(self):
        schedule = solve(Uniform(), ContestConfig.winner_take_all(2, 2))
        x = np.linspace(0, 1, 1000)
        assert np.max(np.abs(schedule(x) - x**2 / 2)) <= 1e-6
        assert schedule(1.0) == pytest.approx(0.5, abs=1e-12)

    def test_two_of_three_top_effort(self):
        schedule = solve(Uniform(), ContestConfig.winner_take_all(3, 2))
        assert schedule(1.0) == pytest.approx(4 * math.log(2) - 2, abs=1e-9)

    def test_trivial_contest_is_zero(self):
        schedule = solve(Power(2), ContestConfig.simple(7, 4, 4))
        np.testing.assert_array_equal(schedule(np.linspace(0, 1, 50)), 0.0)

    @pytest.mark.parametrize(
        "dist, n, m, prizes",
        [
            (Power(2), 6, 3, (0.6, 0.4, 0.0)),
            (Uniform(1, 2), 5, 4, (0.4, 0.3, 0.2, 0.1)),
            (Power(0.5), 4, 2, (1.0, 0.0)),
        ],
    )
    def test_matches_direct_quadrature(self, dist, n, m, prizes):
        config = ContestConfig(n, m, prizes)
        schedule = solve(dist, config)
        lo = dist.support[0]
        for x in np.linspace(lo, dist.support[1], 9)[1:]:
            oracle = quad(lambda t: integrand_oracle(dist, n, m, prizes, t) if t > 0 else 0.0, lo, x)
            assert schedule(x) == pytest.approx(oracle, rel=1e-7, abs=1e-12)

    def test_monotone_and_starts_at_zero(self, prior):
        config = ContestConfig(6, 3, (0.6, 0.4, 0.0))
        schedule = solve(prior, config)
        q_lo, q_hi = prior.quantile_bounds()
        x = np.sort(prior.ability_at(np.linspace(q_lo, q_hi, 500)))
        effort = schedule(x)
        assert effort[0] == 0.0
        assert np.all(np.diff(effort) >= 0)

    def test_grid_refinement(self):
        config = ContestConfig(8, 4, (0.5, 0.3, 0.2, 0.0))
        coarse = solve(Power(2), config, grid_size=256)
        fine = solve(Power(2), config, grid_size=1024)
        assert np.max(np.abs(coarse(coarse.grid) - fine(coarse.grid))) <= 1e-6

    def test_scale_covariance(self):
        base = solve(Power(2), ContestConfig(6, 3, (0.6, 0.4, 0.0)))
        double = solve(Power(2), ContestConfig(6, 3, (1.2, 0.8, 0.0), budget=2.0))
        x = np.linspace(0, 1, 101)
        np.testing.assert_allclose(double(x), 2 * base(x), rtol=1e-12, atol=1e-15)

    def test_power_cost(self):
        config = ContestConfig(5, 3, (0.6, 0.4, 0.0))
        linear = solve(Uniform(), config)
        squared = solve(Uniform(), config, PowerCost(2.0))
        x = np.linspace(0, 1, 101)
        np.testing.assert_allclose(squared(x), np.sqrt(linear(x)), rtol=1e-10, atol=1e-15)

    def test_custom_cost_inverse_by_root_finding(self):
        config = ContestConfig(5, 3, (0.6, 0.4, 0.0))
        linear = solve(Uniform(), config)
        custom = solve(Uniform(), config, CustomCost(lambda e: e + e**3))
        for x in (0.3, 0.7, 1.0):
            e = custom(x)
            assert e + e**3 == pytest.approx(linear(x), rel=1e-10)

    def test_consolation_prize_removal_raises_effort(self):
        with_consolation = solve(Uniform(), ContestConfig(6, 3, (0.5, 0.3, 0.2)))
        without = solve(Uniform(), ContestConfig(6, 3, (0.5, 0.3, 0.0)))
        x = np.linspace(0.01, 1, 100)
        assert np.all(without(x) > with_consolation(x))

    @pytest.mark.parametrize("k", [1, 2])
    def test_empty_prizes_lower_effort(self, k):
        n = 8
        few = solve(Power(2), ContestConfig.simple(n, k + 1, k))
        many = solve(Power(2), ContestConfig.simple(n, k + 3, k))
        x = np.linspace(0.01, 0.99, 99)
        assert np.all(many(x) < few(x))

    def test_grid_too_small(self):
        with pytest.raises(DomainError):
            solve(Uniform(), ContestConfig.winner_take_all(3, 2), grid_size=32)


class TestUtility:
    def test_zero_report_gets_last_prize(self):
        config = ContestConfig(5, 3, (0.5, 0.3, 0.2))
        ctx = ShortlistContext(Uniform(), 5, 3)
        schedule = solve_equilibrium(ctx, config)
        assert expected_utility(ctx, config, LinearCost(), 0.7, 0.0, schedule) == pytest.approx(0.2, abs=1e-14)

    def test_no_prizes(self):
        config = ContestConfig(4, 3, (0.0, 0.0, 0.0), budget=0.0)
        ctx = ShortlistContext(Uniform(), 4, 3)
        schedule = solve_equilibrium(ctx, config)
        values = [expected_utility(ctx, config, LinearCost(), 0.6, g, schedule) for g in (0.0, 0.5, 1.0)]
        assert all(v <= 0 for v in values) and values[0] == 0.0

    def test_two_player_truthful_dominates(self):
        config = ContestConfig.winner_take_all(2, 2)
        ctx = ShortlistContext(Uniform(), 2, 2)
        schedule = solve_equilibrium(ctx, config)
        x = 0.8
        truthful = expected_utility(ctx, config, LinearCost(), x, x, schedule)
        assert truthful == pytest.approx(x - x**2 / 2 / x, abs=1e-9)
        for gamma in (0.4, 0.6, 0.9):
            value = expected_utility(ctx, config, LinearCost(), x, gamma, schedule)
            assert value == pytest.approx(gamma - gamma**2 / 2 / x, abs=1e-9)
            assert value <= truthful

    def test_needs_positive_ability(self):
        config = ContestConfig.winner_take_all(2, 2)
        ctx = ShortlistContext(Uniform(), 2, 2)
        with pytest.raises(DomainError):
            expected_utility(ctx, config, LinearCost(), 0.0, 0.5, solve_equilibrium(ctx, config))


def certificate(dist, n, m, prizes, points=20):
    """Largest best-response gap over quantile-spaced abilities."""
    config = ContestConfig(n, m, prizes)
    ctx = ShortlistContext(dist, n, m)
    schedule = solve_equilibrium(ctx, config)
    q = (np.arange(points) + 0.5) / points
    return max(best_response_gap(ctx, config, LinearCost(), schedule, float(dist.ability_at(qq))) for qq in q)


class TestBestResponseGap:
    def test_trivial_contest(self):
        assert certificate(Uniform(), 5, 3, (1 / 3,) * 3) <= 1e-15

    def test_two_player(self):
        config = ContestConfig.winner_take_all(2, 2)
        ctx = ShortlistContext(Uniform(), 2, 2)
        schedule = solve_equilibrium(ctx, config)
        for x in np.arange(1, 10) / 10:
            assert best_response_gap(ctx, config, LinearCost(), schedule, x, deviation_grid=101) <= 1e-6

    def test_corrupted_schedule_is_caught(self):
        config = ContestConfig.winner_take_all(2, 2)
        ctx = ShortlistContext(Uniform(), 2, 2)
        good = solve_equilibrium(ctx, config)
        bad = EffortSchedule(
            good.grid, good.quantiles, 1.5 * good.efforts, 1.5 * good.cumulative, 1.5 * good.slopes, good.cost
        )
        assert max(best_response_gap(ctx, config, LinearCost(), bad, x) for x in (0.2, 0.5, 0.8)) > 1e-3

    @pytest.mark.parametrize(
        "dist, n, m, prizes",
        [
            (Uniform(), 5, 5, (1, 0, 0, 0, 0)),
            (Power(2), 4, 4, (0.5, 0.3, 0.2, 0.0)),
            (Uniform(), 3, 2, (1.0, 0.0)),
            (Uniform(), 4, 3, (0.5, 0.5, 0.0)),
            (Uniform(), 5, 4, (1 / 3, 1 / 3, 1 / 3, 0.0)),
        ],
        ids=["uniform-5-5-wta", "power2-4-4-graded", "uniform-3-2-wta", "uniform-4-3-complete", "uniform-5-4-complete"],
    )
    def test_certified(self, dist, n, m, prizes):
        assert certificate(dist, n, m, prizes) <= 1e-3

    @pytest.mark.xfail(
        strict=True,
        reason="closed-form schedule is not a global best response when the shortlist binds; "
        "measured gaps 0.045 to 0.572 (see decisions ledger)",
    )
    @pytest.mark.parametrize(
        "dist, n, m, prizes",
        [
            (Uniform(), 5, 3, (0.5, 0.5, 0.0)),
            (Uniform(), 10, 3, (0.5, 0.5, 0.0)),
            (Power(2), 3, 2, (1.0, 0.0)),
            (Power(2), 10, 3, (0.5, 0.5, 0.0)),
        ],
        ids=["uniform-5-3", "uniform-10-3", "power2-3-2", "power2-10-3"],
    )
    def test_binding_shortlist(self, dist, n, m, prizes):
        assert certificate(dist, n, m, prizes) <= 1e-3

"""Monte Carlo oracle for the contest model.

Each trial draws ``n`` abilities by inverse-CDF sampling, shortlists the top
``m``, lets the admitted contestants play a tabulated equilibrium schedule and
hands out prizes by effort rank.  The estimators here are the ground truth
against which the analytic modules are checked.

Reproducibility: a worker ``w`` draws only from ``RandomStream(seed, w)`` and
per-batch moments are merged in a fixed order, so identical ``(seed, trials,
workers)`` give bit-identical estimates.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .beliefs import ShortlistContext, marginal_posterior_cdf
from .distributions import AbilityDistribution
from .equilibrium import ContestConfig, CostModel, EffortSchedule
from .errors import AcceptanceTooLow, DomainError
from .numerics import RandomStream

#: Trials per vectorized batch.
BATCH_SIZE = 65_536

#: Fewest trials accepted by the objective estimator.
MIN_TRIALS = 1_000

#: Rejection sampling gives up below this acceptance rate.
MIN_ACCEPTANCE = 1e-4

#: Asymptotic Kolmogorov-Smirnov critical value at the 1% level, times sqrt(N).
KS_CRITICAL_1PCT = 1.628


@dataclass(frozen=True)
class ContestOutcome:
    """One played contest.

    ``admitted`` lists shortlisted indices by decreasing ability and
    ``ranking`` lists them by finishing position.  ``efforts``,
    ``prizes_awarded`` and ``utilities`` are indexed by contestant and are
    zero for eliminated registrants.
    """

    abilities: np.ndarray
    admitted: np.ndarray
    efforts: np.ndarray
    ranking: np.ndarray
    prizes_awarded: np.ndarray
    utilities: np.ndarray


@dataclass(frozen=True)
class EstimateWithCI:
    """A Monte Carlo mean with its standard error."""

    mean: float
    standard_error: float
    trials: int
    seed: int

    def z_score(self, reference: float) -> float:
        """``(mean - reference) / standard_error``; 0 when both sides agree exactly."""
        diff = self.mean - reference
        if self.standard_error == 0:
            return 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return diff / self.standard_error

    def covers(self, reference: float, sigmas: float = 3.0) -> bool:
        return abs(self.z_score(reference)) <= sigmas

    def to_dict(self) -> dict[str, float | int]:
        return {
            "mean": self.mean,
            "standard_error": self.standard_error,
            "trials": self.trials,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class _Moments:
    """Count, mean and centred sum of squares of a sample (mergeable)."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @classmethod
    def of(cls, values: np.ndarray) -> "_Moments":
        if values.size == 0:
            return cls()
        mean = float(np.mean(values))
        return cls(int(values.size), mean, float(np.sum((values - mean) ** 2)))

    def merge(self, other: "_Moments") -> "_Moments":
        if other.count == 0:
            return self
        if self.count == 0:
            return other
        count = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / count
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / count
        return _Moments(count, mean, m2)

    def estimate(self, seed: int) -> EstimateWithCI:
        if self.count < 2:
            raise DomainError("need at least two trials for a standard error")
        variance = self.m2 / (self.count - 1)
        return EstimateWithCI(self.mean, math.sqrt(variance / self.count), self.count, seed)


def _check_schedule(config: ContestConfig, dist: AbilityDistribution, schedule: EffortSchedule) -> None:
    lo = float(np.asarray(dist.ability_at(dist.quantile_bounds()[1])))
    if schedule.grid[0] > lo + 1e-12 * max(1.0, abs(lo)):
        raise DomainError("schedule does not start at the support minimum of this prior")


# ---------------------------------------------------------------------------
# Single contest
# ---------------------------------------------------------------------------


def run_contest(
    config: ContestConfig,
    dist: AbilityDistribution,
    cost: CostModel,
    schedule: EffortSchedule,
    stream: RandomStream,
) -> ContestOutcome:
    """Play one contest: draw, shortlist, exert equilibrium effort, award prizes.

    Ties in ability or effort go to the lower index.
    """
    _check_schedule(config, dist, schedule)
    n, m = config.n, config.m
    abilities = np.asarray(dist.sample(stream.uniform(n)), dtype=float)
    index = np.arange(n)
    admitted = np.lexsort((index, -abilities))[:m]
    efforts = np.zeros(n)
    efforts[admitted] = np.asarray(schedule(abilities[admitted]), dtype=float)
    ranking = admitted[np.lexsort((admitted, -efforts[admitted]))]
    prizes = np.zeros(n)
    prizes[ranking] = config.prizes
    utilities = np.zeros(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        paid = np.asarray(cost.g(efforts[admitted]), dtype=float)
        burden = np.where(paid > 0, paid / abilities[admitted], 0.0)
    utilities[admitted] = prizes[admitted] - burden
    return ContestOutcome(abilities, admitted, efforts, ranking, prizes, utilities)


# ---------------------------------------------------------------------------
# Objective estimates
# ---------------------------------------------------------------------------


def _objective_batch(
    config: ContestConfig, dist: AbilityDistribution, schedule: EffortSchedule, stream: RandomStream, size: int
) -> tuple[np.ndarray, np.ndarray]:
    """Total and maximum effort of ``size`` independent contests."""
    abilities = np.asarray(dist.sample(stream.uniform((size, config.n))), dtype=float)
    top = -np.sort(-abilities, axis=1)[:, : config.m]
    efforts = np.asarray(schedule(top.ravel()), dtype=float).reshape(top.shape)
    return efforts.sum(axis=1), efforts.max(axis=1)


def _worker_moments(
    config: ContestConfig,
    dist: AbilityDistribution,
    schedule: EffortSchedule,
    seed: int,
    worker: int,
    trials: int,
) -> tuple[_Moments, _Moments]:
    stream = RandomStream(seed, worker)
    total, top = _Moments(), _Moments()
    done = 0
    while done < trials:
        size = min(BATCH_SIZE, trials - done)
        te, me = _objective_batch(config, dist, schedule, stream, size)
        total, top = total.merge(_Moments.of(te)), top.merge(_Moments.of(me))
        done += size
    return total, top


def split_trials(trials: int, workers: int) -> list[int]:
    """Deterministic share of ``trials`` for each worker, earlier workers first."""
    if workers < 1:
        raise DomainError("workers must be at least 1")
    base, extra = divmod(trials, workers)
    return [base + (1 if w < extra else 0) for w in range(workers)]


def estimate_objectives(
    config: ContestConfig,
    dist: AbilityDistribution,
    cost: CostModel,
    schedule: EffortSchedule,
    trials: int,
    seed: int,
    workers: int = 1,
) -> tuple[EstimateWithCI, EstimateWithCI]:
    """Monte Carlo estimates of ex-ante total effort and maximum individual effort.

    ``cost`` is accepted for symmetry with the analytic side; the schedule
    already has the inverse cost applied.

    Raises:
        DomainError: if ``trials < 1000``.
    """
    del cost
    if trials < MIN_TRIALS:
        raise DomainError(f"trials must be at least {MIN_TRIALS}")
    _check_schedule(config, dist, schedule)
    shares = split_trials(trials, workers)

    def job(w: int) -> tuple[_Moments, _Moments]:
        return _worker_moments(config, dist, schedule, seed, w, shares[w])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, range(workers)))
    else:
        parts = [job(0)]
    total, top = _Moments(), _Moments()
    for te, me in parts:
        total, top = total.merge(te), top.merge(me)
    return total.estimate(seed), top.estimate(seed)


# ---------------------------------------------------------------------------
# Conditional frequencies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Frequency:
    """An empirical proportion ``hits / trials`` with its binomial standard error."""

    hits: int
    trials: int

    @property
    def value(self) -> float:
        return self.hits / self.trials

    @property
    def standard_error(self) -> float:
        p = self.value
        return math.sqrt(max(p * (1 - p), 1.0 / self.trials) / self.trials)

    def within(self, reference: float, sigmas: float = 3.0) -> bool:
        return abs(self.value - reference) <= sigmas * self.standard_error


def admission_frequency(dist: AbilityDistribution, n: int, m: int, x: float, trials: int, seed: int) -> Frequency:
    """How often a registrant with ability ``x`` lands in the shortlist against ``n - 1`` prior draws."""
    ShortlistContext(dist, n, m)
    stream = RandomStream(seed)
    hits = 0
    done = 0
    while done < trials:
        size = min(BATCH_SIZE, trials - done)
        others = np.asarray(dist.sample(stream.uniform((size, n - 1))), dtype=float)
        hits += int(np.count_nonzero(np.sum(others > x, axis=1) <= m - 1))
        done += size
    return Frequency(hits, trials)


def _admitted_opponents(dist: AbilityDistribution, n: int, m: int, x: float, stream: RandomStream, size: int):
    """Draw ``size`` fields of ``n - 1`` opponents and keep those where ``x`` is shortlisted.

    Returns the top ``m - 1`` opponents of each accepted field, strongest first.
    """
    others = np.asarray(dist.sample(stream.uniform((size, n - 1))), dtype=float)
    accepted = np.sum(others > x, axis=1) <= m - 1
    rivals = -np.sort(-others[accepted], axis=1)[:, : m - 1]
    return rivals


def rank_frequencies(
    ctx: ShortlistContext,
    schedule: EffortSchedule,
    x: float,
    gamma: float,
    accepted_trials: int,
    seed: int,
) -> list[Frequency]:
    """Finishing-rank frequencies of an admitted contestant of ability ``x`` who exerts ``b(gamma)``.

    Opponents play the schedule truthfully; ties in effort go to the
    deviating contestant (a measure-zero event for a strictly increasing
    schedule).
    """
    stream = RandomStream(seed)
    own = float(schedule(gamma))
    counts = np.zeros(ctx.m, dtype=np.int64)
    got = 0
    while got < accepted_trials:
        rivals = _admitted_opponents(ctx.dist, ctx.n, ctx.m, x, stream, BATCH_SIZE)
        rivals = rivals[: accepted_trials - got]
        efforts = np.asarray(schedule(rivals.ravel()), dtype=float).reshape(rivals.shape)
        ranks = 1 + np.sum(efforts > own, axis=1)
        counts += np.bincount(ranks - 1, minlength=ctx.m)
        got += len(rivals)
    return [Frequency(int(c), got) for c in counts]


def deviation_utilities(
    ctx: ShortlistContext,
    config: ContestConfig,
    cost: CostModel,
    schedule: EffortSchedule,
    x: float,
    gammas,
    accepted_trials: int,
    seed: int,
) -> list[EstimateWithCI]:
    """Mean realized utility of admitted ability ``x`` exerting ``b(gamma)`` for each ``gamma``.

    All deviations share the same opponent draws (common random numbers).
    """
    if not x > 0:
        raise DomainError("ability must be positive to evaluate utility")
    stream = RandomStream(seed)
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    own = np.asarray(schedule(gammas), dtype=float)
    burden = np.asarray(cost.g(own), dtype=float) / x
    prizes = np.asarray(config.prizes)
    moments = [_Moments() for _ in gammas]
    got = 0
    while got < accepted_trials:
        rivals = _admitted_opponents(ctx.dist, ctx.n, ctx.m, x, stream, BATCH_SIZE)
        rivals = rivals[: accepted_trials - got]
        efforts = np.asarray(schedule(rivals.ravel()), dtype=float).reshape(rivals.shape)
        for k, e in enumerate(own):
            ranks = np.sum(efforts > e, axis=1)
            moments[k] = moments[k].merge(_Moments.of(prizes[ranks] - burden[k]))
        got += len(rivals)
    return [mo.estimate(seed) for mo in moments]


# ---------------------------------------------------------------------------
# Empirical posterior
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmpiricalPosterior:
    """Accepted co-admitted opponent abilities and their distance to the analytic posterior."""

    samples: np.ndarray
    bucket: tuple[float, float]
    drawn: int
    ks_distance: float

    @property
    def accepted(self) -> int:
        return int(self.samples.size)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.drawn

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.bucket[0] + self.bucket[1])

    @property
    def critical_value(self) -> float:
        """1% Kolmogorov-Smirnov critical value for this sample size."""
        return KS_CRITICAL_1PCT / math.sqrt(self.accepted)

    def cdf(self, z) -> np.ndarray:
        """Empirical CDF at ``z``."""
        return np.searchsorted(self.samples, np.asarray(z, dtype=float), side="right") / self.accepted

    def grid(self, points: int = 101) -> list[tuple[float, float]]:
        """``(z, empirical CDF)`` rows on an even grid over the sample range."""
        z = np.linspace(self.samples[0], self.samples[-1], points)
        return list(zip(z.tolist(), self.cdf(z).tolist()))


def ks_distance(sorted_samples: np.ndarray, cdf_values: np.ndarray) -> float:
    """Two-sided Kolmogorov-Smirnov statistic of sorted samples against CDF values at them."""
    count = sorted_samples.size
    upper = np.arange(1, count + 1) / count - cdf_values
    lower = cdf_values - np.arange(count) / count
    return float(max(upper.max(), lower.max()))


def empirical_posterior(
    dist: AbilityDistribution,
    n: int,
    m: int,
    x1_bucket: tuple[float, float],
    trials: int,
    seed: int,
    batch: int = 200_000,
) -> EmpiricalPosterior:
    """Rejection-sample the ability of one co-admitted opponent given an admitted ``x1`` in a bucket.

    ``x1`` is drawn from the prior truncated to the bucket, the other
    ``n - 1`` abilities from the prior, and the draw is kept when ``x1`` is
    shortlisted.  One of the other ``m - 1`` admitted abilities is then
    picked uniformly.  Sampling stops after ``trials`` acceptances.

    Raises:
        AcceptanceTooLow: if the acceptance rate of the first batch is below 1e-4.
        DomainError: if the bucket has no prior mass.
    """
    ctx = ShortlistContext(dist, n, m)
    lo, hi = float(x1_bucket[0]), float(x1_bucket[1])
    f_lo, f_hi = float(dist.cdf(lo)), float(dist.cdf(hi))
    if not hi > lo or not f_hi > f_lo:
        raise DomainError("ability bucket must have positive prior mass")
    stream = RandomStream(seed)
    kept: list[np.ndarray] = []
    got = drawn = 0
    while got < trials:
        u1 = f_lo + (f_hi - f_lo) * stream.uniform(batch)
        x1 = np.asarray(dist.inverse_cdf(np.clip(u1, 0.0, 1.0)), dtype=float)
        others = np.asarray(dist.sample(stream.uniform((batch, n - 1))), dtype=float)
        pick = np.floor(stream.uniform(batch) * (m - 1)).astype(int)
        accepted = np.sum(others > x1[:, None], axis=1) <= m - 1
        drawn += batch
        if drawn == batch and np.count_nonzero(accepted) < MIN_ACCEPTANCE * batch:
            raise AcceptanceTooLow(
                f"acceptance rate {np.count_nonzero(accepted) / batch:.2e} is below {MIN_ACCEPTANCE:g}"
            )
        rivals = -np.sort(-others[accepted], axis=1)[:, : m - 1]
        chosen = rivals[np.arange(len(rivals)), pick[accepted]]
        chosen = chosen[: trials - got]
        kept.append(chosen)
        got += len(chosen)
    samples = np.sort(np.concatenate(kept))
    midpoint = 0.5 * (lo + hi)
    distance = ks_distance(samples, np.asarray(marginal_posterior_cdf(ctx, midpoint, samples)))
    return EmpiricalPosterior(samples, (lo, hi), drawn, distance)

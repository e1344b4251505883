"""Adaptive multilevel Monte Carlo driver.

Runs the standard MLMC loop for a chosen correction family: pilot samples at
the active levels, optimal per-level sample allocation from estimated
variances and per-sample costs, and geometric bias extrapolation from the
decay of the correction means, adding levels until the remaining bias fits in
its share of the error budget. A single-level nested Monte Carlo baseline is
provided for cost comparisons.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import ceil, sqrt

import numpy as np

from .estimators import make_level_sampler
from .problems import InnerSchedule, NestedProblem, Y_SINGLE, outer_chunk_limit
from .randomness import DrawRecorder, derive_stream
from .stats import LevelStats, RateFitError, clipped_bias_slope, fit_rate

log = logging.getLogger(__name__)


@dataclass
class MlmcConfig:
    """Tuning knobs of the adaptive driver.

    The target mean-square error epsilon^2 is split as split * eps^2 for the
    statistical variance and (1 - split) * eps^2 for the squared bias; safety
    inflates the variance-optimal sample counts.
    """

    epsilon: float = 0.01
    l_min: int = 0
    l_max: int = 12
    initial_samples: int = 100
    safety: float = 1.65
    split: float = 0.5
    min_samples: int = 2
    chunk_size: int = 20_000      # outer samples per sampling call
    bias_fit_levels: int = 4      # levels entering the bias-rate regression
    variance_min_count: int = 50  # below this, guard the variance estimate

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.split < 1:
            raise ValueError("split must lie strictly between 0 and 1")
        if self.l_min < 0 or self.l_max < self.l_min:
            raise ValueError("need 0 <= l_min <= l_max")
        if self.initial_samples < self.min_samples:
            raise ValueError("initial_samples must cover the minimum")


@dataclass
class MlmcResult:
    estimate: float
    levels: list[LevelStats]
    total_cost: int
    bias_estimate: float
    statistical_error: float
    converged: bool
    L: int = 0
    samples_per_level: dict[int, int] = field(default_factory=dict)


def choose_samples(
    variances, costs, epsilon: float, split: float = 0.5,
    safety: float = 1.65, min_samples: int = 2,
) -> list[int]:
    """Variance-optimal per-level sample counts for a statistical budget of
    split * epsilon^2:

        M_l = ceil(safety * (split eps^2)^-1 sqrt(V_l / C_l) sum_j sqrt(V_j C_j))
    """
    v = np.asarray(variances, dtype=float)
    c = np.asarray(costs, dtype=float)
    if v.shape != c.shape or v.ndim != 1:
        raise ValueError("variances and costs must be 1-d and aligned")
    if np.any(v < 0) or np.any(c <= 0):
        raise ValueError("need variances >= 0 and costs > 0")
    total = float(np.sum(np.sqrt(v * c)))
    scale = safety / (split * epsilon**2)
    out = []
    for vl, cl in zip(v, c):
        m = scale * sqrt(vl / cl) * total
        out.append(max(int(ceil(m)), min_samples))
    return out


def _guarded_variance(stats: dict[int, LevelStats], level: int,
                      min_count: int) -> float:
    """Sample variance, floored by geometric extrapolation from the better
    sampled lower levels when this level has too few samples to trust."""
    s = stats[level]
    v = s.variance
    if s.count >= min_count:
        return v
    lower = [stats[l] for l in sorted(stats) if l < level
             and stats[l].count >= min_count]
    try:
        fit = fit_rate(lower, "variance")
        return max(v, fit.value_at(level))
    except RateFitError:
        return v


def _bias_estimate(stats: dict[int, LevelStats], l_min: int,
                   fit_levels: int) -> float:
    """Remaining bias |sum_{l>L} E[Delta_l]| extrapolated geometrically.

    The decay exponent alpha comes from a log2 regression of the correction
    means above l_min, clipped to a conservative range; with too few usable
    levels the last correction mean itself is the (alpha = -1) proxy.
    """
    upper = [stats[l] for l in sorted(stats) if l > l_min]
    if not upper:
        return float("inf")
    last = upper[-1]
    tail = upper[-fit_levels:]
    alpha = -1.0
    try:
        fit = fit_rate(tail, "abs_mean")
        alpha = clipped_bias_slope(fit.slope)
    except RateFitError:
        pass
    ratio = 2.0**alpha
    return last.abs_mean * ratio / (1.0 - ratio)


def run_mlmc(
    problem: NestedProblem,
    kind: str,
    config: MlmcConfig,
    seed: int,
    schedule: InnerSchedule | None = None,
    recorder: DrawRecorder | None = None,
) -> MlmcResult:
    """Adaptive MLMC estimate of the nested expectation.

    Streams are keyed by (level, batch index), so results are reproducible
    for a given seed and config and every batch is independent. The reported
    L drops trailing levels whose corrections were identically zero.
    """
    schedule = schedule or InnerSchedule()
    sampler = make_level_sampler(problem, kind, schedule)
    stats: dict[int, LevelStats] = {}
    batch_index: dict[int, int] = {}

    def extend(level: int, target: int):
        s = stats.setdefault(level, LevelStats(level=level))
        limit = min(config.chunk_size, outer_chunk_limit(schedule, level))
        while s.count < target:
            n = min(limit, target - s.count)
            bi = batch_index.get(level, 0)
            batch_index[level] = bi + 1
            cs = sampler(level, derive_stream(seed, (level, bi), recorder), n)
            s.update_batch(cs.values, cs.cost)

    bias_budget = sqrt(1.0 - config.split) * config.epsilon
    # Start with two probe levels above l_min so the bias decay is observable.
    L = min(config.l_min + 2, config.l_max)
    converged = False
    while True:
        for level in range(config.l_min, L + 1):
            extend(level, config.initial_samples)
        # Allocation loop at the current maximum level.
        while True:
            levels = list(range(config.l_min, L + 1))
            v = [_guarded_variance(stats, l, config.variance_min_count)
                 for l in levels]
            c = [max(stats[l].cost_per_sample, 1.0) for l in levels]
            targets = choose_samples(v, c, config.epsilon, config.split,
                                     config.safety, config.min_samples)
            if all(stats[l].count >= t for l, t in zip(levels, targets)):
                break
            for l, t in zip(levels, targets):
                extend(l, t)
        bias = _bias_estimate(stats, config.l_min, config.bias_fit_levels)
        if bias <= bias_budget:
            converged = True
            break
        if L >= config.l_max:
            log.warning("bias %.3g above budget %.3g at l_max=%d",
                        bias, bias_budget, config.l_max)
            break
        L += 1
        log.info("bias %.3g above budget %.3g; refining to L=%d",
                 bias, bias_budget, L)

    ordered = [stats[l] for l in sorted(stats)]
    estimate = sum(s.mean for s in ordered)
    total_cost = sum(s.total_cost for s in ordered)
    stat_err = sqrt(sum(s.variance / s.count for s in ordered if s.count))
    # Report the effective maximum level: trailing identically-zero
    # corrections contribute nothing and only probed the bias.
    eff = config.l_min
    for s in ordered:
        if s.level == config.l_min or s.abs_mean > 0.0 or s.variance > 0.0:
            eff = max(eff, s.level)
    return MlmcResult(
        estimate=estimate,
        levels=ordered,
        total_cost=total_cost,
        bias_estimate=bias,
        statistical_error=stat_err,
        converged=converged,
        L=eff,
        samples_per_level={s.level: s.count for s in ordered},
    )


def nested_mc_baseline(
    problem: NestedProblem,
    config: MlmcConfig,
    seed: int,
    m0: int = 16,
    schedule: InnerSchedule | None = None,
    recorder: DrawRecorder | None = None,
    kind: str = "antithetic-mlmc-y",
) -> MlmcResult:
    """Single-level nested Monte Carlo at an adaptively chosen level L.

    L is found with the same pilot-and-extrapolate bias rule as the MLMC
    driver (using the given correction family's pilot samples), then the
    estimator is the plain average of max{inner MC at level L, payoff} with a
    variance-matched outer sample count. Pilot costs are included.
    """
    schedule = schedule or InnerSchedule(m00=m0)
    sampler = make_level_sampler(problem, kind, schedule)
    stats: dict[int, LevelStats] = {}
    bias_budget = sqrt(1.0 - config.split) * config.epsilon
    L = min(config.l_min + 2, config.l_max)
    while True:
        for level in range(config.l_min, L + 1):
            if level not in stats:
                s = LevelStats(level=level)
                cs = sampler(level, derive_stream(seed, (0, level), recorder),
                             config.initial_samples)
                s.update_batch(cs.values, cs.cost)
                stats[level] = s
        bias = _bias_estimate(stats, config.l_min, config.bias_fit_levels)
        if bias <= bias_budget or L >= config.l_max:
            break
        L += 1
    pilot_cost = sum(s.total_cost for s in stats.values())

    def draw(n: int, key: int) -> tuple[np.ndarray, int]:
        stream = derive_stream(seed, (1, key), recorder)
        yb = problem.sample_y(L, Y_SINGLE, stream.child(0), n)
        pi = problem.payoff(yb.fine0)
        m = m0 * 2**L
        u, cost = problem.sample_x_mean(L, yb.fine0, m, stream.child(1))
        return np.maximum(u, pi), yb.cost + cost

    level_stats = LevelStats(level=L)
    limit = min(config.chunk_size, max(1, 2**21 // (m0 * 2**L)))
    values, cost = draw(min(config.initial_samples, limit), 0)
    level_stats.update_batch(values, cost)
    key = 1
    while True:
        target = max(
            int(ceil(config.safety * level_stats.variance
                     / (config.split * config.epsilon**2))),
            config.initial_samples)
        if level_stats.count >= target:
            break
        n = min(limit, target - level_stats.count)
        values, cost = draw(n, key)
        key += 1
        level_stats.update_batch(values, cost)
    bias = _bias_estimate(stats, config.l_min, config.bias_fit_levels)
    return MlmcResult(
        estimate=level_stats.mean,
        levels=[level_stats],
        total_cost=pilot_cost + level_stats.total_cost,
        bias_estimate=bias,
        statistical_error=sqrt(level_stats.variance / level_stats.count),
        converged=bias <= bias_budget,
        L=L,
        samples_per_level={L: level_stats.count},
    )

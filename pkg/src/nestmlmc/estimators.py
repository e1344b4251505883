"""Multilevel correction-term samplers.

Implements the full family of nested estimators: plain inner Monte Carlo,
antithetic Monte Carlo differences, inner MLMC sums, antithetic multilevel
corrections with exact and with approximate (level-coupled) outer sampling,
and the doubly antithetic version pairing an antithetic outer coupling with
antithetic inner estimates.

All samplers are vectorised over n outer samples and account costs exactly
in Gaussian draws. Within one call, sub-streams are derived from the given
stream by fixed role indices, so results are reproducible and independent
across (level, batch) keys.
"""

from __future__ import annotations

import numpy as np

from .problems import (
    CapabilityError,
    CorrectionSample,
    InnerSchedule,
    NestedProblem,
    Y_COUPLED,
    Y_EXACT,
    Y_SINGLE,
    Y_TRIPLE,
    YBundle,
)
from .randomness import GaussianStream

# When True, every antithetic sample is checked pathwise for the structural
# guarantees (same-side vanishing, 1-Lipschitz bound). Enabled in tests.
debug_checks = False


def inner_sample_size(schedule: InnerSchedule, level: int, k: int) -> int:
    """Inner sample count M_{l,k} of the geometric schedule."""
    return schedule.size(level, k)


def antithetic_max_diff(
    coarse0: np.ndarray, coarse1: np.ndarray, pi: np.ndarray
) -> np.ndarray:
    """max{(u0+u1)/2, pi} - (max{u0, pi} + max{u1, pi})/2, exactly zero
    whenever both coarse estimates fall weakly on the same side of pi."""
    c0 = np.asarray(coarse0, dtype=float)
    c1 = np.asarray(coarse1, dtype=float)
    pi = np.asarray(pi, dtype=float)
    fine = 0.5 * (c0 + c1)
    same_side = ((c0 >= pi) & (c1 >= pi)) | ((c0 <= pi) & (c1 <= pi))
    value = np.maximum(fine, pi) - 0.5 * (np.maximum(c0, pi) + np.maximum(c1, pi))
    value = np.where(same_side, 0.0, value)
    if debug_checks:
        assert np.all(np.abs(value) <= np.abs(c0 - c1) + 1e-12), \
            "antithetic difference exceeded its Lipschitz bound"
    return value


def inner_mc_estimate(
    problem: NestedProblem,
    y,
    level: int,
    m0: int,
    stream: GaussianStream,
    x_level: int | None = None,
) -> tuple[np.ndarray, int]:
    """Average of m0 * 2^level conditionally independent X samples given y.

    x_level selects the X approximation level (None = exact samples when the
    problem supports them, otherwise the problem's finest interpretation).
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    m = m0 * 2**level
    return problem.sample_x_mean(x_level, y, m, stream)


def antithetic_mc_correction(
    problem: NestedProblem,
    y,
    level: int,
    m0: int,
    stream: GaussianStream,
    pi: np.ndarray | None = None,
    x_level: int | None = None,
) -> CorrectionSample:
    """Antithetic Monte Carlo correction with plain inner averages.

    For level >= 1 the two coarse estimates are conditionally independent
    level-(l-1) inner MC averages and the fine estimate is their mean; the
    level-0 term is max{inner MC at level 0, payoff}.
    """
    if pi is None:
        pi = problem.payoff(y)
    if level == 0:
        u0, cost = inner_mc_estimate(problem, y, 0, m0, stream.child(1), x_level)
        return CorrectionSample(np.maximum(u0, pi), cost)
    u0, cost0 = inner_mc_estimate(problem, y, level - 1, m0, stream.child(1), x_level)
    u1, cost1 = inner_mc_estimate(problem, y, level - 1, m0, stream.child(2), x_level)
    return CorrectionSample(antithetic_max_diff(u0, u1, pi), cost0 + cost1)


def inner_mlmc_estimate(
    problem: NestedProblem,
    y,
    level: int,
    schedule: InnerSchedule,
    stream: GaussianStream,
) -> tuple[np.ndarray, int]:
    """Inner MLMC estimate: sum over k of M_{l,k}-averages of dx_k at y."""
    values, cost = _inner_mlmc_multi(problem, [y], level, level, schedule, stream)
    return values[0], cost


def _inner_mlmc_multi(
    problem: NestedProblem,
    ys,
    level: int,
    k_max: int,
    schedule: InnerSchedule,
    stream: GaussianStream,
) -> tuple[list[np.ndarray], int]:
    """Inner MLMC sums over k = 0..k_max with sizes M_{level,k}, evaluated at
    every y-representation from shared inner noise."""
    totals = None
    cost = 0
    for k in range(k_max + 1):
        m = schedule.size(level, k)
        means, c = problem.sample_dx(k, ys, m, stream.child(k))
        cost += c
        if totals is None:
            totals = [mk.astype(float, copy=True) for mk in means]
        else:
            for t, mk in zip(totals, means):
                t += mk
    return totals, cost


def antithetic_ml_correction(
    problem: NestedProblem,
    y,
    level: int,
    schedule: InnerSchedule,
    stream: GaussianStream,
    pi: np.ndarray | None = None,
) -> CorrectionSample:
    """Antithetic multilevel correction with one (exact or fixed-level) y.

    Two conditionally independent level-(l-1) inner MLMC estimates form the
    coarse terms; the fine term is their mean plus an independent
    M_{l,l}-average of dx_l.
    """
    if level < 1:
        raise ValueError("antithetic correction defined for level >= 1")
    if pi is None:
        pi = problem.payoff(y)
    (u0,), cost0 = _inner_mlmc_multi(problem, [y], level - 1, level - 1, schedule,
                                     stream.child(1))
    (u1,), cost1 = _inner_mlmc_multi(problem, [y], level - 1, level - 1, schedule,
                                     stream.child(2))
    m_top = schedule.size(level, level)
    (d_top,), cost2 = problem.sample_dx(level, [y], m_top, stream.child(3, level))
    fine = 0.5 * (u0 + u1) + d_top
    value = np.maximum(fine, pi) - 0.5 * (np.maximum(u0, pi) + np.maximum(u1, pi))
    return CorrectionSample(np.asarray(value), cost0 + cost1 + cost2)


def mlmc_level0_term(
    problem: NestedProblem,
    schedule: InnerSchedule,
    stream: GaussianStream,
    n: int,
    y_mode: str = Y_SINGLE,
) -> CorrectionSample:
    """Degenerate level-0 term max{inner MLMC at level 0, payoff}."""
    yb = problem.sample_y(0, y_mode, stream.child(0), n)
    pi = problem.payoff(yb.fine0)
    (u0,), cost = _inner_mlmc_multi(problem, [yb.fine0], 0, 0, schedule,
                                    stream.child(1))
    return CorrectionSample(np.maximum(u0, pi), yb.cost + cost)


def antithetic_ml_correction_y(
    problem: NestedProblem,
    level: int,
    schedule: InnerSchedule,
    stream: GaussianStream,
    n: int,
) -> CorrectionSample:
    """Antithetic multilevel correction with level-coupled outer sampling.

    The outer variable is sampled as a coupled (fine, coarse) pair; every
    inner correction sample is evaluated at both representations from shared
    inner noise. The fine max uses the fine representation, both coarse maxes
    the coarse one.
    """
    if level < 1:
        raise ValueError("coupled correction defined for level >= 1")
    yb = problem.sample_y(level, Y_COUPLED, stream.child(0), n)
    if yb.coarse is None:
        raise CapabilityError("problem did not return a coupled outer pair")
    ys = [yb.fine0, yb.coarse]
    (u0f, u0c), cost0 = _inner_mlmc_multi(problem, ys, level - 1, level - 1,
                                          schedule, stream.child(1))
    (u1f, u1c), cost1 = _inner_mlmc_multi(problem, ys, level - 1, level - 1,
                                          schedule, stream.child(2))
    m_top = schedule.size(level, level)
    (d_top,), cost2 = problem.sample_dx(level, [yb.fine0], m_top,
                                        stream.child(3, level))
    pi_f = problem.payoff(yb.fine0)
    pi_c = problem.payoff(yb.coarse)
    fine = 0.5 * (u0f + u1f) + d_top
    value = np.maximum(fine, pi_f) \
        - 0.5 * (np.maximum(u0c, pi_c) + np.maximum(u1c, pi_c))
    return CorrectionSample(np.asarray(value),
                            yb.cost + cost0 + cost1 + cost2)


def doubly_antithetic_correction(
    problem: NestedProblem,
    level: int,
    schedule: InnerSchedule,
    stream: GaussianStream,
    n: int,
) -> CorrectionSample:
    """Doubly antithetic correction: antithetic outer pair plus antithetic
    inner multilevel estimates.

    Samples an outer triple (fine0, fine1, coarse); the averaged fine inner
    estimate is evaluated at each fine representation and the i-th inner copy
    alone at the coarse representation, all from inner noise shared per
    (copy, inner sample) index.
    """
    if level < 1:
        raise ValueError("doubly antithetic correction defined for level >= 1")
    yb = problem.sample_y(level, Y_TRIPLE, stream.child(0), n)
    if yb.fine1 is None or yb.coarse is None:
        raise CapabilityError("problem did not return an antithetic outer triple")
    ys = [yb.fine0, yb.fine1, yb.coarse]
    (a0f0, a0f1, a0c), cost0 = _inner_mlmc_multi(problem, ys, level - 1,
                                                 level - 1, schedule,
                                                 stream.child(1))
    (a1f0, a1f1, a1c), cost1 = _inner_mlmc_multi(problem, ys, level - 1,
                                                 level - 1, schedule,
                                                 stream.child(2))
    m_top = schedule.size(level, level)
    (df0, df1), cost2 = problem.sample_dx(level, [yb.fine0, yb.fine1], m_top,
                                          stream.child(3, level))
    pi_f0 = problem.payoff(yb.fine0)
    pi_f1 = problem.payoff(yb.fine1)
    pi_c = problem.payoff(yb.coarse)
    fine_f0 = 0.5 * (a0f0 + a1f0) + df0
    fine_f1 = 0.5 * (a0f1 + a1f1) + df1
    value = 0.5 * (
        np.maximum(fine_f0, pi_f0) - np.maximum(a0c, pi_c)
        + np.maximum(fine_f1, pi_f1) - np.maximum(a1c, pi_c)
    )
    return CorrectionSample(np.asarray(value),
                            yb.cost + cost0 + cost1 + cost2)


# ---------------------------------------------------------------------------
# Driver-facing samplers: one callable per estimator family that samples the
# outer variable itself and returns a batch of level-l correction values.

KIND_ANT_MC = "antithetic-mc"
KIND_ANT_ML = "antithetic-mlmc"
KIND_ANT_ML_Y = "antithetic-mlmc-y"
KIND_DOUBLY_ANT = "doubly-antithetic"

ESTIMATOR_KINDS = (KIND_ANT_MC, KIND_ANT_ML, KIND_ANT_ML_Y, KIND_DOUBLY_ANT)


def make_level_sampler(problem: NestedProblem, kind: str,
                       schedule: InnerSchedule):
    """Returns f(level, stream, n) -> CorrectionSample for the chosen family."""
    if kind not in ESTIMATOR_KINDS:
        raise ValueError(f"unknown estimator kind {kind!r}")

    exact_outer = kind in (KIND_ANT_MC, KIND_ANT_ML)
    level0_mode = Y_EXACT if exact_outer else Y_SINGLE

    def sample(level: int, stream: GaussianStream, n: int) -> CorrectionSample:
        if level == 0:
            if kind == KIND_ANT_MC:
                yb = problem.sample_y(0, Y_EXACT, stream.child(0), n)
                pi = problem.payoff(yb.fine0)
                cs = antithetic_mc_correction(problem, yb.fine0, 0,
                                              schedule.m00, stream, pi=pi)
                return CorrectionSample(cs.values, cs.cost + yb.cost)
            return mlmc_level0_term(problem, schedule, stream, n,
                                    y_mode=level0_mode)
        if kind == KIND_ANT_MC:
            yb = problem.sample_y(level, Y_EXACT, stream.child(0), n)
            pi = problem.payoff(yb.fine0)
            cs = antithetic_mc_correction(problem, yb.fine0, level,
                                          schedule.m00, stream, pi=pi)
            return CorrectionSample(cs.values, cs.cost + yb.cost)
        if kind == KIND_ANT_ML:
            yb = problem.sample_y(level, Y_EXACT, stream.child(0), n)
            cs = antithetic_ml_correction(problem, yb.fine0, level, schedule,
                                          stream)
            return CorrectionSample(cs.values, cs.cost + yb.cost)
        if kind == KIND_ANT_ML_Y:
            return antithetic_ml_correction_y(problem, level, schedule,
                                              stream, n)
        return doubly_antithetic_correction(problem, level, schedule, stream, n)

    return sample

"""Concrete experiment configurations and batch runners.

Provides the Bermudan basket-put market configuration, a family of discrete
synthetic problems whose nested expectation is exactly enumerable (used as
ground-truth oracles throughout the test suite), and runners that collect
per-level correction statistics or sweep the MLMC driver over a tolerance
grid.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from math import log, sqrt

import numpy as np

from .discrete import DiscreteNestedProblem, DiscreteNestedSpec, PayoffSpec
from .driver import MlmcConfig, MlmcResult, nested_mc_baseline, run_mlmc
from .estimators import make_level_sampler
from .problems import InnerSchedule, NestedProblem, outer_chunk_limit
from .randomness import DrawRecorder, derive_stream
from .sde import MarketModel, bermudan_problem
from .stats import LevelStats


def bermudan_config() -> MarketModel:
    """Market parameters of the two-stage Bermudan basket put experiment.

    Four risky assets with initial prices evenly spaced on [9.4, 10.6] and
    volatilities on [0.3, 0.4]; the strike is the mean initial price; the
    volatility asset starts at 0.2 with sigma0 chosen so its variance doubles
    per unit time.
    """
    s0i = np.linspace(9.4, 10.6, 4)
    return MarketModel(
        d=4,
        r=0.05,
        sigma0=sqrt(log(2.0) / 2.0),
        sigma=np.linspace(0.3, 0.4, 4),
        s0=np.concatenate(([0.2], s0i)),
        T=2.0,
        K=float(s0i.mean()),
    )


# ---------------------------------------------------------------------------
# Discrete oracle specs. All values are exactly enumerable, so these drive
# the end-to-end wiring, accuracy, and vanishing-probability tests.

def oracle_spec(beta2: float = 2.0, break_coupling: bool = False) -> DiscreteNestedSpec:
    """Five-outcome spec with mixed max-branches and genuine level effects.

    Payoff gaps |E[X|y] - pi(y)| are large against the inner noise, so the
    nested max is locally linear and correction means match differences of
    enumerated level values tightly.
    """
    return DiscreteNestedSpec(
        y_values=[0.0, 1.0, 2.0, 3.0, 4.0],
        y_probs=[0.15, 0.25, 0.2, 0.25, 0.15],
        x_values=[[1.0, 5.0], [-2.0, 6.0], [0.0, 4.0], [2.0, 8.0], [-1.0, 3.0]],
        x_probs=[[0.5, 0.5], [0.5, 0.5], [0.25, 0.75], [0.5, 0.5], [0.5, 0.5]],
        payoff=PayoffSpec(const=6.0, lin=-1.0),
        delta_x=0.8,
        delta_y=0.5,
        beta2=beta2,
        c_x=1.0,
        gamma=0.3,
        break_coupling=break_coupling,
    )


def euler_like_spec() -> DiscreteNestedSpec:
    """Same problem with slow (beta2 = 1) inner correction variance decay."""
    return oracle_spec(beta2=1.0)


def vanishing_spec() -> DiscreteNestedSpec:
    """Spec tuned so the antithetic MC difference vanishes gradually.

    One outcome has E[X|y] close to the payoff relative to the inner noise, so
    the straddle probability P(antithetic difference != 0) decays strictly but
    slowly with the level. The conditional distribution is fine-grained so
    inner-mean lattice parity cannot spoil the monotone decay.
    """
    grid = np.linspace(-1.0, 1.0, 16)
    return DiscreteNestedSpec(
        y_values=[0.0, 10.0],
        y_probs=[0.5, 0.5],
        x_values=[grid, grid + 5.0],
        x_probs=[np.full(16, 1.0 / 16)] * 2,
        payoff=PayoffSpec(const=0.15, lin=0.1),
        delta_x=0.0,
        delta_y=0.0,
        c_x=0.0,
    )


def zero_perturbation_spec() -> DiscreteNestedSpec:
    """Unbiased degenerate spec: every correction above level 0 has mean 0."""
    spec = oracle_spec()
    spec.delta_x = 0.0
    spec.delta_y = 0.0
    spec.gamma = 0.0
    return spec


def discrete_problem(spec: DiscreteNestedSpec | None = None) -> DiscreteNestedProblem:
    return DiscreteNestedProblem(spec if spec is not None else oracle_spec())


# ---------------------------------------------------------------------------
# Batch runners.

def run_level_stats(
    problem: NestedProblem,
    kind: str,
    schedule: InnerSchedule,
    levels,
    n_per_level,
    seed: int,
    chunk_size: int = 20_000,
    threads: int = 1,
    recorder: DrawRecorder | None = None,
) -> list[LevelStats]:
    """Correction-term statistics per level for one estimator family.

    n_per_level is an int or a per-level sequence. Sampling is chunked with
    streams keyed by (level, chunk index); chunks may run on a thread pool and
    are merged in deterministic order, so results do not depend on threads.
    """
    levels = list(levels)
    if np.isscalar(n_per_level):
        n_per_level = [int(n_per_level)] * len(levels)
    sampler = make_level_sampler(problem, kind, schedule)

    jobs = []  # (level position, chunk index, n)
    for pos, (level, n_total) in enumerate(zip(levels, n_per_level)):
        limit = min(chunk_size, outer_chunk_limit(schedule, level))
        start = 0
        ci = 0
        while start < n_total:
            n = min(limit, n_total - start)
            jobs.append((pos, ci, n))
            start += n
            ci += 1

    def run_job(job):
        pos, ci, n = job
        level = levels[pos]
        cs = sampler(level, derive_stream(seed, (level, ci), recorder), n)
        return from_correction(level, cs)

    def from_correction(level, cs):
        s = LevelStats(level=level)
        s.update_batch(cs.values, cs.cost)
        return s

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(pool.map(run_job, jobs))
    else:
        partials = [run_job(j) for j in jobs]

    out = [LevelStats(level=level) for level in levels]
    for job, part in zip(jobs, partials):
        out[job[0]].merge(part)
    return out


def run_epsilon_sweep(
    problem: NestedProblem,
    kind: str,
    epsilons,
    seed: int,
    repetitions: int = 1,
    base_config: MlmcConfig | None = None,
    schedule: InnerSchedule | None = None,
    baseline: bool = False,
    threads: int = 1,
) -> list[dict]:
    """Run the driver across a tolerance grid; one result row per (tol, rep).

    Rows carry the CSV fields: tol, P (the estimate), cost, L, bias, and a
    converged flag. Each repetition uses an independent derived seed.
    """
    base = base_config or MlmcConfig()
    runs = [(float(eps), rep) for eps in epsilons for rep in range(repetitions)]

    def one(run):
        eps, rep = run
        cfg = MlmcConfig(
            epsilon=eps, l_min=base.l_min, l_max=base.l_max,
            initial_samples=base.initial_samples, safety=base.safety,
            split=base.split, min_samples=base.min_samples,
            chunk_size=base.chunk_size, bias_fit_levels=base.bias_fit_levels,
            variance_min_count=base.variance_min_count)
        run_seed = seed + 7919 * rep
        if baseline:
            res = nested_mc_baseline(problem, cfg, run_seed, schedule=schedule,
                                     kind=kind)
        else:
            res = run_mlmc(problem, kind, cfg, run_seed, schedule=schedule)
        return {
            "tol": eps,
            "P": res.estimate,
            "cost": res.total_cost,
            "L": res.L,
            "bias": res.bias_estimate,
            "converged": res.converged,
        }

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, runs))
    return [one(r) for r in runs]

import itertools

import numpy as np
import pytest

from nestmlmc import estimators as est
from nestmlmc.discrete import (
    DiscreteNestedProblem,
    DiscreteNestedSpec,
    PayoffSpec,
    oracle_u0,
)
from nestmlmc.driver import MlmcConfig, choose_samples, nested_mc_baseline, run_mlmc
from nestmlmc.experiments import oracle_spec, zero_perturbation_spec
from nestmlmc.problems import InnerSchedule
from nestmlmc.randomness import DrawRecorder


def test_choose_samples_worked_example():
    # V = (4, 1), C = (1, 4), eps = 1, split = 0.5, safety = 1:
    # sum sqrt(VC) = 2 + 2 = 4; M0 = 2 * sqrt(4/1) * 4 = 16, M1 = 2 * 0.5 * 4
    assert choose_samples([4.0, 1.0], [1.0, 4.0], 1.0, split=0.5,
                          safety=1.0) == [16, 4]


def test_choose_samples_scaling_and_floor():
    base = choose_samples([1.0, 0.25], [1.0, 4.0], 0.1)
    half = choose_samples([1.0, 0.25], [1.0, 4.0], 0.05)
    # halving the tolerance quadruples every level's allocation
    assert all(abs(h - 4 * b) <= 4 for h, b in zip(half, base))
    # zero-variance levels get the minimum
    assert choose_samples([0.0, 1.0], [1.0, 1.0], 0.5)[0] == 2
    with pytest.raises(ValueError):
        choose_samples([1.0], [0.0], 0.1)
    with pytest.raises(ValueError):
        choose_samples([-1.0], [1.0], 0.1)


def test_choose_samples_is_cost_optimal():
    # brute-force check: among integer allocations meeting the variance
    # budget, the closed form is within rounding of the cheapest
    v = np.array([2.0, 0.5, 0.1])
    c = np.array([1.0, 4.0, 16.0])
    eps, split, safety = 0.35, 0.5, 1.0
    m_star = choose_samples(v, c, eps, split=split, safety=safety)
    cost_star = float(np.dot(m_star, c))
    budget = split * eps**2
    best = np.inf
    grid = [range(max(2, m - 12), m + 13) for m in m_star]
    for m in itertools.product(*grid):
        if np.sum(v / np.array(m)) <= budget:
            best = min(best, float(np.dot(m, c)))
    assert cost_star <= best * 1.05


def test_config_validation():
    with pytest.raises(ValueError):
        MlmcConfig(epsilon=0.0)
    with pytest.raises(ValueError):
        MlmcConfig(split=1.0)
    with pytest.raises(ValueError):
        MlmcConfig(l_min=4, l_max=2)
    with pytest.raises(ValueError):
        MlmcConfig(initial_samples=1)


def degenerate_problem(c=3.0):
    spec = DiscreteNestedSpec(
        y_values=[1.0], y_probs=[1.0], x_values=[[c]], x_probs=[[1.0]],
        payoff=PayoffSpec(const=0.0), delta_x=0.0, delta_y=0.0, c_x=0.0)
    return DiscreteNestedProblem(spec), spec


def test_degenerate_telescope_exact_at_pilot_cost():
    # corrections above level 0 are identically zero, level 0 deterministic:
    # the estimate is exact, L stays at l_min, only pilot samples are drawn
    problem, _ = degenerate_problem(3.0)
    cfg = MlmcConfig(epsilon=0.1, initial_samples=100)
    res = run_mlmc(problem, est.KIND_ANT_ML, cfg, seed=1)
    assert res.estimate == 3.0
    assert res.L == 0
    assert res.converged
    assert all(s.count == 100 for s in res.levels)
    assert res.statistical_error == 0.0


def test_run_mlmc_is_deterministic_given_seed():
    problem = DiscreteNestedProblem(oracle_spec())
    cfg = MlmcConfig(epsilon=0.05)
    a = run_mlmc(problem, est.KIND_DOUBLY_ANT, cfg, seed=11)
    b = run_mlmc(problem, est.KIND_DOUBLY_ANT, cfg, seed=11)
    assert a.estimate == b.estimate
    assert a.total_cost == b.total_cost
    assert a.samples_per_level == b.samples_per_level
    c = run_mlmc(problem, est.KIND_DOUBLY_ANT, cfg, seed=12)
    assert c.estimate != a.estimate


def test_run_mlmc_hits_tolerance_on_oracle():
    spec = oracle_spec()
    problem = DiscreteNestedProblem(spec)
    eps = 0.03
    res = run_mlmc(problem, est.KIND_DOUBLY_ANT, MlmcConfig(epsilon=eps),
                   seed=21)
    assert res.converged
    assert abs(res.estimate - oracle_u0(spec)) < 3.0 * eps
    assert res.statistical_error < eps
    # accounting: total cost is the sum over levels, counts match stats
    assert res.total_cost == sum(s.total_cost for s in res.levels)
    assert all(res.samples_per_level[s.level] == s.count for s in res.levels)


def test_tighter_tolerance_means_higher_cost_and_level():
    problem = DiscreteNestedProblem(oracle_spec())
    loose = run_mlmc(problem, est.KIND_DOUBLY_ANT, MlmcConfig(epsilon=0.08),
                     seed=31)
    tight = run_mlmc(problem, est.KIND_DOUBLY_ANT, MlmcConfig(epsilon=0.01),
                     seed=31)
    assert tight.total_cost > loose.total_cost
    assert tight.L >= loose.L
    assert tight.bias_estimate <= loose.bias_estimate


def test_sample_counts_decrease_with_level():
    problem = DiscreteNestedProblem(oracle_spec())
    res = run_mlmc(problem, est.KIND_DOUBLY_ANT, MlmcConfig(epsilon=0.01),
                   seed=41)
    counts = [res.samples_per_level[l] for l in sorted(res.samples_per_level)]
    assert all(a >= b for a, b in zip(counts, counts[1:]))
    assert counts[0] > 10 * counts[-1]


def test_unconverged_flag_at_l_max():
    problem = DiscreteNestedProblem(oracle_spec())
    res = run_mlmc(problem, est.KIND_DOUBLY_ANT,
                   MlmcConfig(epsilon=0.002, l_max=2), seed=51)
    assert not res.converged
    assert res.bias_estimate > np.sqrt(0.5) * 0.002


def test_zero_perturbation_bias_terminates_early():
    problem = DiscreteNestedProblem(zero_perturbation_spec())
    res = run_mlmc(problem, est.KIND_DOUBLY_ANT, MlmcConfig(epsilon=0.02),
                   seed=61)
    assert res.converged
    assert res.L <= 3


def test_reported_cost_matches_recorded_draws_plus_table_draws():
    # Gaussian draws recorded by the streams can never exceed the synthetic
    # cost model of the discrete problem
    problem = DiscreteNestedProblem(oracle_spec())
    rec = DrawRecorder()
    res = run_mlmc(problem, est.KIND_DOUBLY_ANT, MlmcConfig(epsilon=0.05),
                   seed=71, recorder=rec)
    assert 0 < rec.total <= res.total_cost


def test_baseline_single_level_accuracy_and_cost():
    spec = oracle_spec()
    problem = DiscreteNestedProblem(spec)
    eps = 0.05
    res = nested_mc_baseline(problem, MlmcConfig(epsilon=eps), seed=81)
    assert len(res.levels) == 1
    assert abs(res.estimate - oracle_u0(spec)) < 3.0 * eps
    # the single-level estimator pays the full inner-times-outer cost and is
    # far more expensive than the multilevel run at equal tolerance
    ml = run_mlmc(problem, est.KIND_DOUBLY_ANT, MlmcConfig(epsilon=eps),
                  seed=81, schedule=InnerSchedule(m00=16))
    assert res.total_cost > 3 * ml.total_cost


def test_baseline_cost_grows_superquadratically():
    problem = DiscreteNestedProblem(oracle_spec())
    costs = []
    epss = [0.16, 0.08, 0.04]
    for eps in epss:
        res = nested_mc_baseline(problem, MlmcConfig(epsilon=eps), seed=91)
        costs.append(res.total_cost)
    # cost ~ eps^-2 from samples times eps^-1..-2 from the level: the fitted
    # exponent must exceed the plain-MC 2 by a clear margin
    slope = np.polyfit(np.log(epss), np.log(costs), 1)[0]
    assert slope < -2.5

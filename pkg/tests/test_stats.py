import numpy as np
import pytest

from nestmlmc.stats import (
    DegenerateStatisticsError,
    LevelStats,
    RateFitError,
    clipped_bias_slope,
    fit_rate,
    from_batch,
)

rng = np.random.default_rng(2024)


def reference_moments(x):
    n = x.size
    mean = x.mean()
    var = np.sum((x - mean) ** 2) / (n - 1)
    kurt = np.mean((x - mean) ** 4) / (np.sum((x - mean) ** 2) / n) ** 2
    return mean, var, kurt


def test_single_updates_match_batch_formulas():
    x = rng.normal(size=500) * 2.0 + 1.0
    s = LevelStats(level=0)
    for v in x:
        s.update(v, cost=3)
    mean, var, kurt = reference_moments(x)
    assert s.count == 500
    assert s.total_cost == 1500
    assert np.isclose(s.mean, mean)
    assert np.isclose(s.variance, var)
    assert np.isclose(s.kurtosis(), kurt)


def test_batch_update_and_merge_agree_with_pooled():
    x = rng.standard_t(df=5, size=4000)
    pooled = from_batch(0, x)
    merged = LevelStats(level=0)
    for part in np.array_split(x, 7):
        merged.update_batch(part, cost=len(part))
    assert np.isclose(merged.mean, pooled.mean)
    assert np.isclose(merged.m2, pooled.m2)
    assert np.isclose(merged.m3, pooled.m3)
    assert np.isclose(merged.m4, pooled.m4)
    assert merged.total_cost == 4000


def test_merge_order_invariance():
    parts = [rng.normal(size=k) for k in (3, 400, 17, 90)]
    a = LevelStats(level=1)
    for p in parts:
        a.update_batch(p)
    b = LevelStats(level=1)
    for p in reversed(parts):
        b.update_batch(p)
    assert np.isclose(a.variance, b.variance)
    assert np.isclose(a.kurtosis(), b.kurtosis())


def test_two_point_hand_example():
    # {0, 2}: mean 1, unbiased var 2, population var 1, mu4 = 1 -> kurtosis 1
    s = from_batch(0, [0.0, 2.0, 0.0, 2.0])
    assert s.mean == 1.0
    assert np.isclose(s.variance, 4.0 / 3.0)
    assert np.isclose(s.kurtosis(), 1.0)


def test_raw_kurtosis_recovers_uncentered_moment():
    x = rng.normal(size=2000) + 3.0
    s = from_batch(0, x)
    var = s.m2 / s.count
    expected = np.mean(x**4) / var**2
    assert np.isclose(s.kurtosis(raw=True), expected)


def test_kurtosis_degenerate_cases():
    with pytest.raises(DegenerateStatisticsError):
        from_batch(0, [1.0, 2.0, 3.0]).kurtosis()
    with pytest.raises(DegenerateStatisticsError):
        from_batch(0, [5.0] * 10).kurtosis()


def test_abs_mean_and_cost_per_sample():
    s = from_batch(2, [-1.0, -3.0], cost=10)
    assert s.abs_mean == 2.0
    assert s.cost_per_sample == 5.0


def test_fit_rate_exact_geometric_decay():
    stats = []
    for level in range(2, 9):
        x = rng.normal(size=2000) * 2.0 ** (-0.75 * level)
        s = from_batch(level, x + 0.5 * 2.0 ** (-level))
        stats.append(s)
    fit = fit_rate(stats, "variance")
    assert abs(fit.slope - (-1.5)) < 0.1
    assert fit.level_range == (2, 8)
    assert np.isclose(fit.value_at(4), 2.0 ** (fit.intercept + 4 * fit.slope))


def test_fit_rate_on_deterministic_values():
    stats = []
    for level in range(5):
        s = LevelStats(level=level, count=10, mean=3.0 * 2.0**-level)
        stats.append(s)
    fit = fit_rate(stats, "abs_mean")
    assert np.isclose(fit.slope, -1.0)
    assert np.isclose(fit.intercept, np.log2(3.0))
    assert fit.residual < 1e-20


def test_fit_rate_level_range_selection():
    stats = [LevelStats(level=l, count=5, mean=2.0**-l) for l in range(8)]
    stats[0].mean = 100.0  # polluted pre-asymptotic level, excluded by range
    fit = fit_rate(stats, "abs_mean", level_range=(2, 7))
    assert np.isclose(fit.slope, -1.0)


def test_fit_rate_errors():
    stats = [LevelStats(level=l, count=5, mean=1.0) for l in range(2)]
    with pytest.raises(RateFitError):
        fit_rate(stats, "abs_mean")
    bad = [LevelStats(level=l, count=5, mean=0.0) for l in range(4)]
    with pytest.raises(RateFitError):
        fit_rate(bad, "abs_mean")
    with pytest.raises(RateFitError):
        fit_rate(stats, "median")


def test_clipped_bias_slope():
    assert clipped_bias_slope(-1.0) == -1.0
    assert clipped_bias_slope(-3.7) == -2.0
    assert clipped_bias_slope(0.4) == -0.5

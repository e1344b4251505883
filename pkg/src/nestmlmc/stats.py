"""Streaming per-level statistics and log2 rate regression.

LevelStats tracks count, mean, central power sums up to fourth order and the
accumulated sampling cost for one multilevel correction term. Accumulators
merge exactly (up to rounding), so batches sampled on different workers can
be combined without ordering effects beyond floating point.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class DegenerateStatisticsError(ValueError):
    """Raised when a statistic is requested from degenerate data."""


class RateFitError(ValueError):
    """Raised when a log2 regression is requested on unusable data."""


@dataclass
class LevelStats:
    """Moment accumulator for one level's correction samples."""

    level: int = 0
    count: int = 0
    mean: float = 0.0
    m2: float = 0.0  # sum of (x - mean)^2
    m3: float = 0.0
    m4: float = 0.0
    total_cost: int = 0

    def update(self, value: float, cost: int = 0):
        """Add a single sample with its sampling cost."""
        self.merge(_single(self.level, float(value), int(cost)))

    def update_batch(self, values, cost: int = 0):
        """Add a batch of samples with their combined sampling cost."""
        self.merge(from_batch(self.level, values, int(cost)))

    def merge(self, other: "LevelStats"):
        """Combine with another accumulator over disjoint samples.

        Pairwise update formulas (Pebay 2008); numerically stable and exact
        in expectation for any split of the data.
        """
        na, nb = self.count, other.count
        if nb == 0:
            return
        if na == 0:
            self.count = other.count
            self.mean = other.mean
            self.m2, self.m3, self.m4 = other.m2, other.m3, other.m4
            self.total_cost += other.total_cost
            return
        n = na + nb
        d = other.mean - self.mean
        d_n = d / n
        m2a, m2b = self.m2, other.m2
        m3a, m3b = self.m3, other.m3
        self.m4 += other.m4 + d * d_n**3 * na * nb * (na**2 - na * nb + nb**2) \
            + 6.0 * d_n**2 * (na**2 * m2b + nb**2 * m2a) \
            + 4.0 * d_n * (na * m3b - nb * m3a)
        self.m3 += other.m3 + d * d_n**2 * na * nb * (na - nb) \
            + 3.0 * d_n * (na * m2b - nb * m2a)
        self.m2 += other.m2 + d * d_n * na * nb
        self.mean += nb * d_n
        self.count = n
        self.total_cost += other.total_cost

    @property
    def variance(self) -> float:
        """Unbiased sample variance."""
        if self.count < 2:
            return 0.0
        return max(self.m2 / (self.count - 1), 0.0)

    @property
    def abs_mean(self) -> float:
        return abs(self.mean)

    @property
    def cost_per_sample(self) -> float:
        return self.total_cost / self.count if self.count else 0.0

    def kurtosis(self, raw: bool = False) -> float:
        """Fourth moment over squared variance.

        Central by default (E[(x-mean)^4]/Var^2). With raw=True uses the raw
        fourth moment E[x^4] instead, recovered from the central sums; the two
        agree as the level means approach zero.
        """
        if self.count < 4:
            raise DegenerateStatisticsError("kurtosis needs at least 4 samples")
        n = self.count
        var = self.m2 / n  # population variance for the ratio
        if var <= 0.0:
            raise DegenerateStatisticsError("kurtosis undefined at zero variance")
        mu4 = self.m4 / n
        if raw:
            m = self.mean
            mu4 = mu4 + 4.0 * m * self.m3 / n + 6.0 * m**2 * var + m**4
        return mu4 / var**2


def _single(level: int, value: float, cost: int) -> LevelStats:
    return LevelStats(level=level, count=1, mean=value, total_cost=cost)


def from_batch(level: int, values, cost: int = 0) -> LevelStats:
    """Build an accumulator from an array of samples in one pass."""
    import numpy as np

    x = np.asarray(values, dtype=float).ravel()
    n = x.size
    if n == 0:
        return LevelStats(level=level, total_cost=int(cost))
    mean = float(x.mean())
    d = x - mean
    d2 = d * d
    return LevelStats(
        level=level,
        count=n,
        mean=mean,
        m2=float(d2.sum()),
        m3=float((d2 * d).sum()),
        m4=float((d2 * d2).sum()),
        total_cost=int(cost),
    )


@dataclass
class RateFit:
    """Least-squares fit of log2(field) against the level index."""

    slope: float
    intercept: float
    residual: float
    level_range: tuple[int, int] = (0, 0)
    field: str = ""

    def value_at(self, level: float) -> float:
        return 2.0 ** (self.intercept + self.slope * level)


def fit_rate(
    stats_by_level: list[LevelStats],
    field: str,
    level_range: tuple[int, int] | None = None,
) -> RateFit:
    """OLS of log2(field) on level over the inclusive level range.

    field is "abs_mean" or "variance". Needs at least 3 levels in range and
    strictly positive field values.
    """
    import numpy as np

    if field not in ("abs_mean", "variance"):
        raise RateFitError(f"unknown field {field!r}")
    if level_range is None:
        levels_all = [s.level for s in stats_by_level]
        level_range = (min(levels_all), max(levels_all))
    lo, hi = level_range
    sel = [s for s in stats_by_level if lo <= s.level <= hi]
    if len(sel) < 3:
        raise RateFitError(f"need >= 3 levels in range [{lo}, {hi}]")
    ells = np.array([s.level for s in sel], dtype=float)
    vals = np.array([getattr(s, field) for s in sel], dtype=float)
    if np.any(vals <= 0.0) or not np.all(np.isfinite(vals)):
        raise RateFitError(f"non-positive {field} value in range [{lo}, {hi}]")
    y = np.log2(vals)
    coeffs, res, _, _, _ = np.polyfit(ells, y, 1, full=True)
    residual = float(res[0]) if res.size else 0.0
    return RateFit(
        slope=float(coeffs[0]),
        intercept=float(coeffs[1]),
        residual=residual,
        level_range=(lo, hi),
        field=field,
    )


# Guard rails for bias extrapolation from a possibly pre-asymptotic fit.
BIAS_SLOPE_FLOOR = -2.0
BIAS_SLOPE_CAP = -0.5


def clipped_bias_slope(slope: float) -> float:
    return min(max(slope, BIAS_SLOPE_FLOOR), BIAS_SLOPE_CAP)

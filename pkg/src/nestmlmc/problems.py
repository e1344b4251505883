"""The nested-problem contract consumed by every estimator.

A NestedProblem bundles outer-variable sampling (possibly antithetic or
level-coupled), conditional inner correction sampling, and the payoff. All
operations are vectorised over a batch of n outer samples; y-representations
are problem-defined objects (typically arrays with leading dimension n) that
estimators only pass around and feed to payoff().
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil
from typing import Any, Sequence

import numpy as np

from .randomness import GaussianStream

# Outer-sampling modes.
Y_EXACT = "exact"
Y_SINGLE = "single-approx"
Y_COUPLED = "coupled-pair"
Y_TRIPLE = "antithetic-triple"


class CapabilityError(NotImplementedError):
    """A problem was asked for a sampling mode it does not support."""


@dataclass
class YBundle:
    """One batch of outer-variable representations.

    fine1 is present only in antithetic-triple mode; coarse only in
    coupled-pair or antithetic-triple mode. cost is the total number of
    Gaussian draws spent on the whole batch.
    """

    fine0: Any
    fine1: Any = None
    coarse: Any = None
    cost: int = 0


@dataclass
class CorrectionSample:
    """A batch of multilevel correction realisations with their exact cost."""

    values: np.ndarray
    cost: int

    @property
    def value(self) -> float:
        if self.values.size != 1:
            raise ValueError("scalar access on a batch of size != 1")
        return float(self.values[0])


@dataclass
class InnerSchedule:
    """Geometric inner sample schedule M_{l,k} = max{m00 * 2^(l - zeta*k), 1}."""

    m00: int = 16
    zeta: float = 1.0

    def __post_init__(self):
        if self.m00 < 1:
            raise ValueError("m00 must be a positive integer")
        if self.zeta < 1.0:
            raise ValueError("zeta must be >= 1")

    def size(self, level: int, k: int) -> int:
        if not 0 <= k <= level:
            raise ValueError(f"inner level k={k} outside [0, {level}]")
        return max(ceil(self.m00 * 2.0 ** (level - self.zeta * k)), 1)


def outer_chunk_limit(schedule: InnerSchedule, level: int,
                      row_budget: int = 2**21) -> int:
    """Largest outer batch whose flattened inner sample block (at the widest
    inner level, k = 0) stays within the row budget; bounds peak memory."""
    widest = schedule.size(max(level, 1), 0)
    return max(1, row_budget // widest)


class NestedProblem:
    """Interface contract; concrete problems override the sampling methods.

    Contracts:
      * sample_dx draws conditionally independent inner corrections with
        E[dx_k | Y=y] = E[X_k - X_{k-1} | Y=y] (and E[dx_0] = E[X_0]), so the
        inner sums telescope: sum_k E[dx_k | y] = E[X_K | y].
      * When several y-representations are passed to sample_dx, every inner
        sample is evaluated at each representation from the same inner noise.
      * Reported costs equal the Gaussian draws consumed, counting shared
        (coupled) draws once.
    """

    supports_exact_x = False

    def sample_y(
        self, level: int, mode: str, stream: GaussianStream, n: int
    ) -> YBundle:
        raise NotImplementedError

    def payoff(self, y) -> np.ndarray:
        raise NotImplementedError

    def sample_dx(
        self, k: int, ys: Sequence[Any], m: int, stream: GaussianStream
    ) -> tuple[list[np.ndarray], int]:
        """Mean of m inner correction samples at each y-representation.

        Returns one (n,) array per representation plus the total cost.
        """
        raise NotImplementedError

    def sample_x_mean(
        self, level: int | None, y, m: int, stream: GaussianStream
    ) -> tuple[np.ndarray, int]:
        """Mean of m direct X samples at approximation level `level`.

        level=None requests exact X samples (supported only when
        supports_exact_x is True).
        """
        raise NotImplementedError

"""Discrete synthetic nested problems with exactly enumerable ground truth.

Outcomes of the outer variable and of the conditional inner variable live in
finite tables, so the target nested expectation (and its value under any
finite approximation level) can be computed exactly by enumeration. Level
effects are modelled by deterministic geometric perturbations:

  * the level-l outer representation shifts the outcome coordinate by
    delta_y * 2^-l * (d_i + kappa * xi) with an independent random sign xi,
    and scales conditional values by s = 1 + gamma * (coord - y_i); the
    antithetic outer triple flips xi between the two fine copies, so each is
    marginally a level-l outer sample while their average matches the coarse
    one to first order;
  * the level-k inner approximation carries bias delta_x * 2^-k * b_i and
    correction noise of scale c_x * 2^(-beta2*k/2), so the inner correction
    variance decays at the configurable rate beta2.

These problems serve as oracles for every estimator family: empirical
correction means must converge to differences of exactly enumerated level
values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .problems import (
    CapabilityError,
    NestedProblem,
    Y_COUPLED,
    Y_EXACT,
    Y_SINGLE,
    Y_TRIPLE,
    YBundle,
)
from .randomness import GaussianStream


@dataclass
class PayoffSpec:
    """pi(y) = const + lin * y + hinge_coef * max(strike - y, 0)."""

    const: float = 0.0
    lin: float = 0.0
    hinge_coef: float = 0.0
    strike: float = 0.0

    def __call__(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return (self.const + self.lin * y
                + self.hinge_coef * np.maximum(self.strike - y, 0.0))

    def to_dict(self) -> dict:
        return {"const": self.const, "lin": self.lin,
                "hinge_coef": self.hinge_coef, "strike": self.strike}


@dataclass
class DiscreteNestedSpec:
    """Finite nested problem: outer outcomes, conditional tables, payoff,
    and geometric level-perturbation parameters."""

    y_values: np.ndarray
    y_probs: np.ndarray
    x_values: list  # one array of conditional outcomes per outer outcome
    x_probs: list
    payoff: PayoffSpec = field(default_factory=PayoffSpec)
    delta_x: float = 0.0   # inner bias magnitude
    delta_y: float = 0.0   # outer shift magnitude
    beta2: float = 2.0     # inner correction variance decay rate
    c_x: float = 1.0       # inner correction noise scale
    gamma: float = 0.0     # sensitivity of conditional values to outer shifts
    kappa: float = 1.0     # random-sign spread of the outer perturbation
    bias_dir: np.ndarray | None = None  # b_i, defaults to all ones
    y_dir: np.ndarray | None = None     # d_i, defaults to all ones
    break_coupling: bool = False  # negative-control: coarse at the wrong level

    def __post_init__(self):
        self.y_values = np.asarray(self.y_values, dtype=float)
        self.y_probs = np.asarray(self.y_probs, dtype=float)
        if not np.isclose(self.y_probs.sum(), 1.0):
            raise ValueError("outer probabilities must sum to 1")
        self.x_values = [np.asarray(v, dtype=float) for v in self.x_values]
        self.x_probs = [np.asarray(p, dtype=float) for p in self.x_probs]
        for p in self.x_probs:
            if not np.isclose(p.sum(), 1.0):
                raise ValueError("conditional probabilities must sum to 1")
        if self.bias_dir is None:
            self.bias_dir = np.ones_like(self.y_values)
        else:
            self.bias_dir = np.asarray(self.bias_dir, dtype=float)
        if self.y_dir is None:
            self.y_dir = np.ones_like(self.y_values)
        else:
            self.y_dir = np.asarray(self.y_dir, dtype=float)

    @property
    def conditional_means(self) -> np.ndarray:
        return np.array([float(np.dot(v, p))
                         for v, p in zip(self.x_values, self.x_probs)])

    def to_dict(self) -> dict:
        return {
            "y_values": self.y_values.tolist(),
            "y_probs": self.y_probs.tolist(),
            "x_values": [v.tolist() for v in self.x_values],
            "x_probs": [p.tolist() for p in self.x_probs],
            "payoff": self.payoff.to_dict(),
            "delta_x": self.delta_x,
            "delta_y": self.delta_y,
            "beta2": self.beta2,
            "c_x": self.c_x,
            "gamma": self.gamma,
            "kappa": self.kappa,
            "bias_dir": self.bias_dir.tolist(),
            "y_dir": self.y_dir.tolist(),
            "break_coupling": self.break_coupling,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DiscreteNestedSpec":
        d = dict(d)
        d["payoff"] = PayoffSpec(**d.get("payoff", {}))
        return cls(**d)


def oracle_u0(spec: DiscreteNestedSpec) -> float:
    """Exact U0 = sum_y p(y) max{E[X|y], pi(y)} at the unperturbed limit."""
    means = spec.conditional_means
    pi = spec.payoff(spec.y_values)
    return float(np.dot(spec.y_probs, np.maximum(means, pi)))


def oracle_level_value(spec: DiscreteNestedSpec, level: int) -> float:
    """Exact value with both outer and inner approximations at `level`,
    averaged over the random perturbation sign."""
    total = 0.0
    for xi in (-1.0, 1.0):
        shift = spec.delta_y * 2.0 ** (-level) * (spec.y_dir + spec.kappa * xi)
        coord = spec.y_values + shift
        s = 1.0 + spec.gamma * shift
        inner = s * (spec.conditional_means
                     + spec.delta_x * 2.0 ** (-level) * spec.bias_dir)
        pi = spec.payoff(coord)
        total += 0.5 * float(np.dot(spec.y_probs, np.maximum(inner, pi)))
    return total


class DiscreteNestedProblem(NestedProblem):
    """NestedProblem adapter over a DiscreteNestedSpec.

    A y-representation is a pair (outcome indices, perturbed coordinates).
    Costs are synthetic and mirror path-simulation pricing: an inner sample
    at level k costs 2^k units, an approximate outer sample at level l costs
    2^l (exact outer samples cost 1).
    """

    supports_exact_x = True

    def __init__(self, spec: DiscreteNestedSpec):
        self.spec = spec
        self._xcum = [np.cumsum(p) for p in spec.x_probs]
        self._ycum = np.cumsum(spec.y_probs)

    # -- outer sampling ------------------------------------------------

    def _draw_idx(self, stream: GaussianStream, n: int) -> np.ndarray:
        u = stream.uniforms(n)
        return np.searchsorted(self._ycum, u, side="right").clip(
            0, len(self.spec.y_values) - 1)

    def sample_y(self, level: int, mode: str, stream: GaussianStream,
                 n: int) -> YBundle:
        spec = self.spec
        idx = self._draw_idx(stream, n)
        base = spec.y_values[idx]
        d = spec.y_dir[idx]
        if mode == Y_EXACT:
            return YBundle(fine0=(idx, base), cost=n)
        xi = np.where(stream.uniforms(n) < 0.5, -1.0, 1.0)
        scale = spec.delta_y * 2.0 ** (-level)

        def coord(sign):
            return base + scale * (d + spec.kappa * sign)

        if mode == Y_SINGLE:
            return YBundle(fine0=(idx, coord(xi)), cost=n * 2**level)
        if level < 1:
            raise ValueError("coupled outer sampling needs level >= 1")
        # Coarse representation: same outcome and sign at level l-1; the
        # broken-coupling negative control leaves it at level l, distorting
        # the coarse marginal so partial sums no longer telescope.
        clevel = level if spec.break_coupling else level - 1
        cshift = spec.delta_y * 2.0 ** (-clevel) * (d + spec.kappa * xi)
        coarse = (idx, base + cshift)
        if mode == Y_COUPLED:
            return YBundle(fine0=(idx, coord(xi)), coarse=coarse,
                           cost=n * 2**level)
        if mode == Y_TRIPLE:
            return YBundle(fine0=(idx, coord(xi)), fine1=(idx, coord(-xi)),
                           coarse=coarse, cost=n * 2**level)
        raise CapabilityError(f"unsupported outer mode {mode!r}")

    def payoff(self, y) -> np.ndarray:
        _, coord = y
        return self.spec.payoff(coord)

    # -- inner sampling ------------------------------------------------

    def _scale(self, y) -> np.ndarray:
        idx, coord = y
        return 1.0 + self.spec.gamma * (coord - self.spec.y_values[idx])

    def _draw_x(self, idx: np.ndarray, m: int,
                stream: GaussianStream) -> np.ndarray:
        """m conditional table draws (with replacement) per outer sample."""
        u = stream.uniforms((idx.size, m))
        out = np.empty_like(u)
        for j in range(len(self.spec.y_values)):
            rows = idx == j
            if not rows.any():
                continue
            pos = np.searchsorted(self._xcum[j], u[rows], side="right")
            out[rows] = self.spec.x_values[j][
                pos.clip(0, len(self.spec.x_values[j]) - 1)]
        return out

    def sample_dx(self, k: int, ys, m: int,
                  stream: GaussianStream) -> tuple[list[np.ndarray], int]:
        spec = self.spec
        idx = ys[0][0]
        n = idx.size
        if k == 0:
            x = self._draw_x(idx, m, stream)
            core = x.mean(axis=1) + spec.delta_x * spec.bias_dir[idx]
        else:
            noise = stream.normals((n, m)).mean(axis=1)
            core = (-spec.delta_x * 2.0 ** (-k) * spec.bias_dir[idx]
                    + spec.c_x * 2.0 ** (-spec.beta2 * k / 2.0) * noise)
        values = [self._scale(y) * core for y in ys]
        return values, n * m * 2**k

    def sample_x_mean(self, level, y, m: int,
                      stream: GaussianStream) -> tuple[np.ndarray, int]:
        spec = self.spec
        idx, _ = y
        x = self._draw_x(idx, m, stream).mean(axis=1)
        if level is None:
            return self._scale(y) * x, idx.size * m
        bias = spec.delta_x * 2.0 ** (-level) * spec.bias_dir[idx]
        return self._scale(y) * (x + bias), idx.size * m * 2**level

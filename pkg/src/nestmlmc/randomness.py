"""Deterministic, hierarchically splittable Gaussian streams.

Every random quantity in the engine is drawn from a stream identified by a
(seed, key-path) pair, where the key path is a tuple of non-negative integers
such as (level, chunk, role, inner-level). Distinct paths give statistically
independent streams; the same (seed, path) always replays the identical
sequence. Streams also count how many standard normals they have produced,
which is the engine's cost unit.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

# Reserved role index appended to a key path when a coupled construction needs
# a nominally separate "antithetic partner" stream. Couplings in this package
# build the partner from permutations of one stream's draws, so the index is
# reserved but normally unused.
ANTITHETIC_ROLE = 1

StreamKey = tuple[int, ...]


class DrawRecorder:
    """Tallies every Gaussian drawn through streams attached to it.

    Used in tests to check that estimator-reported costs equal the true
    number of draws consumed.
    """

    def __init__(self):
        self.total = 0
        self._lock = threading.Lock()

    def add(self, n: int):
        with self._lock:
            self.total += int(n)


@dataclass
class GaussianStream:
    """A counter-based N(0,1) stream addressed by (seed, key path)."""

    seed: int
    path: StreamKey
    count: int = 0
    recorder: DrawRecorder | None = None
    _gen: Generator | None = field(default=None, repr=False)

    def _generator(self) -> Generator:
        if self._gen is None:
            ss = SeedSequence(self.seed, spawn_key=tuple(self.path))
            self._gen = Generator(Philox(ss))
        return self._gen

    def normals(self, shape) -> np.ndarray:
        """Draw standard normals of the given shape, incrementing the count."""
        out = self._generator().standard_normal(shape)
        self.count += out.size
        if self.recorder is not None:
            self.recorder.add(out.size)
        return out

    def next_gaussian(self) -> float:
        return float(self.normals(()))

    def uniforms(self, shape) -> np.ndarray:
        """Uniform(0,1) draws for categorical sampling; not counted as cost."""
        return self._generator().random(shape)

    def child(self, *indices: int) -> "GaussianStream":
        """Derive an independent stream by extending the key path."""
        return GaussianStream(
            self.seed, tuple(self.path) + tuple(int(i) for i in indices),
            recorder=self.recorder,
        )


def derive_stream(
    seed: int, path, recorder: DrawRecorder | None = None
) -> GaussianStream:
    """Stream for the given 64-bit seed and key path."""
    path = tuple(int(i) for i in path)
    if any(i < 0 for i in path):
        raise ValueError(f"stream key path must be non-negative: {path}")
    return GaussianStream(seed, path, recorder=recorder)

"""Seedable random source for token delays and model parameters."""

from __future__ import annotations

import math
import random

from .net import ParameterError

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """SplitMix64 finalizer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def split_seed(master: int, index: int) -> int:
    """Derive the seed of stream ``index`` from a master seed.

    ``mix64(master + (index + 1) * golden_gamma)`` modulo 2**64, the SplitMix64
    step, so neighbouring indices give uncorrelated seeds.
    """
    if index < 0:
        raise ParameterError("stream index must be >= 0")
    return mix64((master & MASK64) + (index + 1) * GOLDEN_GAMMA)


def exponential_from_uniform(u: float, mean: float) -> int:
    """Inverse transform of u in (0, 1] to an integer-microsecond delay."""
    if mean <= 0:
        raise ParameterError(f"exponential mean must be > 0, got {mean}")
    if not 0.0 < u <= 1.0:
        raise ParameterError(f"uniform variate must lie in (0, 1], got {u}")
    return round(-mean * math.log(u))


class StochasticSource:
    """Independent generator state per simulation run; no module globals."""

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self._rng = random.Random(self.seed)

    def uniform01(self) -> float:
        """Uniform variate in (0, 1]."""
        return 1.0 - self._rng.random()

    def exponential(self, mean: float) -> int:
        if mean <= 0:
            raise ParameterError(f"exponential mean must be > 0, got {mean}")
        return round(-mean * math.log(1.0 - self._rng.random()))

    def uniform(self, lo: float, hi: float) -> float:
        if lo > hi:
            raise ParameterError(f"empty interval [{lo}, {hi}]")
        if lo == hi:
            return lo
        return lo + (hi - lo) * self._rng.random()

    def index(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n < 1:
            raise ParameterError(f"cannot pick from {n} items")
        return self._rng.randrange(n)


def sample_exponential(source: StochasticSource, mean: float) -> int:
    return source.exponential(mean)


def sample_uniform(source: StochasticSource, lo: float, hi: float) -> float:
    return source.uniform(lo, hi)

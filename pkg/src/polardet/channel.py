"""BPSK over AWGN with Eb/N0 normalized by the information rate.

Randomness comes from numpy's PCG64 bit generator; Gaussian samples use
numpy's ziggurat ``standard_normal``. Per-unit streams are derived with
``numpy.random.SeedSequence([root_seed, *index])``, which hashes all
words together, so a work unit's noise depends only on the root seed and
its own index, never on scheduling or the number of workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# LLR magnitude used when the channel is noiseless (Eb/N0 = +inf).
NOISELESS_LLR = 32.0


@dataclass(frozen=True)
class ChannelParams:
    ebn0_db: float
    r_inf: float

    def __post_init__(self):
        if not self.r_inf > 0:
            raise ValueError("r_inf must be positive")
        if math.isnan(self.ebn0_db):
            raise ValueError("ebn0_db is NaN")

    @property
    def noiseless(self) -> bool:
        return math.isinf(self.ebn0_db) and self.ebn0_db > 0

    @property
    def sigma2(self) -> float:
        """Noise variance per real dimension, ``1 / (2 R_inf Eb/N0)``."""
        if self.noiseless:
            return 0.0
        return 1.0 / (2.0 * self.r_inf * 10.0 ** (self.ebn0_db / 10.0))


def rng_for(root_seed: int, *index: int) -> np.random.Generator:
    """Independent generator for the work unit named by ``index`` under ``root_seed``."""
    words = [int(root_seed), *(int(i) for i in index)]
    if min(words) < 0:
        raise ValueError("seed words must be nonnegative")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(words)))


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def modulate_and_corrupt(x: np.ndarray, params: ChannelParams, rng: np.random.Generator) -> np.ndarray:
    """BPSK-map bits (0 -> +1, 1 -> -1), add noise and return channel LLRs ``2y/sigma2``."""
    s = 1.0 - 2.0 * np.asarray(x, dtype=np.float64)
    if params.noiseless:
        return s * NOISELESS_LLR
    sigma2 = params.sigma2
    y = s + math.sqrt(sigma2) * rng.standard_normal(s.shape)
    return 2.0 * y / sigma2


def transmit(x, params: ChannelParams, rng_seed) -> np.ndarray:
    """Channel LLRs for codeword(s) ``x``; deterministic for a fixed seed."""
    return modulate_and_corrupt(x, params, _as_rng(rng_seed))


def random_filler_block(N: int, params: ChannelParams, rng_seed, count: int | None = None) -> np.ndarray:
    """LLRs of i.i.d. uniform bits sent through the same channel."""
    rng = _as_rng(rng_seed)
    shape = (N,) if count is None else (count, N)
    bits = rng.integers(0, 2, size=shape, dtype=np.uint8)
    return modulate_and_corrupt(bits, params, rng)

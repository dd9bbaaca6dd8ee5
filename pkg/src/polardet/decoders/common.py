"""Min-sum kernel functions shared by the SC-family decoders."""

import numpy as np


def f_minsum(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Check-node update ``sign(a) sign(b) min(|a|, |b|)``."""
    return np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))


def g_update(a: np.ndarray, b: np.ndarray, bit: np.ndarray) -> np.ndarray:
    """Variable-node update ``b + (1 - 2 bit) a``."""
    return np.where(bit.astype(bool), b - a, b + a)


def hard_decision(llr: np.ndarray) -> np.ndarray:
    """0 where the LLR is nonnegative, 1 otherwise."""
    return (np.asarray(llr) < 0).astype(np.uint8)

"""Successive-cancellation decoding, vectorized over a batch of blocks."""

from __future__ import annotations

import numpy as np

from ..polar_core import PolarCode
from .common import f_minsum, g_update


def _sc_node(alpha, start, frozen, u_out, alpha_out):
    size = alpha.shape[-1]
    if size == 1:
        a = alpha[:, 0]
        alpha_out[:, start] = a
        if frozen[start]:
            bit = np.zeros(a.shape, dtype=np.uint8)
        else:
            bit = (a < 0).astype(np.uint8)
        u_out[:, start] = bit
        return bit[:, None]
    h = size // 2
    a1, a2 = alpha[:, :h], alpha[:, h:]
    left = _sc_node(f_minsum(a1, a2), start, frozen, u_out, alpha_out)
    right = _sc_node(g_update(a1, a2, left), start + h, frozen, u_out, alpha_out)
    return np.concatenate([left ^ right, right], axis=1)


def sc_decode(code: PolarCode, llrs, return_llrs: bool = False):
    """SC decoding with the min-sum check-node rule.

    ``llrs`` may be a single length-N vector or a ``(batch, N)`` array.
    Returns the estimated u-vector(s); with ``return_llrs`` also the
    decision LLRs at every bit position.
    """
    llrs = np.asarray(llrs, dtype=np.float64)
    single = llrs.ndim == 1
    alpha = llrs[None, :] if single else llrs
    if alpha.shape[-1] != code.N:
        raise ValueError(f"expected {code.N} LLRs per block")
    u = np.zeros(alpha.shape, dtype=np.uint8)
    dec = np.zeros(alpha.shape, dtype=np.float64)
    _sc_node(alpha, 0, code.frozen_mask, u, dec)
    if single:
        u, dec = u[0], dec[0]
    return (u, dec) if return_llrs else u

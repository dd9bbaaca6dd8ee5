"""LLR-based successive-cancellation list decoding, optionally CRC-aided.

The decoder recurses over the polar tree for a whole batch at once with
arrays of shape ``(batch, L, size)``. Whenever a leaf reorders the list,
the permutation is handed back up the recursion so each caller can
realign the LLRs and partial sums it still holds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..polar_core import CRC_BITS, PolarCode, crc16_generator_matrix
from .common import f_minsum, g_update


@dataclass
class SclResult:
    """Batch SCL output.

    ``u_hat`` is the selected path per block, ``valid`` whether a path was
    selected (always True without CRC), ``metric`` its path metric, and
    ``list_u``/``list_metrics`` the final list sorted by metric.
    """

    u_hat: np.ndarray
    valid: np.ndarray
    metric: np.ndarray
    list_u: np.ndarray
    list_metrics: np.ndarray


class _ListState:
    def __init__(self, code: PolarCode, batch: int, L: int):
        self.frozen = code.frozen_mask
        self.L = L
        self.pm = np.full((batch, L), np.inf)
        self.pm[:, 0] = 0.0
        self.info_pos = {int(i): j for j, i in enumerate(code.info_set)}
        self.bits = np.zeros((batch, L, len(self.info_pos)), dtype=np.uint8)
        self.rows = np.arange(batch)[:, None]


def _gather(arr, perm, rows):
    return arr[rows, perm]


def _scl_node(alpha, start, st: _ListState):
    size = alpha.shape[-1]
    batch, L = alpha.shape[0], alpha.shape[1]
    if size == 1:
        a = alpha[..., 0]
        if st.frozen[start]:
            st.pm = st.pm + np.where(a < 0, np.abs(a), 0.0)
            return np.zeros((batch, L, 1), dtype=np.uint8), None
        pen = np.abs(a)
        cand = np.empty((batch, 2 * L))
        cand[:, 0::2] = st.pm + np.where(a < 0, pen, 0.0)
        cand[:, 1::2] = st.pm + np.where(a >= 0, pen, 0.0)
        keep = np.argsort(cand, axis=1, kind="stable")[:, :L]
        parent = keep // 2
        bit = (keep % 2).astype(np.uint8)
        st.pm = np.take_along_axis(cand, keep, axis=1)
        col = st.info_pos[start]
        st.bits = _gather(st.bits, parent, st.rows)
        st.bits[:, :, col] = bit
        return bit[..., None], parent
    h = size // 2
    a1, a2 = alpha[..., :h], alpha[..., h:]
    left, p1 = _scl_node(f_minsum(a1, a2), start, st)
    if p1 is not None:
        a1 = _gather(a1, p1, st.rows)
        a2 = _gather(a2, p1, st.rows)
    right, p2 = _scl_node(g_update(a1, a2, left), start + h, st)
    if p2 is not None:
        left = _gather(left, p2, st.rows)
    if p1 is None:
        perm = p2
    elif p2 is None:
        perm = p1
    else:
        perm = np.take_along_axis(p1, p2, axis=1)
    return np.concatenate([left ^ right, right], axis=-1), perm


def scl_decode_batch(code: PolarCode, llrs, L: int, use_crc: bool) -> SclResult:
    """SCL decode a ``(batch, N)`` LLR array.

    Path metrics grow by ``|alpha|`` whenever a decision opposes the LLR
    sign. Pruning keeps the ``L`` best extensions with a stable sort, so
    equal metrics favor the lower path index and bit 0.
    """
    if L < 1:
        raise ValueError("list size must be >= 1")
    if use_crc and code.C != CRC_BITS:
        raise ValueError("CRC-aided decoding needs C == 16")
    llrs = np.atleast_2d(np.asarray(llrs, dtype=np.float64))
    batch = llrs.shape[0]
    st = _ListState(code, batch, L)
    alpha = np.broadcast_to(llrs[:, None, :], (batch, L, code.N))
    _scl_node(alpha, 0, st)

    order = np.argsort(st.pm, axis=1, kind="stable")
    pm = np.take_along_axis(st.pm, order, axis=1)
    msgs = _gather(st.bits, order, st.rows)
    ok = np.isfinite(pm)
    if use_crc:
        data = msgs[..., :code.K].astype(np.int64)
        crc = data @ crc16_generator_matrix(code.K) % 2
        ok &= np.all(crc == msgs[..., code.K:], axis=-1)
    valid = ok.any(axis=1)
    pick = np.argmax(ok, axis=1)
    list_u = np.zeros((batch, L, code.N), dtype=np.uint8)
    list_u[..., code.info_set] = msgs
    u_hat = list_u[np.arange(batch), pick]
    metric = np.where(valid, pm[np.arange(batch), pick], np.inf)
    return SclResult(u_hat=u_hat, valid=valid, metric=metric, list_u=list_u, list_metrics=pm)


def scl_decode(code: PolarCode, llrs, L: int, use_crc: bool) -> np.ndarray | None:
    """Decode one block; ``None`` when CRC-aided decoding finds no passing path."""
    res = scl_decode_batch(code, np.asarray(llrs)[None, :], L, use_crc)
    return res.u_hat[0] if res.valid[0] else None

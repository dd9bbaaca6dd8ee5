"""Flooding scaled-min-sum belief propagation on the polar factor graph.

Messages live in ``(n + 1, N, batch)`` arrays. Column 0 is the
information side, column ``n`` the channel side; the processing elements
between columns ``s`` and ``s + 1`` pair positions ``j`` and ``j + 2**s``.
``L`` carries right-to-left messages and ``R`` left-to-right ones.

One iteration runs the right-to-left pass from the channel side down to
column 0, then the left-to-right pass back up. Every processing element
of a stage updates at once from the messages left by the previous stage
and the previous iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ..polar_core import PolarCode, polar_transform

SCALE = 0.9375
SAT = 1.0e6
# no contraction or reassociation: results must not depend on batch position
_FM = {"nnan", "ninf", "nsz"}


@njit(cache=True, fastmath=_FM)
def _f(a, b, scale):
    m = min(abs(a), abs(b))
    return scale * (m if (a < 0) == (b < 0) else -m)


@njit(cache=True, fastmath=_FM)
def _clamp(v, sat):
    return min(max(v, -sat), sat)


@njit(cache=True, fastmath=_FM)
def _bp_iteration(L, R, n, scale, sat):
    N = L.shape[1]
    nb = L.shape[2]
    for s in range(n - 1, -1, -1):
        h = 1 << s
        for base in range(0, N, 2 * h):
            for a in range(base, base + h):
                b = a + h
                for k in range(nb):
                    l1a = L[s + 1, a, k]
                    l1b = L[s + 1, b, k]
                    r0a = R[s, a, k]
                    r0b = R[s, b, k]
                    L[s, a, k] = _clamp(_f(l1a, l1b + r0b, scale), sat)
                    L[s, b, k] = _clamp(_f(r0a, l1a, scale) + l1b, sat)
    for s in range(n):
        h = 1 << s
        for base in range(0, N, 2 * h):
            for a in range(base, base + h):
                b = a + h
                for k in range(nb):
                    l1a = L[s + 1, a, k]
                    l1b = L[s + 1, b, k]
                    r0a = R[s, a, k]
                    r0b = R[s, b, k]
                    R[s + 1, a, k] = _clamp(_f(r0a, l1b + r0b, scale), sat)
                    R[s + 1, b, k] = _clamp(_f(r0a, l1a, scale) + r0b, sat)


@njit(cache=True)
def _bp_run_metrics(L, R, n, I_max, frozen, scale, sat, ls_out, fs_out, re_out, u_out, x_out):
    """Run ``I_max`` iterations, recording the three sign-based metrics after each.

    ``ls_out[0]`` is left at -1 (undefined at the first iteration).
    """
    N = L.shape[1]
    nb = L.shape[2]
    prev = np.zeros((N, nb), dtype=np.bool_)
    xt = np.zeros((N, nb), dtype=np.uint8)
    for it in range(I_max):
        _bp_iteration(L, R, n, scale, sat)
        for k in range(nb):
            ls_out[it, k] = 0 if it > 0 else -1
            fs_out[it, k] = 0
            re_out[it, k] = 0
        for i in range(N):
            fz = frozen[i]
            for k in range(nb):
                alpha = L[0, i, k]
                nonneg = alpha >= 0
                if it > 0 and nonneg == prev[i, k]:
                    ls_out[it, k] += 1
                prev[i, k] = nonneg
                if fz:
                    if nonneg:
                        fs_out[it, k] += 1
                    xt[i, k] = 0
                else:
                    xt[i, k] = 0 if nonneg else 1
        for k in range(nb):
            for i in range(N):
                u_out[k, i] = xt[i, k]
        # re-encode the u decisions in place
        h = 1
        while h < N:
            for base in range(0, N, 2 * h):
                for a in range(base, base + h):
                    for k in range(nb):
                        xt[a, k] ^= xt[a + h, k]
            h *= 2
        for i in range(N):
            for k in range(nb):
                xh = 0 if L[n, i, k] + R[n, i, k] >= 0 else 1
                x_out[k, i] = xh
                if xh == xt[i, k]:
                    re_out[it, k] += 1


def init_messages(code: PolarCode, llrs: np.ndarray, dtype=np.float64, sat: float = SAT):
    """Fresh ``(L, R)`` message arrays for a ``(batch, N)`` LLR array."""
    llrs = np.atleast_2d(llrs)
    nb, N = llrs.shape
    if N != code.N:
        raise ValueError(f"expected {code.N} LLRs per block")
    L = np.zeros((code.n + 1, N, nb), dtype=dtype)
    R = np.zeros((code.n + 1, N, nb), dtype=dtype)
    L[code.n] = np.clip(llrs, -sat, sat).T
    R[0, code.frozen_mask, :] = sat
    return L, R


@dataclass
class BpMetrics:
    """Per-iteration detection metrics for a batch; row ``I - 1`` holds iteration ``I``."""

    ls: np.ndarray
    fs: np.ndarray
    re: np.ndarray
    u_hat: np.ndarray
    x_hat: np.ndarray


def bp_run_metrics(code: PolarCode, llrs, I_max: int, dtype=np.float32,
                   scale: float = SCALE, sat: float = SAT) -> BpMetrics:
    """Batch BP recording the LS/FS/RE detection metrics after every iteration.

    ``u_hat``/``x_hat`` are the decisions after the last iteration.
    """
    if I_max < 1:
        raise ValueError("I_max must be >= 1")
    llrs = np.atleast_2d(np.asarray(llrs))
    L, R = init_messages(code, llrs, dtype, sat)
    nb = llrs.shape[0]
    ls = np.empty((I_max, nb), dtype=np.int32)
    fs = np.empty((I_max, nb), dtype=np.int32)
    re = np.empty((I_max, nb), dtype=np.int32)
    u = np.empty((nb, code.N), dtype=np.uint8)
    x = np.empty((nb, code.N), dtype=np.uint8)
    _bp_run_metrics(L, R, code.n, I_max, code.frozen_mask, dtype(scale), dtype(sat),
                    ls, fs, re, u, x)
    return BpMetrics(ls=ls, fs=fs, re=re, u_hat=u, x_hat=x)


@dataclass
class BpState:
    """BP messages and decision LLRs of one block after ``iteration`` iterations."""

    code: PolarCode
    left_msgs: np.ndarray
    right_msgs: np.ndarray
    iteration: int
    alpha: np.ndarray
    beta: np.ndarray
    alpha_prev: np.ndarray | None = None
    scale: float = SCALE
    sat: float = SAT

    def copy(self) -> "BpState":
        return BpState(self.code, self.left_msgs.copy(), self.right_msgs.copy(), self.iteration,
                       self.alpha.copy(), self.beta.copy(),
                       None if self.alpha_prev is None else self.alpha_prev.copy(),
                       self.scale, self.sat)


def bp_init(code: PolarCode, llrs, scale: float = SCALE, sat: float = SAT) -> BpState:
    llrs = np.asarray(llrs, dtype=np.float64)
    if llrs.shape != (code.N,):
        raise ValueError(f"expected a single block of {code.N} LLRs")
    L, R = init_messages(code, llrs[None, :], np.float64, sat)
    return BpState(code, L[:, :, 0], R[:, :, 0], 0,
                   alpha=np.zeros(code.N), beta=llrs.copy(), scale=scale, sat=sat)


def bp_iterate(state: BpState) -> BpState:
    """One flooding iteration; returns a new state and leaves the input untouched.

    ``alpha`` at frozen positions is the extrinsic right-to-left message
    (the frozen prior is not added); ``beta`` is channel plus extrinsic.
    """
    new = state.copy()
    L = new.left_msgs[:, :, None]
    R = new.right_msgs[:, :, None]
    _bp_iteration(L, R, new.code.n, new.scale, new.sat)
    n = new.code.n
    new.alpha_prev = state.alpha.copy() if state.iteration >= 1 else None
    new.alpha = L[0, :, 0].copy()
    new.beta = L[n, :, 0] + R[n, :, 0]
    new.iteration = state.iteration + 1
    return new


def decide_u(code: PolarCode, alpha) -> np.ndarray:
    """u decisions from decision LLRs, frozen positions forced to zero."""
    u = (np.asarray(alpha) < 0).astype(np.uint8)
    u[..., code.frozen_mask] = 0
    return u


def decide_x(beta) -> np.ndarray:
    return (np.asarray(beta) < 0).astype(np.uint8)


def bp_decode(code: PolarCode, llrs, I_max: int):
    """Run ``I_max`` iterations and return ``(u_hat, x_hat, state)``."""
    if I_max < 1:
        raise ValueError("I_max must be >= 1")
    state = bp_init(code, llrs)
    for _ in range(I_max):
        state = bp_iterate(state)
    return decide_u(code, state.alpha), decide_x(state.beta), state


def bp_decode_batch(code: PolarCode, llrs, I_max: int, dtype=np.float32) -> np.ndarray:
    """u estimates for a ``(batch, N)`` LLR array after ``I_max`` iterations."""
    if I_max < 1:
        raise ValueError("I_max must be >= 1")
    L, R = init_messages(code, np.atleast_2d(llrs), dtype)
    for _ in range(I_max):
        _bp_iteration(L, R, code.n, dtype(SCALE), dtype(SAT))
    return decide_u(code, L[0].T)


def reencode(u: np.ndarray) -> np.ndarray:
    return polar_transform(u)

"""First-stage detection metrics and candidate ranking.

All metrics are oriented so that larger values look more like a codeword
of the expected polar code.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .decoders.bp import BpState, bp_run_metrics, decide_u, decide_x
from .decoders.fastssc import FastSscTree, run_fastssc
from .polar_core import PolarCode, polar_transform


class Method(str, enum.Enum):
    LS = "ls"  # decision-LLR sign stability between iterations
    FS = "fs"  # nonnegative frozen-bit decision LLRs
    RE = "re"  # agreement of re-encoded u decisions with x decisions
    FASTSSC = "fastssc"

    @property
    def min_effort(self) -> int:
        return 2 if self is Method.LS else 1


@dataclass(frozen=True)
class DetectionMetricValue:
    value: float
    effort: int
    method: Method


@dataclass(frozen=True)
class FastSscDetectorConfig:
    include_spc: bool = True
    t_max: int = 1

    def __post_init__(self):
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")


def _sign_nonneg(v):
    return np.asarray(v) >= 0


def metric_ls(state: BpState) -> DetectionMetricValue:
    """Number of decision-LLR signs unchanged since the previous iteration."""
    if state.iteration < 2 or state.alpha_prev is None:
        raise ValueError("sign tracking needs at least two BP iterations")
    same = _sign_nonneg(state.alpha) == _sign_nonneg(state.alpha_prev)
    return DetectionMetricValue(int(same.sum()), state.iteration, Method.LS)


def metric_fs(state: BpState, code: PolarCode) -> DetectionMetricValue:
    """Number of frozen positions whose extrinsic decision LLR is nonnegative."""
    if state.iteration < 1:
        raise ValueError("run at least one BP iteration first")
    value = int(_sign_nonneg(state.alpha[code.frozen_set]).sum())
    return DetectionMetricValue(value, state.iteration, Method.FS)


def metric_re(state: BpState, code: PolarCode) -> DetectionMetricValue:
    """Positions where the re-encoded u decisions agree with the x decisions."""
    if state.iteration < 1:
        raise ValueError("run at least one BP iteration first")
    x_tilde = polar_transform(decide_u(code, state.alpha))
    x_hat = decide_x(state.beta)
    return DetectionMetricValue(int((x_tilde == x_hat).sum()), state.iteration, Method.RE)


def fastssc_detect(tree: FastSscTree, llrs, cfg: FastSscDetectorConfig) -> DetectionMetricValue:
    """Staged Fast-SSC metric after ``cfg.t_max`` contributing leaves.

    Leaves are visited in decoding order. Per leaf of length ``Nv`` with
    input LLRs ``a``: rate-0 adds ``sum(a) / Nv``, repetition adds
    ``|sum(a)| / Nv`` and SPC (when included) adds ``(1 - 2p) min|a|``
    with ``p`` the parity of the hard decisions. Rate-1 leaves neither
    change the metric nor count as a visit. If fewer than ``t_max``
    contributing leaves exist, the full-traversal value is returned with
    the actual count as effort.
    """
    _, _, traj = run_fastssc(tree, np.asarray(llrs)[None, :], cfg.include_spc)
    T = traj.shape[1]
    if T == 0:
        return DetectionMetricValue(0.0, 0, Method.FASTSSC)
    t = min(cfg.t_max, T)
    return DetectionMetricValue(float(traj[0, t - 1]), t, Method.FASTSSC)


def bp_metric_table(code: PolarCode, llrs, I_max: int) -> dict[Method, np.ndarray]:
    """LS/FS/RE values for a ``(batch, N)`` array after each of ``I_max`` iterations.

    Each array has shape ``(I_max, batch)``; row ``I - 1`` is iteration ``I``.
    The LS row for ``I = 1`` is -1 (undefined).
    """
    m = bp_run_metrics(code, llrs, I_max)
    return {Method.LS: m.ls, Method.FS: m.fs, Method.RE: m.re}


def fastssc_metric_table(tree: FastSscTree, llrs, include_spc: bool) -> np.ndarray:
    """Metric trajectories of shape ``(T, batch)``; row ``t - 1`` is after ``t`` leaves."""
    _, _, traj = run_fastssc(tree, llrs, include_spc)
    return traj.T


def tie_permutation(M: int, tie_seed: int) -> np.ndarray:
    return np.random.default_rng(tie_seed).permutation(M)


def rank_candidates(metrics, B: int, tie_seed: int) -> list[int]:
    """Indices of the ``B`` candidates with the largest metric values, best first.

    The candidates are shuffled by a permutation drawn from ``tie_seed``
    before a stable descending sort, so ties are broken uniformly at
    random and retained sets are nested in ``B``.
    """
    values = []
    methods = set()
    for m in metrics:
        if isinstance(m, DetectionMetricValue):
            methods.add(m.method)
            values.append(m.value)
        else:
            values.append(float(m))
    if len(methods) > 1:
        raise ValueError("metric list mixes detection methods")
    M = len(values)
    if not 1 <= B <= M:
        raise ValueError(f"B must lie in [1, {M}]")
    perm = tie_permutation(M, tie_seed)
    v = np.asarray(values, dtype=np.float64)[perm]
    order = perm[np.argsort(-v, kind="stable")]
    return [int(i) for i in order[:B]]


def rank_of(values: np.ndarray, target: int, perm: np.ndarray) -> np.ndarray:
    """0-based position of ``target`` in the ranking of each row of ``values``.

    Equivalent to locating ``target`` in :func:`rank_candidates`'s order
    for the same permutation, without sorting. ``values`` is ``(E, M)``.
    """
    values = np.atleast_2d(values)
    vp = values[:, perm]
    q = int(np.flatnonzero(perm == target)[0])
    vt = vp[:, q:q + 1]
    ahead = (vp > vt).sum(axis=1) + (vp[:, :q] == vt).sum(axis=1)
    return ahead

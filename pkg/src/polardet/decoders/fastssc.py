"""Fast-SSC decoding over a tree of rate-0, rate-1, repetition and SPC leaves.

The tree is flattened into a linear op schedule executed by a numba
kernel. The same kernel accumulates the staged detection metric, so the
detector in :mod:`polardet.detection` reuses it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ..polar_core import PolarCode, polar_transform


class NodeKind(enum.IntEnum):
    RATE0 = 0
    RATE1 = 1
    REP = 2
    SPC = 3
    BRANCH = 4


@dataclass
class FastSscNode:
    start: int
    size: int
    kind: NodeKind
    children: tuple["FastSscNode", ...] = ()

    def leaves(self):
        if self.kind is NodeKind.BRANCH:
            for c in self.children:
                yield from c.leaves()
        else:
            yield self


@dataclass
class FastSscTree:
    code: PolarCode
    root: FastSscNode
    ops: np.ndarray = field(repr=False)

    def leaves(self) -> list[FastSscNode]:
        return list(self.root.leaves())

    def contributing_leaves(self, include_spc: bool = True) -> list[FastSscNode]:
        kinds = {NodeKind.RATE0, NodeKind.REP} | ({NodeKind.SPC} if include_spc else set())
        return [leaf for leaf in self.leaves() if leaf.kind in kinds]

    def n_contributing(self, include_spc: bool = True) -> int:
        return len(self.contributing_leaves(include_spc))


def classify_span(frozen: np.ndarray) -> NodeKind:
    """Leaf kind of a span given its frozen flags, or BRANCH if none matches."""
    if frozen.all():
        return NodeKind.RATE0
    if not frozen.any():
        return NodeKind.RATE1
    if frozen[:-1].all() and not frozen[-1]:
        return NodeKind.REP
    if frozen[0] and not frozen[1:].any():
        return NodeKind.SPC
    return NodeKind.BRANCH


_OP_F, _OP_G, _OP_LEAF, _OP_COMBINE = 0, 1, 2, 3


def fastssc_build_tree(code: PolarCode) -> FastSscTree:
    frozen = code.frozen_mask
    ops: list[tuple[int, int, int, int, int]] = []

    def build(start: int, size: int, depth: int) -> FastSscNode:
        kind = classify_span(frozen[start:start + size])
        if kind is not NodeKind.BRANCH:
            ops.append((_OP_LEAF, depth, start, size, int(kind)))
            return FastSscNode(start, size, kind)
        h = size // 2
        ops.append((_OP_F, depth, start, size, 0))
        left = build(start, h, depth + 1)
        ops.append((_OP_G, depth, start, size, 0))
        right = build(start + h, h, depth + 1)
        ops.append((_OP_COMBINE, depth, start, size, 0))
        return FastSscNode(start, size, NodeKind.BRANCH, (left, right))

    root = build(0, code.N, 0)
    return FastSscTree(code=code, root=root, ops=np.array(ops, dtype=np.int64))


@njit(cache=True)
def _pairwise_sum(a, size, scratch):
    # same summation tree as SC's chain of g-updates with zero partial sums
    for i in range(size):
        scratch[i] = a[i]
    m = size
    while m > 1:
        h = m // 2
        for i in range(h):
            scratch[i] = scratch[i] + scratch[i + h]
        m = h
    return scratch[0]


@njit(cache=True)
def _fastssc_kernel(llrs, ops, n, include_spc, x_out, traj_out):
    """Decode every row of ``llrs``; write codeword estimates and metric trajectories."""
    nb, N = llrs.shape
    A = np.empty((n + 1, N), dtype=np.float64)
    X = np.zeros((n + 1, N), dtype=np.uint8)
    scratch = np.empty(N, dtype=np.float64)
    n_ops = ops.shape[0]
    for k in range(nb):
        for i in range(N):
            A[0, i] = llrs[k, i]
        D = 0.0
        t = 0
        for o in range(n_ops):
            op = ops[o, 0]
            d = ops[o, 1]
            start = ops[o, 2]
            size = ops[o, 3]
            h = size // 2
            if op == 0:
                for i in range(h):
                    a = A[d, i]
                    b = A[d, i + h]
                    m = min(abs(a), abs(b))
                    if (a < 0) != (b < 0):
                        m = -m
                    if a == 0.0 or b == 0.0:
                        m = 0.0
                    A[d + 1, i] = m
            elif op == 1:
                for i in range(h):
                    if X[d + 1, start + i]:
                        A[d + 1, i] = A[d, i + h] - A[d, i]
                    else:
                        A[d + 1, i] = A[d, i + h] + A[d, i]
            elif op == 3:
                for i in range(h):
                    X[d, start + i] = X[d + 1, start + i] ^ X[d + 1, start + h + i]
                    X[d, start + h + i] = X[d + 1, start + h + i]
            else:
                kind = ops[o, 4]
                if kind == 0:
                    s = 0.0
                    for i in range(size):
                        X[d, start + i] = 0
                        s += A[d, i]
                    D += s / size
                    traj_out[k, t] = D
                    t += 1
                elif kind == 1:
                    for i in range(size):
                        X[d, start + i] = 1 if A[d, i] < 0 else 0
                elif kind == 2:
                    s = _pairwise_sum(A[d], size, scratch)
                    bit = 1 if s < 0 else 0
                    for i in range(size):
                        X[d, start + i] = bit
                    D += abs(s) / size
                    traj_out[k, t] = D
                    t += 1
                else:
                    parity = 0
                    imin = 0
                    amin = abs(A[d, 0])
                    for i in range(size):
                        bit = 1 if A[d, i] < 0 else 0
                        X[d, start + i] = bit
                        parity ^= bit
                        if abs(A[d, i]) < amin:
                            amin = abs(A[d, i])
                            imin = i
                    if parity:
                        X[d, start + imin] ^= 1
                    if include_spc:
                        D += (1.0 - 2.0 * parity) * amin
                        traj_out[k, t] = D
                        t += 1
        for i in range(N):
            x_out[k, i] = X[0, i]


def run_fastssc(tree: FastSscTree, llrs, include_spc: bool = True):
    """Batch Fast-SSC: returns ``(u_hat, x_hat, trajectory)``.

    ``trajectory[:, t-1]`` is the detection metric after ``t`` contributing
    leaves have been visited.
    """
    llrs = np.ascontiguousarray(np.atleast_2d(np.asarray(llrs, dtype=np.float64)))
    nb, N = llrs.shape
    if N != tree.code.N:
        raise ValueError(f"expected {tree.code.N} LLRs per block")
    T = tree.n_contributing(include_spc)
    x = np.empty((nb, N), dtype=np.uint8)
    traj = np.zeros((nb, max(T, 1)), dtype=np.float64)
    _fastssc_kernel(llrs, tree.ops, tree.code.n, include_spc, x, traj)
    u = polar_transform(x)
    u[:, tree.code.frozen_mask] = 0
    return u, x, traj[:, :T]


def fastssc_decode(tree: FastSscTree, llrs) -> np.ndarray:
    """Fast-SSC estimate of u for one block or a ``(batch, N)`` array."""
    arr = np.asarray(llrs)
    u, _, _ = run_fastssc(tree, arr)
    return u[0] if arr.ndim == 1 else u

"""Polar code construction, encoding, message assembly and CRC-16."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

CRC16_POLY = 0x1021  # z^16 + z^12 + z^5 + 1
CRC_BITS = 16


@dataclass(frozen=True)
class MessageLayout:
    identifier_bits: int = 16
    payload_bits: int = 8
    crc_bits: int = CRC_BITS

    @property
    def data_bits(self) -> int:
        return self.identifier_bits + self.payload_bits


@dataclass(frozen=True, eq=False)
class PolarCode:
    """A polar code of length ``N = 2**n`` carrying ``K`` payload and ``C`` CRC bits.

    ``info_set`` holds the ``K + C`` information positions in ascending
    order; ``reliability_order`` lists all positions from least to most
    reliable.
    """

    n: int
    K: int
    C: int
    info_set: np.ndarray
    reliability_order: np.ndarray
    design_param: float = field(default=0.5)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        info = np.unique(np.asarray(self.info_set, dtype=np.int64))
        if info.size != self.K + self.C:
            raise ValueError(f"|A|={info.size} but K+C={self.K + self.C}")
        if info.size and (info[0] < 0 or info[-1] >= self.N):
            raise ValueError("information index out of range")
        info.setflags(write=False)
        order = np.asarray(self.reliability_order, dtype=np.int64).copy()
        order.setflags(write=False)
        object.__setattr__(self, "info_set", info)
        object.__setattr__(self, "reliability_order", order)

    @property
    def N(self) -> int:
        return 1 << self.n

    @property
    def rate(self) -> float:
        return (self.K + self.C) / self.N

    @property
    def info_rate(self) -> float:
        """Information rate K/N used for the Eb/N0 normalization."""
        return self.K / self.N

    @cached_property
    def frozen_set(self) -> np.ndarray:
        frozen = np.setdiff1d(np.arange(self.N), self.info_set)
        frozen.setflags(write=False)
        return frozen

    @cached_property
    def frozen_mask(self) -> np.ndarray:
        """Boolean mask, True at frozen positions."""
        mask = np.ones(self.N, dtype=bool)
        mask[self.info_set] = False
        mask.setflags(write=False)
        return mask

    @classmethod
    def from_info_set(cls, N: int, info_set, K: int | None = None, C: int = 0) -> "PolarCode":
        """Build a code with an explicit information set (no reliability construction)."""
        n = _log2_exact(N)
        info = np.unique(np.asarray(info_set, dtype=np.int64))
        if K is None:
            K = info.size - C
        frozen = np.setdiff1d(np.arange(N), info)
        return cls(n=n, K=K, C=C, info_set=info,
                   reliability_order=np.concatenate([frozen, info]), design_param=float("nan"))


def _log2_exact(N: int) -> int:
    if N < 2 or N & (N - 1):
        raise ValueError(f"N must be a power of two >= 2, got {N}")
    return N.bit_length() - 1


def bhattacharyya_parameters(N: int, z0: float = 0.5) -> np.ndarray:
    """Bhattacharyya parameters of the ``N`` synthesized bit channels.

    Bit ``b`` of index ``i`` (MSB first) selects the degraded
    ``2z - z**2`` branch when 0 and the upgraded ``z**2`` branch when 1,
    which matches the natural-order transform ``x = u F^{(x)n}``.
    """
    n = _log2_exact(N)
    z = np.array([z0], dtype=np.float64)
    for _ in range(n):
        nz = np.empty(2 * z.size)
        nz[0::2] = 2 * z - z * z
        nz[1::2] = z * z
        z = nz
    return z


def build_code(N: int = 256, K: int = 24, C: int = 16, design_param: float = 0.5,
               allow_empty: bool = False) -> PolarCode:
    """Construct a polar code by Bhattacharyya-parameter ranking.

    Ties in reliability rank the lower index as less reliable. With
    ``allow_empty`` an all-frozen code (``K + C == 0``) is accepted, which
    is only useful for inspecting the construction.
    """
    n = _log2_exact(N)
    if K < 0 or C < 0 or not (0 if allow_empty else 1) <= K + C <= N:
        raise ValueError(f"need 0 < K + C <= N, got K={K}, C={C}, N={N}")
    if not 0.0 < design_param < 1.0:
        raise ValueError("design_param must lie in (0, 1)")
    z = bhattacharyya_parameters(N, design_param)
    idx = np.arange(N)
    # least reliable first: larger z first, then lower index
    order = np.lexsort((idx, -z))
    info = np.sort(order[N - (K + C):]) if K + C else np.empty(0, dtype=np.int64)
    return PolarCode(n=n, K=K, C=C, info_set=info, reliability_order=order,
                     design_param=float(design_param))


def polar_transform(bits: np.ndarray) -> np.ndarray:
    """Apply ``x = u G`` over GF(2) along the last axis with the butterfly network.

    Works on single vectors or stacked batches. The transform is an
    involution, so it also maps codewords back to ``u``.
    """
    x = np.array(bits, dtype=np.uint8, copy=True)
    N = x.shape[-1]
    _log2_exact(N)
    lead = x.shape[:-1]
    h = 1
    while h < N:
        v = x.reshape(lead + (N // (2 * h), 2, h))
        v[..., 0, :] ^= v[..., 1, :]
        h *= 2
    return x


def encode(code: PolarCode, u) -> np.ndarray:
    """Encode ``u`` (length N, zeros on the frozen set) into a codeword."""
    u = np.asarray(u, dtype=np.uint8)
    if u.shape[-1] != code.N:
        raise ValueError(f"u must have length {code.N}")
    if np.any(u[..., code.frozen_mask]):
        raise ValueError("u has a nonzero frozen position")
    return polar_transform(u)


def crc16_compute(data) -> np.ndarray:
    """CRC-16 remainder of ``data * z^16`` (init 0, MSB first, no reflection, no final XOR).

    Accepts a 0/1 vector or a batch of them (last axis); returns 16 bits
    per vector, most significant first.
    """
    data = np.asarray(data, dtype=np.uint8)
    if data.shape[-1] < 1:
        raise ValueError("data must contain at least one bit")
    if data.ndim == 1:
        reg = 0
        for b in data.tolist():
            top = ((reg >> 15) & 1) ^ b
            reg = (reg << 1) & 0xFFFF
            if top:
                reg ^= CRC16_POLY
        return _int_to_bits(reg, CRC_BITS)
    # batched: the code is linear (zero init, no final XOR)
    G = crc16_generator_matrix(data.shape[-1])
    return (data.astype(np.int64) @ G % 2).astype(np.uint8)


def crc16_check(data_with_crc) -> np.ndarray | bool:
    """True iff the trailing 16 bits are the CRC of the preceding bits."""
    data_with_crc = np.asarray(data_with_crc, dtype=np.uint8)
    if data_with_crc.shape[-1] < CRC_BITS + 1:
        raise ValueError("need at least 17 bits")
    crc = crc16_compute(data_with_crc[..., :-CRC_BITS])
    ok = np.all(crc == data_with_crc[..., -CRC_BITS:], axis=-1)
    return bool(ok) if ok.ndim == 0 else ok


_CRC_MATRICES: dict[int, np.ndarray] = {}


def crc16_generator_matrix(k: int) -> np.ndarray:
    """``k x 16`` GF(2) matrix mapping data bits to their CRC."""
    G = _CRC_MATRICES.get(k)
    if G is None:
        G = np.zeros((k, CRC_BITS), dtype=np.int64)
        for i in range(k):
            e = np.zeros(k, dtype=np.uint8)
            e[i] = 1
            G[i] = crc16_compute(e)
        G.setflags(write=False)
        _CRC_MATRICES[k] = G
    return G


def _int_to_bits(value: int, width: int) -> np.ndarray:
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def bits_to_int(bits) -> int:
    out = 0
    for b in np.asarray(bits, dtype=np.uint8).tolist():
        out = (out << 1) | b
    return out


def message_bits(identifier, payload) -> np.ndarray:
    """``identifier || payload || crc16(identifier || payload)``."""
    data = np.concatenate([np.asarray(identifier, dtype=np.uint8),
                           np.asarray(payload, dtype=np.uint8)], axis=-1)
    return np.concatenate([data, crc16_compute(data)], axis=-1)


def assemble_message(code: PolarCode, identifier, payload,
                     layout: MessageLayout = MessageLayout()) -> np.ndarray:
    """Place identifier, payload and CRC into the information set (ascending order)."""
    identifier = np.asarray(identifier, dtype=np.uint8)
    payload = np.asarray(payload, dtype=np.uint8)
    if (identifier.shape[-1] != layout.identifier_bits
            or payload.shape[-1] != layout.payload_bits):
        raise ValueError("identifier/payload widths do not match the message layout")
    if code.K != layout.data_bits or code.C != layout.crc_bits:
        raise ValueError(f"code (K={code.K}, C={code.C}) does not fit the message layout")
    msg = message_bits(identifier, payload)
    u = np.zeros(msg.shape[:-1] + (code.N,), dtype=np.uint8)
    u[..., code.info_set] = msg
    return u


def random_messages(code: PolarCode, rng: np.random.Generator, count: int) -> np.ndarray:
    """Draw ``count`` random u-vectors: random K data bits plus their CRC when C == 16."""
    data = rng.integers(0, 2, size=(count, code.K), dtype=np.uint8)
    if code.C == CRC_BITS:
        msg = np.concatenate([data, crc16_compute(data)], axis=-1) if code.K else data
    elif code.C == 0:
        msg = data
    else:
        raise ValueError("only C in {0, 16} is supported")
    u = np.zeros((count, code.N), dtype=np.uint8)
    u[:, code.info_set] = msg
    return u

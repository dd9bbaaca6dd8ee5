import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polardet.polar_core import (PolarCode, assemble_message, bhattacharyya_parameters, build_code,
                                 crc16_check, crc16_compute, encode, polar_transform, random_messages)


def kron_generator(N):
    F = np.array([[1, 0], [1, 1]], dtype=np.int64)
    G = np.array([[1]], dtype=np.int64)
    while G.shape[0] < N:
        G = np.kron(G, F)
    return G


def crc_long_division(bits, poly=0x11021, width=16):
    """Textbook polynomial long division over GF(2) on Python ints."""
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    value <<= width
    top = value.bit_length()
    while top > width:
        value ^= poly << (top - width - 1)
        top = value.bit_length()
    return value


def ascii_bits(text):
    return np.unpackbits(np.frombuffer(text.encode(), dtype=np.uint8))


# ---------------------------------------------------------------- construction

def test_n2_plus_channel_is_information():
    for z0 in (0.1, 0.5, 0.9):
        assert build_code(2, 1, 0, z0).info_set.tolist() == [1]


def test_n4_single_info_bit_by_hand():
    z = bhattacharyya_parameters(4, 0.5)
    np.testing.assert_allclose(z, [0.9375, 0.5625, 0.4375, 0.0625])
    assert build_code(4, 1, 0, 0.5).info_set.tolist() == [3]


def test_reference_code_sizes():
    code = build_code(256, 24, 16)
    assert code.N == 256 and code.n == 8
    assert code.info_set.size == 40
    assert code.frozen_set.size == 216
    assert code.rate == pytest.approx(40 / 256)
    assert code.info_rate == pytest.approx(24 / 256)


def test_info_set_is_most_reliable_tail_and_partitions():
    code = build_code(64, 10, 6, 0.3)
    assert set(code.info_set) == set(code.reliability_order[-16:])
    assert set(code.info_set) | set(code.frozen_set) == set(range(64))
    assert not set(code.info_set) & set(code.frozen_set)
    assert sorted(code.reliability_order.tolist()) == list(range(64))


def test_build_code_deterministic():
    a, b = build_code(), build_code()
    assert np.array_equal(a.info_set, b.info_set)
    assert np.array_equal(a.reliability_order, b.reliability_order)


@pytest.mark.parametrize("N,K,C", [(3, 1, 0), (12, 2, 0), (8, 8, 1), (8, 0, 0)])
def test_build_code_errors(N, K, C):
    with pytest.raises(ValueError):
        build_code(N, K, C)


# ---------------------------------------------------------------- encoding

def test_encode_small_examples():
    c2 = PolarCode.from_info_set(2, [1])
    assert encode(c2, [0, 1]).tolist() == [1, 1]
    c4 = PolarCode.from_info_set(4, [3])
    assert encode(c4, [0, 0, 0, 1]).tolist() == [1, 1, 1, 1]


def test_encode_rejects_frozen_ones():
    code = PolarCode.from_info_set(4, [3])
    with pytest.raises(ValueError):
        encode(code, [1, 0, 0, 0])


@pytest.mark.parametrize("N", [2, 4, 8])
def test_butterfly_equals_matrix_exhaustive(N):
    G = kron_generator(N)
    U = np.array(list(itertools.product([0, 1], repeat=N)), dtype=np.uint8)
    assert np.array_equal(polar_transform(U), (U.astype(np.int64) @ G) % 2)


@pytest.mark.parametrize("N", [16, 32])
def test_butterfly_equals_matrix_random(N):
    rng = np.random.default_rng(N)
    U = rng.integers(0, 2, size=(500, N), dtype=np.uint8)
    assert np.array_equal(polar_transform(U), (U.astype(np.int64) @ kron_generator(N)) % 2)


@given(st.lists(st.integers(0, 1), min_size=64, max_size=64),
       st.lists(st.integers(0, 1), min_size=64, max_size=64))
def test_encoding_is_linear(a, b):
    a, b = np.array(a, dtype=np.uint8), np.array(b, dtype=np.uint8)
    assert np.array_equal(polar_transform(a ^ b), polar_transform(a) ^ polar_transform(b))


@given(st.integers(1, 8).flatmap(lambda n: st.lists(st.integers(0, 1), min_size=2**n, max_size=2**n)))
def test_transform_is_involution(u):
    u = np.array(u, dtype=np.uint8)
    assert np.array_equal(polar_transform(polar_transform(u)), u)


# ---------------------------------------------------------------- CRC

def test_crc_oracle_self_check():
    # division identity of the oracle itself
    assert crc_long_division([1] + [0] * 16 + [1]) == crc_long_division([1] + [0] * 16 + [1])
    assert crc_long_division([0] * 24) == 0


def test_crc_check_value_123456789():
    bits = ascii_bits("123456789")
    assert bits.size == 72
    assert crc_long_division(bits) == 0x31C3
    crc = crc16_compute(bits)
    assert int("".join(map(str, crc)), 2) == 0x31C3


def test_crc_of_zeros():
    assert not crc16_compute(np.zeros(24, dtype=np.uint8)).any()


@settings(max_examples=200)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=80))
def test_crc_matches_long_division(bits):
    got = int("".join(map(str, crc16_compute(bits))), 2)
    assert got == crc_long_division(bits)


def test_batched_crc_matches_scalar():
    rng = np.random.default_rng(5)
    data = rng.integers(0, 2, size=(200, 24), dtype=np.uint8)
    batched = crc16_compute(data)
    for row, crc in zip(data, batched):
        assert np.array_equal(crc16_compute(row), crc)


@given(st.lists(st.integers(0, 1), min_size=1, max_size=64))
def test_crc_append_then_check(bits):
    bits = np.array(bits, dtype=np.uint8)
    assert crc16_check(np.concatenate([bits, crc16_compute(bits)]))


def test_crc_detects_single_bit_errors():
    rng = np.random.default_rng(2)
    data = rng.integers(0, 2, 24, dtype=np.uint8)
    msg = np.concatenate([data, crc16_compute(data)])
    for i in range(msg.size):
        bad = msg.copy()
        bad[i] ^= 1
        assert not crc16_check(bad)


def test_crc_check_length_error():
    with pytest.raises(ValueError):
        crc16_check(np.zeros(16, dtype=np.uint8))


def test_crc_random_acceptance_rate():
    rng = np.random.default_rng(20260101)
    hits = 0
    for _ in range(10):
        hits += int(crc16_check(rng.integers(0, 2, size=(100_000, 40), dtype=np.uint8)).sum())
    rate = hits / 1e6
    assert 0.5 * 2**-16 <= rate <= 1.5 * 2**-16


# ---------------------------------------------------------------- message layout

def test_all_zero_message_is_zero_vector():
    code = build_code()
    assert not assemble_message(code, np.zeros(16, np.uint8), np.zeros(8, np.uint8)).any()


@given(st.lists(st.integers(0, 1), min_size=16, max_size=16),
       st.lists(st.integers(0, 1), min_size=8, max_size=8))
def test_message_round_trip(ident, payload):
    code = build_code()
    u = assemble_message(code, ident, payload)
    assert not u[code.frozen_set].any()
    bits = u[code.info_set]
    assert bits[:16].tolist() == ident and bits[16:24].tolist() == payload
    assert crc16_check(bits)


def test_layout_mismatch():
    with pytest.raises(ValueError):
        assemble_message(build_code(256, 20, 16), np.zeros(16), np.zeros(8))
    with pytest.raises(ValueError):
        assemble_message(build_code(), np.zeros(15), np.zeros(8))


def test_random_messages_are_valid():
    code = build_code()
    u = random_messages(code, np.random.default_rng(0), 50)
    assert not u[:, code.frozen_set].any()
    assert crc16_check(u[:, code.info_set]).all()

import hashlib
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from feskl import ske
from feskl.circuit_ir import random_circuit
from feskl.errors import AuthError, FormatError
from feskl.prf import GGM, kdf
from feskl.serialization import (
    KIND_CT, KIND_FSK, dump_artifact, dump_container, load_artifact, load_container, pack, unpack,
)


def ggm_oracle(key: bytes, x: int, depth: int) -> bytes:
    """Tree walk written out bit by bit from the root."""
    node = hashlib.sha256(b"ggm-root" + key).digest()
    for bit in format(x, f"0{depth}b"):
        node = hashlib.sha256(bytes([int(bit)]) + node).digest()
    return node


def test_ggm_matches_tree_walk():
    rng = np.random.default_rng(0)
    key = rng.bytes(16)
    f = GGM(key)
    for x in [0, 1, 2**63, 12345678901234] + list(rng.integers(0, 2**62, 20)):
        assert f(int(x)) == ggm_oracle(key, int(x), 64)


def test_ggm_domain():
    f = GGM.for_domain(b"k" * 16, 2**70)
    assert f.domain_bits == 71
    with pytest.raises(ValueError):
        GGM(b"k", 8)(256)


def test_ggm_outputs_distinct():
    f = GGM(b"k" * 16)
    outs = {f(i) for i in range(1000)}
    assert len(outs) == 1000
    assert f.expand(3, b"r", 40) != f.expand(3, b"w", 40)


def test_kdf_lengths():
    assert len(kdf(b"k", b"a", n=100)) == 100
    assert kdf(b"k", b"a", b"b") != kdf(b"k", b"ab")


def test_seal_open():
    rng = np.random.default_rng(1)
    k = ske.keygen(rng)
    for n in (0, 1, 17, 1000):
        m = rng.bytes(n)
        assert ske.open_(k, ske.seal(k, m, rng)) == m
    ct = bytearray(ske.seal(k, b"abc", rng))
    ct[17] ^= 1
    with pytest.raises(AuthError):
        ske.open_(k, bytes(ct))
    with pytest.raises(AuthError):
        ske.open_(ske.keygen(rng), ske.seal(k, b"abc", rng))


def test_prct_roundtrip_and_uniformity():
    rng = np.random.default_rng(2)
    k = ske.keygen(rng)
    m = rng.integers(0, 2, 200, dtype=np.uint8)
    ct = ske.E(k, m, rng)
    assert ct.size == ske.prct_length(200)
    assert np.array_equal(ske.D(k, ct), m)
    # ciphertexts of the all-zero message look uniform
    bits = np.concatenate([ske.E(k, np.zeros(64, np.uint8), rng) for _ in range(500)])
    assert abs(bits.mean() - 0.5) < 0.01


@settings(max_examples=60, deadline=None)
@given(st.recursive(
    st.none() | st.booleans() | st.integers() | st.binary(max_size=20) | st.text(max_size=8)
    | st.fractions(),
    lambda inner: st.lists(inner, max_size=4) | st.tuples(inner, inner)
    | st.dictionaries(st.text(max_size=4), inner, max_size=3),
    max_leaves=12))
def test_pack_roundtrip(obj):
    assert unpack(pack(obj)) == obj
    assert pack(unpack(pack(obj))) == pack(obj)


def test_pack_arrays_and_circuits():
    c = random_circuit(np.random.default_rng(3), 4, 6, 2)
    a = np.arange(10, dtype=np.uint8)
    back = unpack(pack({"c": c, "a": a, "s": frozenset({2, 5}), "f": Fraction(3, 7)}))
    assert back["c"] == c and np.array_equal(back["a"], a)
    assert back["s"] == frozenset({2, 5}) and back["f"] == Fraction(3, 7)


def test_container_roundtrip_and_errors():
    data = dump_container(KIND_CT, {1: b"abc", 7: b""})
    assert data.startswith(b"FESKL1")
    assert load_container(data) == (KIND_CT, {1: b"abc", 7: b""})
    assert dump_container(*load_container(data)) == data
    with pytest.raises(FormatError):
        load_container(b"FESKL1" + (1).to_bytes(2, "little") + bytes([99]))
    with pytest.raises(FormatError):
        load_container(data[:-1])
    with pytest.raises(FormatError):
        load_container(b"XXXXXX" + data[6:])
    with pytest.raises(FormatError):
        load_artifact(dump_artifact(KIND_CT, [1]), expect=KIND_FSK)

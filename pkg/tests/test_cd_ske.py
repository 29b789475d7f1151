import itertools

import numpy as np
import pytest

from feskl import cd_ske
from feskl.cd_ske import (
    Certificate, cert_canonical_eq, delete, extract, ot_dec, ot_enc, ot_keygen,
    r_dec, r_enc, r_keygen, vrfy,
)
from feskl.errors import AuthError, LinearityError, ShapeError
from feskl.qmem import COMPUTATIONAL, QStore


@pytest.fixture
def env():
    rng = np.random.default_rng(42)
    return rng, QStore(np.random.default_rng(43))


def test_key_shape(env):
    rng, _ = env
    for _ in range(200):
        k = ot_keygen(rng)
        assert k.theta.size == 256 and 64 <= k.weight <= 192


def test_ot_roundtrips(env):
    rng, store = env
    k = ot_keygen(rng)
    for m in (np.zeros(16, np.uint8), np.ones(16, np.uint8)):
        _, ct = ot_enc(k, m, store, rng)
        assert np.array_equal(ot_dec(k, ct, store), m)
    for _ in range(100):
        m = rng.integers(0, 2, int(rng.integers(1, 129)), dtype=np.uint8)
        _, ct = ot_enc(k, m, store, rng)
        assert np.array_equal(ot_dec(k, ct, store), m)


def test_message_too_long(env):
    rng, store = env
    with pytest.raises(ShapeError):
        ot_enc(ot_keygen(rng), np.zeros(129, np.uint8), store, rng)


def test_delete_then_verify_and_no_decrypt(env):
    rng, store = env
    k = ot_keygen(rng)
    vk, ct = ot_enc(k, np.zeros(16, np.uint8), store, rng)
    assert vrfy(vk, delete(ct, store))
    with pytest.raises(LinearityError):
        ot_dec(k, ct, store)
    with pytest.raises(LinearityError):
        delete(ct, store)


def test_vrfy_masking(env):
    rng, store = env
    k = ot_keygen(rng)
    vk, ct = ot_enc(k, np.zeros(8, np.uint8), store, rng)
    cert = delete(ct, store)
    j1 = int(np.flatnonzero(k.theta == 1)[0])
    j0 = int(np.flatnonzero(k.theta == 0)[0])
    bad, ok = cert.bits.copy(), cert.bits.copy()
    bad[j1] ^= 1
    ok[j0] ^= 1
    assert not vrfy(vk, Certificate(bad))
    assert vrfy(vk, Certificate(ok))
    assert cert_canonical_eq(vk, cert, Certificate(ok))
    assert not cert_canonical_eq(vk, cert, Certificate(bad))
    with pytest.raises(ShapeError):
        vrfy(vk, Certificate(cert.bits[:-1]))


def test_random_certificates_never_equivalent(env):
    rng, store = env
    k = ot_keygen(rng)
    vk, _ = ot_enc(k, np.zeros(8, np.uint8), store, rng)
    hits = sum(cert_canonical_eq(vk, Certificate(rng.integers(0, 2, 256, dtype=np.uint8)),
                                 Certificate(rng.integers(0, 2, 256, dtype=np.uint8)))
               for _ in range(10_000))
    assert hits == 0


def test_basis_guesser_attack_rejected(env):
    rng, store = env
    k = ot_keygen(rng)
    accepted = 0
    for _ in range(10_000):
        vk, ct = ot_enc(k, np.zeros(8, np.uint8), store, rng)
        bits = store.measure_many(ct.qubits, COMPUTATIONAL)
        accepted += vrfy(vk, Certificate(bits))
    assert accepted == 0


def test_independent_certificates(env):
    rng, store = env
    k = ot_keygen(rng)
    a, b = [], []
    for _ in range(2000):
        for sink in (a, b):
            _, ct = ot_enc(k, np.zeros(8, np.uint8), store, rng)
            sink.append(delete(ct, store).bits)
    a, b = np.array(a, float).ravel(), np.array(b, float).ravel()
    assert abs(np.corrcoef(a, b)[0, 1]) <= 0.03


def test_masked_uniqueness_exhaustive_small():
    rng = np.random.default_rng(5)
    store = QStore(np.random.default_rng(6))
    for _ in range(20):
        k = ot_keygen(rng, kappa_q=8)
        vk, ct = cd_ske.ot_enc(k, np.zeros(4, np.uint8), store, rng)
        honest = delete(ct, store)
        accepted = {c for c in itertools.product((0, 1), repeat=8)
                    if vrfy(vk, Certificate(np.array(c, np.uint8)))}
        cls = {c for c in itertools.product((0, 1), repeat=8)
               if cert_canonical_eq(vk, honest, Certificate(np.array(c, np.uint8)))}
        assert accepted == cls
        assert len(accepted) == 2 ** (8 - k.weight)


def test_deleted_pad_bits_unrecoverable(env):
    # with the key in hand, the best guess of a theta=0 bit is the certificate bit
    rng, store = env
    hits = total = 0
    while total < 10_000:
        k = ot_keygen(rng)
        a = rng.integers(0, 2, 256, dtype=np.uint8)
        ids = store.prepare_many(a, k.theta)
        cert = store.measure_many(ids, 1)
        zero = k.theta == 0
        hits += int((cert[zero] == a[zero]).sum())
        total += int(zero.sum())
    assert abs(hits / total - 0.5) <= 0.02


def test_extractor_is_linear_toeplitz():
    rng = np.random.default_rng(1)
    seed = rng.bytes(16)
    x = rng.integers(0, 2, 100, dtype=np.uint8)
    y = rng.integers(0, 2, 100, dtype=np.uint8)
    assert np.array_equal(extract(seed, x ^ y), extract(seed, x) ^ extract(seed, y))
    assert extract(seed, x).size == 128


def test_reusable_roundtrip_and_reuse(env):
    rng, store = env
    sk = r_keygen(rng)
    _, ct = r_enc(sk, bytes(2), store, rng)
    assert r_dec(sk, ct, store) == bytes(2)
    for _ in range(100):
        m = rng.bytes(int(rng.integers(0, 300)))
        _, ct = r_enc(sk, m, store, rng)
        assert r_dec(sk, ct, store) == m


def test_reusable_wrong_key(env):
    rng, store = env
    _, ct = r_enc(r_keygen(rng), b"hello", store, rng)
    with pytest.raises(AuthError):
        r_dec(r_keygen(rng), ct, store)


def test_reusable_delete_verify(env):
    rng, store = env
    sk = r_keygen(rng)
    vk, ct = r_enc(sk, b"payload", store, rng)
    assert cd_ske.r_vrfy(vk, cd_ske.r_del(ct, store))
    with pytest.raises(LinearityError):
        r_dec(sk, ct, store)

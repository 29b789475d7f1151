import numpy as np
import pytest

from feskl import ske
from feskl.base_skfe import CRYPTO, REFERENCE, SkfeFunctionKey, skfe_dec, skfe_enc, skfe_kg, skfe_setup
from feskl.circuit_ir import AND, Circuit, Gate, evaluate, random_circuit
from feskl.errors import AuthError, BudgetError, DecodeError, QuotaError, ShapeError

AND4 = Circuit(4, 1, (Gate(AND, 0, 1),), (4,))


def test_setup_shapes():
    rng = np.random.default_rng(0)
    assert skfe_setup(128, 1, CRYPTO, rng).q == 1
    assert skfe_setup(128, 4, CRYPTO, rng).counter == 0


def test_setups_never_collide():
    rng = np.random.default_rng(1)
    keys = set()
    for _ in range(1000):
        msk = skfe_setup(128, 1, CRYPTO, rng)
        keys.add(msk._bit_key(0, 0, 0))
    assert len(keys) == 1000


@pytest.mark.parametrize("backend", [CRYPTO, REFERENCE])
def test_quota(backend):
    msk = skfe_setup(128, 1, backend, np.random.default_rng(2))
    skfe_kg(msk, AND4)
    with pytest.raises(QuotaError):
        skfe_kg(msk, AND4)


@pytest.mark.parametrize("backend", [CRYPTO, REFERENCE])
def test_and_roundtrip(backend):
    rng = np.random.default_rng(3)
    msk = skfe_setup(128, 2, backend, rng)
    fsk = skfe_kg(msk, AND4)
    ct = skfe_enc(msk, [1, 1, 0, 0], rng)
    assert list(skfe_dec(fsk, ct)) == [1]
    assert list(skfe_dec(skfe_kg(msk, AND4), skfe_enc(msk, [1, 0, 0, 0], rng))) == [0]


def test_random_roundtrips_and_backend_agreement():
    rng = np.random.default_rng(4)
    crypto = skfe_setup(128, 100, CRYPTO, rng)
    ref = skfe_setup(128, 100, REFERENCE, rng)
    keys = []
    for _ in range(100):
        f = random_circuit(rng, 4, int(rng.integers(0, 9)), 1)
        keys.append((f, skfe_kg(crypto, f), skfe_kg(ref, f)))
    # one ciphertext carries all 100 sub-instances; decrypt a spread of them
    for f, kc, kr in keys[:25]:
        x = rng.integers(0, 2, 4)
        want = list(evaluate(f, x))
        assert list(skfe_dec(kr, skfe_enc(ref, x, rng))) == want
    x = rng.integers(0, 2, 4)
    ct = skfe_enc(crypto, x, rng)
    for f, kc, _ in keys:
        assert list(skfe_dec(kc, ct)) == list(evaluate(f, x))


def test_keys_bound_to_their_sub_instance():
    rng = np.random.default_rng(5)
    msk = skfe_setup(128, 2, CRYPTO, rng)
    kf = skfe_kg(msk, AND4)
    kg = skfe_kg(msk, Circuit(4, 1, (), (3,)))
    assert (kf.index, kg.index) == (0, 1)
    ct = skfe_enc(msk, [1, 1, 0, 1], rng)
    assert list(skfe_dec(kf, ct)) == [1] and list(skfe_dec(kg, ct)) == [1]
    swapped = SkfeFunctionKey(CRYPTO, 1, kf.bits, kf.keys)
    with pytest.raises(DecodeError):
        skfe_dec(swapped, ct)


def test_complement_labels_stay_sealed():
    rng = np.random.default_rng(6)
    msk = skfe_setup(128, 1, CRYPTO, rng)
    fsk = skfe_kg(msk, AND4)
    ct = skfe_enc(msk, [0, 1, 0, 1], rng)
    bits = np.frombuffer(fsk.bits, np.uint8)
    for t, (k, v) in enumerate(zip(fsk.keys, bits)):
        with pytest.raises(AuthError):
            ske.open_(k, ct.payloads[0].sealed[t][1 - v])


def test_mismatched_instance():
    rng = np.random.default_rng(7)
    a, b = skfe_setup(128, 1, CRYPTO, rng), skfe_setup(128, 1, CRYPTO, rng)
    with pytest.raises(DecodeError):
        skfe_dec(skfe_kg(a, AND4), skfe_enc(b, [1, 1, 1, 1], rng))
    a, b = skfe_setup(128, 1, REFERENCE, rng), skfe_setup(128, 1, REFERENCE, rng)
    with pytest.raises(DecodeError):
        skfe_dec(skfe_kg(a, AND4), skfe_enc(b, [1, 1, 1, 1], rng))


def test_budget_and_shape_errors():
    rng = np.random.default_rng(8)
    msk = skfe_setup(128, 3, CRYPTO, rng)
    with pytest.raises(BudgetError):
        skfe_kg(msk, random_circuit(rng, 4, 9, 1))
    with pytest.raises(BudgetError):
        skfe_kg(msk, lambda x: x)
    with pytest.raises(ShapeError):
        skfe_enc(msk, [1, 0], rng)


def test_seed_rebuilds_instance():
    rng = np.random.default_rng(9)
    a = skfe_setup(128, 1, CRYPTO, seed=b"s" * 16)
    b = skfe_setup(128, 1, CRYPTO, seed=b"s" * 16)
    assert list(skfe_dec(skfe_kg(a, AND4), skfe_enc(b, [1, 1, 0, 0], rng))) == [1]


def test_function_key_bytes_roundtrip():
    rng = np.random.default_rng(10)
    for backend in (CRYPTO, REFERENCE):
        msk = skfe_setup(128, 1, backend, rng)
        fsk = skfe_kg(msk, AND4)
        back = SkfeFunctionKey.from_bytes(fsk.to_bytes())
        assert back == fsk
        assert list(skfe_dec(back, skfe_enc(msk, [1, 1, 0, 0], rng))) == [1]

import numpy as np
import pytest

from feskl.bits import int_to_bits
from feskl.circuit_ir import AND, Circuit, Gate, evaluate, random_circuit
from feskl.errors import GarbleError, LinearityError, OneCiphertextError, ParameterError, SlotError
from feskl.qmem import QStore
from feskl.upgrades import (
    GProgram, KeyRecord, Simulator, TLayout, TProgram, ada_cert, ada_dec, ada_enc, ada_kg, ada_recover,
    ada_setup, ada_vrfy, compile_t, g_payload, one_dec, one_enc, one_kg, one_setup, sim_cert, sim_dec,
    sim_enc, sim_kg, sim_setup, sim_vrfy, trojan_branch_test,
)

AND4 = Circuit(4, 1, (Gate(AND, 0, 1),), (4,))


@pytest.fixture
def env():
    return np.random.default_rng(11), QStore(np.random.default_rng(12))


def test_one_ct_roundtrip_and_latch(env):
    rng, _ = env
    msk = one_setup(4, rng)
    ct = one_enc(msk, [1, 1, 0, 1])
    for _ in range(20):
        f = random_circuit(rng, 4, 6, 2)
        assert list(one_dec(one_kg(msk.seed, f, rng.bytes(16)), ct)) == list(evaluate(f, [1, 1, 0, 1]))
    with pytest.raises(OneCiphertextError):
        one_enc(msk, [0, 0, 0, 0])


def test_g_branches(env):
    rng, _ = env
    seed, key = rng.bytes(16), rng.bytes(16)
    f = random_circuit(rng, 4, 5, 1)
    g = GProgram(f, bytes(8), 7)
    honest = g(g_payload(seed, key))
    assert honest.size == g.n_out
    # the honest branch ignores ct_ske and is deterministic in (seed, key, tau)
    assert np.array_equal(GProgram(f, rng.bytes(8), 7)(g_payload(seed, key)), honest)
    assert not np.array_equal(GProgram(f, bytes(8), 8)(g_payload(seed, key)), honest)


def test_trojan_branch(env):
    rng, store = env
    f = random_circuit(rng, 4, 5, 1)
    assert not trojan_branch_test(f, np.zeros(16, np.uint8), rng).any()
    for _ in range(10):
        target = rng.integers(0, 2, 40, dtype=np.uint8)
        assert np.array_equal(trojan_branch_test(f, target, rng), target)
    msk = ada_setup(128, 3, rng, levels=3)
    target = rng.integers(0, 2, 24, dtype=np.uint8)
    assert np.array_equal(trojan_branch_test(f, target, rng, msk=msk, store=store), target)


def test_adaptive_roundtrip(env):
    rng, store = env
    msk = ada_setup(128, 30, rng, levels=4)
    key, _ = ada_kg(msk, AND4, 3, store, rng)
    assert list(ada_dec(key, ada_enc(msk, [1, 1, 0, 0], rng), store)) == [1]
    for n in (1, 2, 5, 9):
        f = random_circuit(rng, 4, int(rng.integers(0, 9)), 1)
        x = rng.integers(0, 2, 4)
        key, _ = ada_kg(msk, f, n, store, rng)
        assert list(ada_dec(key, ada_enc(msk, x, rng), store)) == list(evaluate(f, x))


def test_recovered_key_is_ciphertext_specific(env):
    rng, store = env
    msk = ada_setup(128, 3, rng, levels=3)
    key, _ = ada_kg(msk, AND4, 4, store, rng)
    ct1, ct2 = ada_enc(msk, [1, 1, 0, 0], rng), ada_enc(msk, [1, 1, 0, 0], rng)
    sk1 = ada_recover(key, ct1, store)
    assert list(one_dec(sk1, ct1.labels)) == [1]
    with pytest.raises(GarbleError):
        one_dec(sk1, ct2.labels)


def test_adaptive_cert(env):
    rng, store = env
    msk = ada_setup(128, 3, rng, levels=3)
    key, vk = ada_kg(msk, AND4, 2, store, rng)
    assert ada_vrfy(vk, ada_cert(key, store))
    with pytest.raises(LinearityError):
        ada_dec(key, ada_enc(msk, [1, 1, 0, 0], rng), store)


def test_compiled_t_matches_native(env):
    rng, _ = env
    for q_pre in (0, 1, 2, 3):
        layout = TLayout(4, 2, q_pre)
        for _ in range(30):
            f = random_circuit(rng, 4, 6, 2)
            ct, tau = rng.integers(0, 2, 2, dtype=np.uint8), int(rng.integers(0, 2**63))
            c, t = compile_t(f, ct, tau, layout), TProgram(f, ct, tau, layout)
            for _ in range(8):
                v = rng.integers(0, 2, layout.n_in, dtype=np.uint8)
                if q_pre and rng.random() < 0.5:   # plant a matching tag
                    i = int(rng.integers(0, q_pre))
                    pos = 4 + 2 + i * layout.slot_bits
                    v[pos:pos + 64] = int_to_bits(tau, 64)
                assert np.array_equal(c(v), t(v))


def test_t_first_match_wins(env):
    layout = TLayout(4, 1, 2)
    f = AND4
    tau = 99
    v = layout.pack([1, 1, 0, 0], [0], [(tau, np.array([0], np.uint8)), (tau, np.array([1], np.uint8))], 1)
    assert list(compile_t(f, [1], tau, layout)(v)) == [0]
    v = layout.pack([1, 1, 0, 0], [0], [(5, np.array([0], np.uint8)), (6, np.array([0], np.uint8))], 1)
    assert list(compile_t(f, [1], tau, layout)(v)) == [1]      # falls through to ct_ske xor K
    with pytest.raises(SlotError):
        layout.pack([0] * 4, [0], [(1, [0])] * 3, 1)


def test_sim_real_and_simulated_agree(env):
    rng, store = env
    for _ in range(3):
        msk = sim_setup(128, 6, rng, levels=2)
        x = rng.integers(0, 2, 4, dtype=np.uint8)
        fs = [random_circuit(rng, 4, 5, 1) for _ in range(2)]
        pre = [sim_kg(msk, f, 1, store, rng)[0] for f in fs]
        real = sim_enc(msk, x, rng)
        sim = Simulator(msk)
        ct = sim.s_enc([KeyRecord(k.f, k.n, k.tau, evaluate(k.f, x)) for k in pre], rng)
        for k in pre:
            assert list(sim_dec(k, ct, store)) == list(evaluate(k.f, x))
        post = random_circuit(rng, 4, 5, 1)
        sk, _ = sim.s_kg(post, 1, evaluate(post, x), store, rng)
        assert list(sim_dec(sk, ct, store)) == list(evaluate(post, x))
        rk, _ = sim_kg(msk, post, 1, store, rng)
        assert list(sim_dec(rk, real, store)) == list(evaluate(post, x))


def test_simulator_refuses_starred_and_extra_records(env):
    rng, _ = env
    msk = sim_setup(128, 6, rng, levels=1)
    sim = Simulator(msk)
    rec = KeyRecord(AND4, 1, 5, np.array([0], np.uint8))
    with pytest.raises(ParameterError):
        sim.s_enc([KeyRecord(AND4, 1, 5, np.array([0], np.uint8), starred=True)], rng)
    with pytest.raises(SlotError):
        sim.s_enc([rec] * 3, rng)
    with pytest.raises(ParameterError):
        Simulator(msk).s_kg(AND4, 1, [0], QStore(), rng)


def test_sim_cert(env):
    rng, store = env
    msk = sim_setup(128, 3, rng, levels=1)
    key, vk = sim_kg(msk, AND4, 1, store, rng, starred=True)
    assert key.starred
    assert sim_vrfy(vk, sim_cert(key, store))


def test_tag_collisions():
    rng = np.random.default_rng(13)
    collisions = 0
    for _ in range(10_000):
        tags = {int.from_bytes(rng.bytes(8), "little") for _ in range(3)}
        collisions += len(tags) < 3
    assert collisions == 0

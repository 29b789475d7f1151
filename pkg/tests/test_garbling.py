import numpy as np
import pytest

from feskl.circuit_ir import AND, NOT, XOR, Circuit, Gate, evaluate, random_circuit, universal
from feskl.errors import GarbleError
from feskl.garbling import (
    LABEL_BYTES, GarbledCircuit, eval_gc, garble, labels_from_seed, select_labels, serialized_size,
)

AND2 = Circuit(2, 1, (Gate(AND, 0, 1),), (2,))
XOR2 = Circuit(2, 1, (Gate(XOR, 0, 1),), (2,))


def test_and_and_xor():
    rng = np.random.default_rng(0)
    gc, pairs = garble(AND2, rng)
    assert list(eval_gc(gc, [pairs[0].label1, pairs[1].label1])) == [1]
    gc, pairs = garble(XOR2, rng)
    assert list(eval_gc(gc, select_labels(pairs, [0, 1]))) == [1]


def test_label_pairs_per_input():
    gc, pairs = garble(random_circuit(np.random.default_rng(3), 5, 6, 2), np.random.default_rng(4))
    assert len(pairs) == 5
    for p in pairs:
        assert p.label0 != p.label1 and len(p.label0) == LABEL_BYTES
        assert (p.label0[-1] & 1) != (p.label1[-1] & 1)


@pytest.mark.parametrize("free_xor", [False, True])
def test_random_circuits_match_eval(free_xor):
    rng = np.random.default_rng(11)
    for _ in range(100):
        c = random_circuit(rng, 4, int(rng.integers(0, 12)), int(rng.integers(1, 4)))
        x = rng.integers(0, 2, 4)
        gc, pairs = garble(c, rng, free_xor=free_xor)
        assert list(eval_gc(gc, select_labels(pairs, x))) == list(evaluate(c, x))


def test_deterministic_given_seed():
    c = universal(4, 8, 1)
    g1, p1 = garble(c, np.random.default_rng(5))
    g2, p2 = garble(c, np.random.default_rng(5))
    assert g1 == g2 and p1 == p2


def test_passthrough_circuit():
    c = Circuit(1, 1, (), (0,))
    gc, pairs = garble(c, np.random.default_rng(1))
    for b in (0, 1):
        assert list(eval_gc(gc, [pairs[0].select(b)])) == [b]


def test_random_wrong_label_always_errors():
    rng = np.random.default_rng(99)
    c = Circuit(3, 1, (Gate(AND, 0, 1), Gate(XOR, 3, 2), Gate(NOT, 4)), (5,))
    gc, pairs = garble(c, rng)
    good = select_labels(pairs, [1, 0, 1])
    errors = 0
    for t in range(1000):
        labels = list(good)
        labels[t % 3] = rng.bytes(LABEL_BYTES)
        try:
            eval_gc(gc, labels)
        except GarbleError:
            errors += 1
    assert errors == 1000


def test_authenticity_statistics():
    # a wrong label must never decode: 0 successes in 10^4 trials
    rng = np.random.default_rng(2)
    gc, pairs = garble(AND2, rng)
    ok = 0
    for _ in range(10_000):
        try:
            eval_gc(gc, [rng.bytes(LABEL_BYTES), pairs[1].label0])
            ok += 1
        except GarbleError:
            pass
    assert ok == 0


def test_serialization_fixed_width_roundtrip():
    rng = np.random.default_rng(8)
    c = random_circuit(rng, 4, 8, 2)
    sizes = set()
    for _ in range(3):
        gc, pairs = garble(c, rng)
        data = gc.to_bytes()
        sizes.add(len(data))
        back = GarbledCircuit.from_bytes(data)
        assert back == gc
        x = rng.integers(0, 2, 4)
        assert list(eval_gc(back, select_labels(pairs, x))) == list(evaluate(c, x))
    assert sizes == {serialized_size(c)}


def test_seeded_labels_are_reproducible_and_coloured():
    a = labels_from_seed(b"s" * 16, 4)
    assert a == labels_from_seed(b"s" * 16, 4)
    assert a != labels_from_seed(b"t" * 16, 4)
    gc, _ = garble(AND2, np.random.default_rng(0), input_labels=labels_from_seed(b"k" * 16, 2))
    lab = labels_from_seed(b"k" * 16, 2)
    assert list(eval_gc(gc, select_labels(lab, [1, 1]))) == [1]
    other = labels_from_seed(b"z" * 16, 2)
    with pytest.raises(GarbleError):
        eval_gc(gc, select_labels(other, [1, 1]))

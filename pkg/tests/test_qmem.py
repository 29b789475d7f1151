import math

import numpy as np
import pytest

from feskl.errors import CapabilityError, FormatError, LinearityError
from feskl.qmem import COMPUTATIONAL, HADAMARD, QStore, QubitHandle, open_store


def chi2_p_1dof(stat):
    return math.erfc(math.sqrt(stat / 2))


def test_matched_basis_is_deterministic():
    s = QStore(np.random.default_rng(0))
    for _ in range(200):
        assert s.measure(s.prepare(0, COMPUTATIONAL), COMPUTATIONAL) == 0
        assert s.measure(s.prepare(1, HADAMARD), HADAMARD) == 1


def test_mismatched_basis_mean():
    s = QStore(np.random.default_rng(1))
    ids = s.prepare_many(np.zeros(10_000, np.uint8), np.zeros(10_000, np.uint8))
    out = s.measure_many(ids, HADAMARD)
    assert abs(out.mean() - 0.5) <= 0.02


def test_mismatched_measurements_uncorrelated():
    s = QStore(np.random.default_rng(2))
    n = 10_000
    a = s.measure_many(s.prepare_many(np.zeros(n, np.uint8), np.zeros(n, np.uint8)), HADAMARD).astype(float)
    b = s.measure_many(s.prepare_many(np.zeros(n, np.uint8), np.zeros(n, np.uint8)), HADAMARD).astype(float)
    assert abs(np.corrcoef(a, b)[0, 1]) <= 0.03


def test_mismatched_outcome_independent_of_hidden_bit_chi2():
    rng = np.random.default_rng(3)
    s = QStore(rng)
    n = 10_000
    hidden = rng.integers(0, 2, n, dtype=np.uint8)
    out = s.measure_many(s.prepare_many(hidden, np.ones(n, np.uint8)), COMPUTATIONAL)
    table = np.array([[np.sum((hidden == h) & (out == o)) for o in (0, 1)] for h in (0, 1)], float)
    expected = table.sum(1, keepdims=True) * table.sum(0, keepdims=True) / n
    stat = ((table - expected) ** 2 / expected).sum()
    assert chi2_p_1dof(stat) > 0.01
    # outcome uniform overall
    counts = np.bincount(out, minlength=2)
    assert chi2_p_1dof(((counts - n / 2) ** 2 / (n / 2)).sum()) > 0.01


def test_every_consumer_is_linear():
    s = QStore(np.random.default_rng(4), allow_unsafe_clone=True)
    consumers = [
        lambda h: s.measure(h, 0),
        lambda h: s.measure(h, 1),
        lambda h: s.measure_many([h], 0),
        lambda h: s.discard_many([h]),
    ]
    for first in consumers:
        for second in consumers + [lambda h: s.unsafe_clone(h)]:
            h = s.prepare(1, 0)
            first(h)
            with pytest.raises(LinearityError):
                second(h)
            assert not s.is_live(h)


def test_batch_checks_before_consuming():
    s = QStore(np.random.default_rng(5))
    ids = s.prepare_many([0, 1, 0], [0, 0, 0])
    s.measure(int(ids[1]), 0)
    with pytest.raises(LinearityError):
        s.measure_many(ids, 0)
    assert s.is_live(int(ids[0])) and s.is_live(int(ids[2]))
    with pytest.raises(LinearityError):
        s.measure_many([ids[0], ids[0]], 0)
    with pytest.raises(LinearityError):
        s.measure(QubitHandle(999), 0)


def test_clone_requires_flag():
    s = QStore(np.random.default_rng(6))
    with pytest.raises(CapabilityError):
        s.unsafe_clone(s.prepare(0, 0))


def test_clone_duplicates_state():
    s = QStore(np.random.default_rng(7), allow_unsafe_clone=True)
    for bit in (0, 1):
        for basis in (0, 1):
            h = s.prepare(bit, basis)
            c = s.unsafe_clone(h)
            assert s.measure(h, basis) == bit and s.measure(c, basis) == bit


def test_file_roundtrip_and_magic(tmp_path):
    s = QStore(np.random.default_rng(8))
    ids = s.prepare_many([1, 0, 1], [0, 1, 1])
    s.measure(int(ids[0]), 0)
    path = tmp_path / "q.qsim"
    s.save(path)
    raw = path.read_bytes()
    assert raw.startswith(b"QSIM1") and b"SIMULATION ONLY" in raw
    back = QStore.load(path)
    assert back.to_bytes() == raw
    assert not back.is_live(int(ids[0])) and back.measure(int(ids[2]), 1) == 1
    bad = tmp_path / "bad"
    bad.write_bytes(b"XXXXX" + raw[5:])
    with pytest.raises(FormatError):
        QStore.load(bad)


def test_record_layout(tmp_path):
    s = QStore(np.random.default_rng(9))
    s.prepare_many([1], [1])
    raw = s.to_bytes()
    tail = raw[-11:]
    assert int.from_bytes(tail[:8], "little") == 0 and tail[8:] == bytes([1, 1, 0])


def test_open_store_persists_consumption(tmp_path):
    path = tmp_path / "q.qsim"
    with open_store(path, create=True) as s:
        h = s.prepare(0, 0)
    with open_store(path) as s:
        s.measure(h, 0)
    with pytest.raises(LinearityError):
        with open_store(path) as s:
            s.measure(h, 0)

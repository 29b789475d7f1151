"""Security experiments with pluggable adversaries.

Each experiment is a set of oracles with the bookkeeping of its definition.
An adversary is any object with ``play(oracles) -> int``; it receives a fresh
oracle object per trial.  When an oracle finds a rule broken it raises
:class:`ChallengerZero` and the trial's output is 0.

:func:`run` draws a uniform coin per trial, plays, and estimates the
advantage ``Pr[out = 1 | coin = 1] - Pr[out = 1 | coin = 0]`` with a 95%
interval.  These are smoke tests of the implementation: a small measured
advantage says the tested strategies fail, not that the schemes are secure.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Optional, Union

import numpy as np

from . import cd_ske, ske
from .bits import as_bits, bits_to_bytes
from .cd_ske import CDCiphertext, Certificate, CvaFromCpa, r_dec, r_enc, r_keygen
from .circuit_ir import AND, CONST0, Circuit, Gate, evaluate, random_circuit
from .errors import FesklError, LinearityError, ParameterError, ShapeError
from .leasing import (
    SblConfig, i_cert, i_dec, i_enc, i_kg, i_setup, i_vrfy, skl_cert, skl_dec, skl_enc, skl_kg, skl_setup,
    skl_vrfy,
)
from .qmem import COMPUTATIONAL, QStore
from .serialization import pack, unpack
from .sethss import GARBLED, func_encode, inp_encode, set_gen, share_eval
from .upgrades import (
    KeyRecord, Simulator, ada_cert, ada_dec, ada_enc, ada_kg, ada_setup, ada_vrfy, sim_cert, sim_dec, sim_enc,
    sim_kg, sim_setup, sim_vrfy,
)

EXPERIMENTS = ("sel-lessor", "sel-s-lessor", "ind-cpa-cd", "ind-cva-cd", "sethss-sel-ind", "ada-lessor",
               "real-vs-sim")
Z95 = 1.959963984540054

# AND of the first two bits separates these inputs
DISTINGUISHING_F = Circuit(4, 1, (Gate(AND, 0, 1),), (4,))
X0 = np.array([0, 0, 0, 0], np.uint8)
X1 = np.array([1, 1, 0, 0], np.uint8)


class ChallengerZero(Exception):
    """The challenger ends the trial with output 0."""


class ProtocolViolation(ChallengerZero):
    """The adversary broke a rule of the experiment."""


@dataclass
class Experiment:
    name: str
    q: int = 2
    levels: int = 4
    cfg: Optional[SblConfig] = None
    index_space: int = 4
    q_pre: int = 2
    m: int = 3
    ell: int = 8
    p: Fraction = Fraction(1, 8)
    d: Fraction = Fraction(1, 2)
    sethss_backend: str = GARBLED

    def __post_init__(self):
        if self.name not in EXPERIMENTS:
            raise ParameterError(f"unknown experiment {self.name!r}; choose from {', '.join(EXPERIMENTS)}")


# ================================================================== oracles

class _Oracles:
    kind = ""

    def __init__(self, exp: Experiment, coin: int, rng: np.random.Generator, store: QStore):
        self.exp = exp
        self._coin = coin
        self.rng = rng
        self.store = store
        self.accepted = 0


class _LessorBook:
    """The key list ``(f, n, vk, M)`` and the verification rule shared by the lessor games."""

    def __init__(self):
        self.entries: list[list] = []
        self.n_enc = 0

    def add(self, f, n, vk):
        self.entries.append([f, n, vk, False])

    def verify(self, f, cert, check, count_bound: bool) -> bool:
        for entry in self.entries:
            if entry[0] != f or entry[3] or (count_bound and self.n_enc >= entry[1]):
                continue
            try:
                ok = check(entry[2], cert)
            except (ShapeError, TypeError):
                ok = False
            if ok:
                entry[3] = True
                return True
        return False

    def pending(self, distinguishing: Callable[[Circuit], bool]) -> bool:
        return any(distinguishing(e[0]) and not e[3] for e in self.entries)


class SelLessorOracles(_Oracles):
    """Selective lessor game over the dynamic-bound scheme."""
    kind = "sel-lessor"

    def begin(self, q: int, x0, x1):
        self.x = (as_bits(x0), as_bits(x1))
        self.msk = skl_setup(128, q, self.rng, levels=self.exp.levels, cfg=self.exp.cfg)
        self.book = _LessorBook()
        self.challenged = False

    def _dist(self, f) -> bool:
        return not np.array_equal(evaluate(f, self.x[0]), evaluate(f, self.x[1]))

    def enc(self, x):
        self.book.n_enc += 1
        return skl_enc(self.msk, x, self.rng)

    def kg(self, f, n: int):
        if self.challenged and self._dist(f):
            raise ProtocolViolation("distinguishing key requested after the challenge")
        key, vk = skl_kg(self.msk, f, n, self.store, self.rng)
        self.book.add(f, n, vk)
        return key

    def vrfy(self, f, cert) -> bool:
        ok = self.book.verify(f, cert, skl_vrfy, count_bound=True)
        self.accepted += ok
        return ok

    def challenge(self):
        if self.book.pending(self._dist):
            raise ChallengerZero("a distinguishing key was not returned")
        self.challenged = True
        return skl_enc(self.msk, self.x[self._coin], self.rng)

    def dec(self, key, ct):
        return skl_dec(key, ct, self.store)

    def cert(self, key):
        return skl_cert(key, self.store)


class IndexedLessorOracles(_Oracles):
    """Selective strong lessor game over the index layer."""
    kind = "sel-s-lessor"

    def begin(self, q: int, n: int, j_star: int, x0, x1):
        self.x = (as_bits(x0), as_bits(x1))
        self.j_star = j_star
        self.msk = i_setup(128, q, n, self.rng)
        self.book = _LessorBook()
        self.used: set[int] = set()
        self.challenged = False

    def _dist(self, f) -> bool:
        return not np.array_equal(evaluate(f, self.x[0]), evaluate(f, self.x[1]))

    def enc(self, j: int, x):
        self.used.add(j)
        return i_enc(self.msk, j, x, self.rng)

    def kg(self, f):
        if self.challenged and self._dist(f):
            raise ProtocolViolation("distinguishing key requested after the challenge")
        key, vk = i_kg(self.msk, f, self.store, self.rng)
        self.book.add(f, None, vk)
        return key

    def vrfy(self, f, cert) -> bool:
        ok = self.book.verify(f, cert, i_vrfy, count_bound=False)
        self.accepted += ok
        return ok

    def challenge(self):
        if self.book.pending(self._dist) or self.j_star in self.used:
            raise ChallengerZero("a distinguishing key is outstanding or the challenge index was used")
        self.challenged = True
        return i_enc(self.msk, self.j_star, self.x[self._coin], self.rng)

    def dec(self, key, ct):
        return i_dec(key, ct, self.store)

    def cert(self, key):
        return i_cert(key, self.store)


class CpaCdOracles(_Oracles):
    """IND-CPA-CD for the reusable CD-SKE: one certificate submission."""
    kind = "ind-cpa-cd"

    def __init__(self, *a):
        super().__init__(*a)
        self._sk = r_keygen(self.rng)
        self._vk = None
        self.submitted = False

    def enc(self, m: bytes):
        return r_enc(self._sk, m, self.store, self.rng)

    def challenge(self, m0: bytes, m1: bytes):
        if len(m0) != len(m1):
            raise ProtocolViolation("challenge messages differ in length")
        if self._vk is not None:
            raise ProtocolViolation("one challenge per trial")
        self._vk, ct = r_enc(self._sk, (m0, m1)[self._coin], self.store, self.rng)
        return ct

    def submit(self, cert: Certificate) -> Optional[bytes]:
        if self._vk is None or self.submitted:
            raise ProtocolViolation("one certificate, after the challenge")
        self.submitted = True
        try:
            ok = cd_ske.r_vrfy(self._vk, cert)
        except ShapeError:
            ok = False
        self.accepted += ok
        return self._sk if ok else None


class CvaCdOracles(CpaCdOracles):
    """IND-CVA-CD: any number of verification queries after the challenge."""
    kind = "ind-cva-cd"

    def __init__(self, *a):
        super().__init__(*a)
        self.queries = 0

    def verify(self, cert: Certificate) -> Optional[bytes]:
        if self._vk is None:
            raise ProtocolViolation("verification before the challenge")
        self.queries += 1
        try:
            ok = cd_ske.r_vrfy(self._vk, cert)
        except ShapeError:
            ok = False
        self.accepted += ok
        return self._sk if ok else None


class SetHssOracles(_Oracles):
    """Selective indistinguishability for SetHSS."""
    kind = "sethss-sel-ind"

    def __init__(self, *a):
        super().__init__(*a)
        e = self.exp
        self.params = set_gen(128, e.m, e.ell, e.p, e.d, self.rng)

    def begin(self, e_star: int, x0, x1) -> dict:
        if not 0 <= e_star < self.params.ell:
            raise ProtocolViolation("e* outside the element range")
        self.x = (as_bits(x0), as_bits(x1))
        self._shares = inp_encode(self.params, self.x[self._coin], self.rng)
        return {i: s for i, s in enumerate(self._shares) if e_star not in self.params.sets[i]}

    def func_encode(self, f):
        if not np.array_equal(evaluate(f, self.x[0]), evaluate(f, self.x[1])):
            return None
        fs = func_encode(self.params, f, self.rng, self.exp.sethss_backend)
        return [(fi, share_eval(fi, si)) for fi, si in zip(fs, self._shares)]


class AdaLessorOracles(_Oracles):
    """Adaptive lessor game with separate ordinary and starred key oracles."""
    kind = "ada-lessor"

    def begin(self, q_total: int):
        self.msk = ada_setup(128, q_total, self.rng, levels=self.exp.levels)
        self.book = _LessorBook()
        self.plain: list[Circuit] = []
        self.x = None

    def _dist(self, f) -> bool:
        return not np.array_equal(evaluate(f, self.x[0]), evaluate(f, self.x[1]))

    def enc(self, x):
        self.book.n_enc += 1
        return ada_enc(self.msk, x, self.rng)

    def kg(self, f, n: int):
        if self.x is not None and self._dist(f):
            raise ProtocolViolation("distinguishing key requested after the challenge")
        self.plain.append(f)
        return ada_kg(self.msk, f, n, self.store, self.rng)[0]

    def kg_star(self, f, n: int):
        if self.x is not None:
            raise ProtocolViolation("starred keys only before the challenge")
        key, vk = ada_kg(self.msk, f, n, self.store, self.rng)
        self.book.add(f, n, vk)
        return key

    def vrfy(self, f, cert) -> bool:
        if self.x is not None:
            raise ProtocolViolation("verification only before the challenge")
        ok = self.book.verify(f, cert, ada_vrfy, count_bound=True)
        self.accepted += ok
        return ok

    def challenge(self, x0, x1):
        self.x = (as_bits(x0), as_bits(x1))
        if self.book.pending(lambda f: True) or any(self._dist(f) for f in self.plain):
            raise ChallengerZero("a starred key is outstanding or an ordinary key distinguishes")
        return ada_enc(self.msk, self.x[self._coin], self.rng)

    def dec(self, key, ct):
        return ada_dec(key, ct, self.store)

    def cert(self, key):
        return ada_cert(key, self.store)


class RealSimOracles(_Oracles):
    """Real (coin 0) or simulated (coin 1) world of the simulation-security game."""
    kind = "real-vs-sim"

    def begin(self, q_total: int):
        self.msk = sim_setup(128, q_total, self.rng, q_pre=self.exp.q_pre, levels=self.exp.levels)
        self.book = _LessorBook()
        self.pre: list = []
        self.x_star = None
        self.sim: Optional[Simulator] = None

    def enc(self, x):
        self.book.n_enc += 1
        return sim_enc(self.msk, x, self.rng)

    def kg(self, f, n: int):
        if self.x_star is None:
            if len(self.pre) >= self.exp.q_pre:
                raise ProtocolViolation(f"at most {self.exp.q_pre} ordinary keys before the challenge")
            key, _ = sim_kg(self.msk, f, n, self.store, self.rng)
            self.pre.append(key)
            return key
        if self._coin:
            return self.sim.s_kg(f, n, evaluate(f, self.x_star), self.store, self.rng)[0]
        return sim_kg(self.msk, f, n, self.store, self.rng)[0]

    def kg_star(self, f, n: int):
        if self.x_star is not None:
            raise ProtocolViolation("starred keys only before the challenge")
        key, vk = sim_kg(self.msk, f, n, self.store, self.rng, starred=True)
        self.book.add(f, n, vk)
        return key

    def vrfy(self, f, cert) -> bool:
        if self.x_star is not None:
            raise ProtocolViolation("verification only before the challenge")
        ok = self.book.verify(f, cert, sim_vrfy, count_bound=True)
        self.accepted += ok
        return ok

    def challenge(self, x_star):
        if self.book.pending(lambda f: True):
            raise ChallengerZero("a starred key is outstanding")
        self.x_star = as_bits(x_star)
        if not self._coin:
            return sim_enc(self.msk, self.x_star, self.rng)
        self.sim = Simulator(self.msk)
        records = [KeyRecord(k.f, k.n, k.tau, evaluate(k.f, self.x_star)) for k in self.pre]
        return self.sim.s_enc(records, self.rng)

    def dec(self, key, ct):
        return sim_dec(key, ct, self.store)

    def cert(self, key):
        return sim_cert(key, self.store)


ORACLES = {cls.kind: cls for cls in (SelLessorOracles, IndexedLessorOracles, CpaCdOracles, CvaCdOracles,
                                     SetHssOracles, AdaLessorOracles, RealSimOracles)}


# ================================================================ helpers

def cd_ciphertexts(obj):
    """Every CD ciphertext inside a (leased) key or ciphertext."""
    if isinstance(obj, CDCiphertext):
        yield obj
    elif dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        for f in dataclasses.fields(obj):
            yield from cd_ciphertexts(getattr(obj, f.name))
    elif isinstance(obj, (tuple, list)):
        for item in obj:
            yield from cd_ciphertexts(item)


def clone_key(obj, store: QStore):
    """A twin of ``obj`` on freshly cloned qubits (needs the unsafe-clone capability)."""
    twin = unpack(pack(obj))
    for ct in cd_ciphertexts(twin):
        ct.qubits = store.clone_many(ct.qubits)
    return twin


def _guess(o) -> int:
    return int(o.rng.integers(0, 2))


# ============================================================== adversaries

class Adversary:
    """Dispatches to ``play_<experiment>``; unsupported experiments raise ParameterError."""
    name = "adversary"
    needs_clone = False

    def play(self, o) -> int:
        fn = getattr(self, "play_" + o.kind.replace("-", "_"), None)
        if fn is None:
            raise ParameterError(f"adversary {self.name!r} does not play {o.kind!r}")
        return int(fn(o))


class HonestLessee(Adversary):
    """Asks for a distinguishing key, returns it honestly, then guesses."""
    name = "honest"

    def play_sel_lessor(self, o):
        o.begin(1, X0, X1)
        key = o.kg(DISTINGUISHING_F, 1)
        o.vrfy(DISTINGUISHING_F, o.cert(key))
        o.challenge()
        return _guess(o)

    def play_sel_s_lessor(self, o):
        o.begin(1, o.exp.index_space, 1, X0, X1)
        key = o.kg(DISTINGUISHING_F)
        o.vrfy(DISTINGUISHING_F, o.cert(key))
        o.challenge()
        return _guess(o)

    def play_ada_lessor(self, o):
        o.begin(2)
        key = o.kg_star(DISTINGUISHING_F, 1)
        o.vrfy(DISTINGUISHING_F, o.cert(key))
        o.challenge(X0, X1)
        return _guess(o)

    def play_ind_cpa_cd(self, o):
        ct = o.challenge(bytes(16), b"\xff" * 16)
        o.submit(cd_ske.r_del(ct, o.store))
        return _guess(o)

    def play_ind_cva_cd(self, o):
        ct = o.challenge(bytes(16), b"\xff" * 16)
        o.verify(cd_ske.r_del(ct, o.store))
        return _guess(o)


class KeepKey(Adversary):
    """Keeps the distinguishing key and asks for the challenge anyway."""
    name = "keep-key"

    def play_sel_lessor(self, o):
        o.begin(1, X0, X1)
        key = o.kg(DISTINGUISHING_F, 1)
        ct = o.challenge()
        return int(o.dec(key, ct)[0])

    def play_sel_s_lessor(self, o):
        o.begin(1, o.exp.index_space, 1, X0, X1)
        key = o.kg(DISTINGUISHING_F)
        ct = o.challenge()
        return int(o.dec(key, ct)[0])

    def play_ada_lessor(self, o):
        o.begin(2)
        key = o.kg_star(DISTINGUISHING_F, 1)
        ct = o.challenge(X0, X1)
        return int(o.dec(key, ct)[0])


class KeepTranscript(Adversary):
    """Deletes honestly but keeps every classical byte and tries to use it afterwards."""
    name = "keep-transcript"

    def _replay(self, o, kept: bytes, ct) -> int:
        try:
            return int(o.dec(unpack(kept), ct)[0])
        except LinearityError:
            return _guess(o)

    def play_sel_lessor(self, o):
        o.begin(1, X0, X1)
        key = o.kg(DISTINGUISHING_F, 1)
        kept = pack(key)
        o.vrfy(DISTINGUISHING_F, o.cert(key))
        return self._replay(o, kept, o.challenge())

    def play_sel_s_lessor(self, o):
        o.begin(1, o.exp.index_space, 1, X0, X1)
        key = o.kg(DISTINGUISHING_F)
        kept = pack(key)
        o.vrfy(DISTINGUISHING_F, o.cert(key))
        return self._replay(o, kept, o.challenge())

    def play_ada_lessor(self, o):
        o.begin(2)
        key = o.kg_star(DISTINGUISHING_F, 1)
        kept = pack(key)
        o.vrfy(DISTINGUISHING_F, o.cert(key))
        return self._replay(o, kept, o.challenge(X0, X1))

    def play_ind_cpa_cd(self, o):
        m1 = b"\xff" * 16
        ct = o.challenge(bytes(16), m1)
        cert = cd_ske.r_del(ct, o.store)
        sk = o.submit(cert)
        if sk is None:
            return _guess(o)
        # with the key, use the certificate bits as a guess for the destroyed pad positions
        otk = cd_ske.unwrap(sk, ct)
        pad = cd_ske.extract(otk.seed, as_bits(cert.bits)[otk.theta == 0])[:ct.c.size]
        try:
            m = ske.open_(bits_to_bytes(ct.c ^ pad), ct.body)
        except FesklError:
            return _guess(o)
        return int(m == m1)


class BasisGuesser(Adversary):
    """Measures in the computational basis and submits that as a certificate."""
    name = "basis-guesser"

    def _cert(self, o, ct):
        return Certificate(o.store.measure_many(ct.qubits, COMPUTATIONAL))

    def play_ind_cpa_cd(self, o):
        ct = o.challenge(bytes(16), b"\xff" * 16)
        o.submit(self._cert(o, ct))
        return _guess(o)

    def play_ind_cva_cd(self, o):
        ct = o.challenge(bytes(16), b"\xff" * 16)
        o.verify(self._cert(o, ct))
        return _guess(o)

    def play_sel_lessor(self, o):
        o.begin(1, X0, X1)
        key = o.kg(DISTINGUISHING_F, 1)
        certs = tuple(tuple(Certificate(o.store.measure_many(e.qubits, COMPUTATIONAL)) for e in k.entries)
                      for k in key.key.keys)
        o.vrfy(DISTINGUISHING_F, certs)
        o.challenge()
        return _guess(o)


class UnsafeClone(Adversary):
    """Clones the key before deleting it.  Needs the counterfactual cloning capability."""
    name = "unsafe-clone"
    needs_clone = True

    def play_sel_lessor(self, o):
        o.begin(1, X0, X1)
        key = o.kg(DISTINGUISHING_F, 1)
        twin = clone_key(key, o.store)
        o.vrfy(DISTINGUISHING_F, o.cert(key))
        return int(o.dec(twin, o.challenge())[0])

    def play_sel_s_lessor(self, o):
        o.begin(1, o.exp.index_space, 1, X0, X1)
        key = o.kg(DISTINGUISHING_F)
        twin = clone_key(key, o.store)
        o.vrfy(DISTINGUISHING_F, o.cert(key))
        return int(o.dec(twin, o.challenge())[0])

    def play_ada_lessor(self, o):
        o.begin(2)
        key = o.kg_star(DISTINGUISHING_F, 1)
        twin = clone_key(key, o.store)
        o.vrfy(DISTINGUISHING_F, o.cert(key))
        return int(o.dec(twin, o.challenge(X0, X1))[0])

    def play_ind_cpa_cd(self, o):
        m1 = b"\xff" * 16
        ct = o.challenge(bytes(16), m1)
        twin = clone_key(ct, o.store)
        sk = o.submit(cd_ske.r_del(ct, o.store))
        return _guess(o) if sk is None else int(r_dec(sk, twin, o.store) == m1)


class CloningDistinguisher(Adversary):
    """A perfect chosen-verification adversary: ``q_vrfy - 1`` junk certificates, then the real one."""
    name = "cloning-distinguisher"
    needs_clone = True

    def __init__(self, q_vrfy: int = 3):
        self.q_vrfy = q_vrfy

    def play_ind_cva_cd(self, o):
        m1 = b"\xff" * 16
        ct = o.challenge(bytes(16), m1)
        twin = clone_key(ct, o.store)
        cert = cd_ske.r_del(ct, o.store)
        for _ in range(self.q_vrfy - 1):
            o.verify(Certificate(o.rng.integers(0, 2, len(ct.qubits), dtype=np.uint8)))
        sk = o.verify(cert)
        return _guess(o) if sk is None else int(r_dec(sk, twin, o.store) == m1)


class PieceGuesser(Adversary):
    """Looks only at the revealed input shares, which miss the piece of ``e*``."""
    name = "piece-guesser"

    def play_sethss_sel_ind(self, o):
        shares = o.begin(0, X0, X1)
        pieces = {e: b for s in shares.values() for e, b in s.pieces}
        if len(pieces) == o.params.ell:      # e* covered by a revealed share cannot happen
            raise AssertionError("revealed shares cover e*")
        return _guess(o)


class LabelInverter(Adversary):
    """Counterfactual against the label-table instantiation.

    The oracle returns every function share with its evaluation; matching
    each returned label against the share's table gives back every piece.
    """
    name = "label-inverter"

    def play_sethss_sel_ind(self, o):
        o.begin(0, X0, X1)
        const = Circuit(4, 1, (Gate(CONST0),), (4,))
        pieces = {}
        for fi, ev in o.func_encode(const):
            table = dict(fi.tables)
            for e, payload in ev.blocks:
                if isinstance(payload, np.ndarray):
                    pieces[e] = payload
                else:
                    pieces[e] = np.array([int(lab == pair[1]) for lab, pair in zip(payload, table[e])], np.uint8)
        x = np.bitwise_xor.reduce(np.array([pieces[e] for e in range(o.params.ell)]), axis=0)
        return int(np.array_equal(x, X1))


class ScriptedProbe(Adversary):
    """Random key script; outputs 1 iff every decryption of the challenge equals ``f(x*)``.

    Script choices come from ``script_seed`` (or the trial rng), so the same
    script can be replayed in both worlds; ``outputs`` keeps the decryptions.
    """
    name = "script"

    def __init__(self, script_seed: Optional[int] = None):
        self.script_seed = script_seed
        self.outputs: list = []

    def play_real_vs_sim(self, o):
        rng = np.random.default_rng(self.script_seed if self.script_seed is not None
                                    else int(o.rng.integers(0, 2**63)))
        o.begin(8)
        pre = [random_circuit(rng, 4, int(rng.integers(0, 7)), 1)
               for _ in range(int(rng.integers(0, o.exp.q_pre + 1)))]
        keys = [o.kg(f, int(rng.integers(1, 4))) for f in pre]
        for _ in range(int(rng.integers(0, 2))):
            f = random_circuit(rng, 4, 4, 1)
            k = o.kg_star(f, 2)
            o.vrfy(f, o.cert(k))
        x_star = rng.integers(0, 2, 4, dtype=np.uint8)
        ct = o.challenge(x_star)
        post = [random_circuit(rng, 4, int(rng.integers(0, 7)), 1) for _ in range(int(rng.integers(0, 2)))]
        keys += [o.kg(f, 1) for f in post]
        self.outputs = [tuple(int(b) for b in o.dec(k, ct)) for k in keys]
        wanted = [tuple(int(b) for b in evaluate(f, x_star)) for f in pre + post]
        return int(self.outputs == wanted)


def canonical_adversaries() -> dict[str, type]:
    return {cls.name: cls for cls in (HonestLessee, KeepKey, KeepTranscript, BasisGuesser, UnsafeClone,
                                      CloningDistinguisher, PieceGuesser, LabelInverter, ScriptedProbe)}


# ================================================================== report

def wilson(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = k / n
    den = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


def newcombe(k1: int, n1: int, k0: int, n0: int) -> tuple[float, float]:
    """Hybrid-score interval for ``k1/n1 - k0/n0`` built from the two Wilson intervals."""
    p1 = k1 / n1 if n1 else 0.0
    p0 = k0 / n0 if n0 else 0.0
    l1, u1 = wilson(k1, n1)
    l0, u0 = wilson(k0, n0)
    d = p1 - p0
    return d - math.hypot(p1 - l1, u0 - p0), d + math.hypot(u1 - p1, p0 - l0)


@dataclass
class AdvantageReport:
    experiment: str
    adversary: str
    trials: int
    seed: int
    n0: int = 0
    ones0: int = 0
    n1: int = 0
    ones1: int = 0
    successes: int = 0       # trials with output == coin
    zeroed: int = 0          # trials the challenger ended with 0
    accepted: int = 0        # trials with at least one accepted certificate
    aborted: int = 0         # trials a reduction aborted

    @property
    def advantage(self) -> float:
        p1 = self.ones1 / self.n1 if self.n1 else 0.0
        p0 = self.ones0 / self.n0 if self.n0 else 0.0
        return p1 - p0

    @property
    def interval(self) -> tuple[float, float]:
        return newcombe(self.ones1, self.n1, self.ones0, self.n0)

    @property
    def success_interval(self) -> tuple[float, float]:
        return wilson(self.successes, self.trials)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["advantage"] = self.advantage
        d["interval"] = list(self.interval)
        return d

    def to_text(self) -> str:
        lo, hi = self.interval
        return "\n".join([
            f"experiment {self.experiment}",
            f"adversary {self.adversary}",
            f"trials {self.trials}",
            f"seed {self.seed}",
            f"advantage {self.advantage:+.4f}",
            f"interval95 [{lo:+.4f}, {hi:+.4f}]",
            f"success_rate {self.successes / max(self.trials, 1):.4f}",
            f"challenger_zero {self.zeroed}",
            f"accepted {self.accepted}",
            f"aborted {self.aborted}",
        ])


AdversaryLike = Union[str, type, Callable[[], Any], Any]


def _factory(adv: AdversaryLike) -> tuple[Callable[[], Any], str]:
    if isinstance(adv, str):
        catalog = canonical_adversaries()
        if adv not in catalog:
            raise ParameterError(f"unknown adversary {adv!r}; choose from {', '.join(catalog)}")
        return catalog[adv], adv
    if isinstance(adv, type):
        return adv, getattr(adv, "name", adv.__name__)
    if hasattr(adv, "play"):
        return (lambda: adv), getattr(adv, "name", type(adv).__name__)
    return adv, getattr(adv, "__name__", "adversary")


def play_trial(exp: Experiment, adversary, coin: int, rng: np.random.Generator) -> tuple[int, bool, Any]:
    """One trial: ``(output, challenger_zeroed, oracles)``."""
    store = QStore(np.random.default_rng(rng.integers(0, 2**63)),
                   allow_unsafe_clone=bool(getattr(adversary, "needs_clone", False)))
    o = ORACLES[exp.name](exp, coin, rng, store)
    try:
        out = int(adversary.play(o))
    except ChallengerZero:
        return 0, True, o
    if out not in (0, 1):
        raise ProtocolViolation(f"adversary output {out!r} is not a bit")
    return out, False, o


def run(experiment: Union[str, Experiment], adversary: AdversaryLike, trials: int, seed: int = 0,
        **config) -> AdvantageReport:
    exp = experiment if isinstance(experiment, Experiment) else Experiment(experiment, **config)
    make, name = _factory(adversary)
    report = AdvantageReport(exp.name, name, trials, seed)
    for child in np.random.SeedSequence(seed).spawn(trials):
        rng = np.random.default_rng(child)
        coin = int(rng.integers(0, 2))
        adv = make()
        out, zeroed, o = play_trial(exp, adv, coin, rng)
        if coin:
            report.n1 += 1
            report.ones1 += out
        else:
            report.n0 += 1
            report.ones0 += out
        report.successes += out == coin
        report.zeroed += zeroed
        report.accepted += o.accepted > 0
        report.aborted += bool(getattr(adv, "aborted", False))
    return report


def cva_wrapper(inner: AdversaryLike, q_vrfy: int) -> Callable[[], CvaFromCpa]:
    """Factory for the CVA-to-CPA reduction around a fresh inner adversary per trial."""
    make, name = _factory(inner)

    def build():
        w = CvaFromCpa(make(), q_vrfy)
        w.name = f"cva-wrapper({name})"
        return w
    build.__name__ = f"cva-wrapper({name})"
    return build

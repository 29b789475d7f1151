"""Bounded-collusion secret-key functional encryption.

Two backends share one interface:

``crypto``
    ``q`` independent one-key instances selected by a stateful counter.  A
    one-key instance holds a key pair ``(k[t,0], k[t,1])`` per bit ``t`` of
    the fixed-length circuit encoding.  Encryption garbles the universal
    circuit, hands out the active labels for ``x`` and seals every encoding
    label under the matching per-bit key.  A function key is the list of keys
    selected by ``encode(f)``, so it opens exactly one label per position.

``reference``
    Trusted evaluation for layers whose functions are native programs rather
    than circuits.  The ciphertext is an authenticated encryption of ``x``
    and the function key carries the decryption key and the program.  It is
    correct but offers no function-hiding or input-hiding guarantee.

Master keys are derived from a 16-byte seed, so callers can rebuild an
instance from PRF output.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional, Protocol

import numpy as np

from . import ske
from .bits import as_bits
from .circuit_ir import Circuit, CircuitBudget, encode, universal
from .errors import AuthError, BudgetError, DecodeError, ParameterError, QuotaError, ShapeError
from .garbling import LABEL_BYTES, GarbledCircuit, eval_gc, garble
from .prf import kdf
from .serialization import pack, register, unpack

CRYPTO, REFERENCE = "crypto", "reference"
BACKENDS = (CRYPTO, REFERENCE)
SEED_BYTES = 16


class Program(Protocol):
    """Anything with fixed input/output widths that maps bit-vectors to bit-vectors."""
    n_in: int
    n_out: int

    def __call__(self, x) -> np.ndarray: ...


@register
@dataclass
class SkfeMasterKey:
    backend: str
    q: int
    seed: bytes
    n_in: int
    n_gates_max: int = 8
    n_out: int = 1
    lam: int = 128
    counter: int = 0

    @property
    def budget(self) -> CircuitBudget:
        return CircuitBudget(self.n_in, self.n_gates_max, self.n_out)

    def _bit_key(self, sub: int, t: int, v: int) -> bytes:
        return kdf(self.seed, b"bit", sub.to_bytes(4, "little"), t.to_bytes(4, "little"), bytes([v]))

    def _ref_key(self) -> bytes:
        return kdf(self.seed, b"reference")


@register
@dataclass(frozen=True)
class SkfeFunctionKey:
    backend: str
    index: int
    bits: Optional[bytes]          # crypto: encode(f) as one byte per bit
    keys: tuple                    # crypto: one SKE key per encoding bit
    program: Any = None            # reference: the function itself
    k_enc: Optional[bytes] = None  # reference: ciphertext key

    def to_bytes(self) -> bytes:
        return pack(self)

    @staticmethod
    def from_bytes(data: bytes) -> "SkfeFunctionKey":
        obj = unpack(data)
        if not isinstance(obj, SkfeFunctionKey):
            raise ShapeError("not a function key")
        return obj


@register
@dataclass(frozen=True)
class SkfePayload:
    """One sub-instance's share of a crypto ciphertext."""
    gc: bytes
    x_labels: tuple
    sealed: tuple   # per encoding position: (seal under k[t,0] of label0, seal under k[t,1] of label1)


@register
@dataclass(frozen=True)
class SkfeCiphertext:
    backend: str
    payloads: tuple = ()
    sealed_x: Optional[bytes] = None
    n_in: int = 0

    def to_bytes(self) -> bytes:
        return pack(self)


def skfe_setup(lam: int, q: int, backend: str = CRYPTO, rng: Optional[np.random.Generator] = None, *,
               n_in: int = 4, n_gates_max: int = 8, n_out: int = 1,
               seed: Optional[bytes] = None) -> SkfeMasterKey:
    if q < 1:
        raise ParameterError("collusion bound q must be at least 1")
    if backend not in BACKENDS:
        raise ParameterError(f"unknown backend {backend!r}")
    if seed is None:
        if rng is None:
            raise ParameterError("need an rng or an explicit seed")
        seed = rng.bytes(SEED_BYTES)
    return SkfeMasterKey(backend, q, bytes(seed), n_in, n_gates_max, n_out, lam)


def skfe_kg(msk: SkfeMasterKey, f: Program) -> SkfeFunctionKey:
    if msk.counter >= msk.q:
        raise QuotaError(f"collusion bound q={msk.q} exhausted")
    if msk.backend == CRYPTO:
        if not isinstance(f, Circuit):
            raise BudgetError("the crypto backend only accepts circuits")
        enc = encode(f, msk.budget)
        sub = msk.counter
        keys = tuple(msk._bit_key(sub, t, int(v)) for t, v in enumerate(enc))
        fsk = SkfeFunctionKey(CRYPTO, sub, enc.tobytes(), keys)
    else:
        if f.n_in != msk.n_in:
            raise ShapeError(f"program takes {f.n_in} bits, instance encrypts {msk.n_in}")
        fsk = SkfeFunctionKey(REFERENCE, msk.counter, None, (), f, msk._ref_key())
    msk.counter += 1
    return fsk


def skfe_enc(msk: SkfeMasterKey, x, rng: np.random.Generator) -> SkfeCiphertext:
    x = as_bits(x)
    if x.size != msk.n_in:
        raise ShapeError(f"expected {msk.n_in} plaintext bits, got {x.size}")
    if msk.backend == REFERENCE:
        return SkfeCiphertext(REFERENCE, sealed_x=ske.seal(msk._ref_key(), x.tobytes(), rng), n_in=x.size)
    budget = msk.budget
    u = universal(budget.n_in, budget.n_gates_max, budget.n_out)
    L = budget.length
    payloads = []
    for sub in range(msk.q):
        gc, pairs = garble(u, rng)
        x_labels = tuple(pairs[L + i].select(int(b)) for i, b in enumerate(x))
        sealed = tuple((ske.seal(msk._bit_key(sub, t, 0), pairs[t].label0, rng),
                        ske.seal(msk._bit_key(sub, t, 1), pairs[t].label1, rng)) for t in range(L))
        payloads.append(SkfePayload(gc.to_bytes(), x_labels, sealed))
    return SkfeCiphertext(CRYPTO, tuple(payloads), n_in=x.size)


def skfe_dec(fsk: SkfeFunctionKey, ct: SkfeCiphertext) -> np.ndarray:
    if fsk.backend != ct.backend:
        raise DecodeError("key and ciphertext come from different backends")
    if fsk.backend == REFERENCE:
        try:
            x = np.frombuffer(ske.open_(fsk.k_enc, ct.sealed_x), dtype=np.uint8)
        except AuthError:
            raise DecodeError("ciphertext was not produced under this key's master key") from None
        return as_bits(fsk.program(x))
    if not 0 <= fsk.index < len(ct.payloads):
        raise DecodeError("ciphertext has no payload for this key's sub-instance")
    pl = ct.payloads[fsk.index]
    bits = np.frombuffer(fsk.bits, dtype=np.uint8)
    labels = []
    for t, (k, v) in enumerate(zip(fsk.keys, bits)):
        try:
            label = ske.open_(k, pl.sealed[t][v])
        except AuthError:
            raise DecodeError("function key does not match this ciphertext") from None
        if len(label) != LABEL_BYTES:
            raise DecodeError("malformed label")
        labels.append(label)
    gc = GarbledCircuit.from_bytes(pl.gc)
    return eval_gc(gc, labels + list(pl.x_labels))

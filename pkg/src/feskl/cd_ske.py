"""Secret-key encryption with certified deletion over simulated BB84 qubits.

One-time scheme: a random string ``a`` is loaded into qubits, qubit ``j`` in
basis ``theta_j``.  The computational-basis positions feed a Toeplitz
extractor whose output masks the message; the Hadamard positions are the
verification key.  Deleting means measuring every qubit in the Hadamard
basis, which destroys the computational-basis positions.

Certificates are full Hadamard transcripts, so only the ``theta = 1``
positions are determined by the verification key.  Uniqueness is therefore
up to the masked equivalence of :func:`cert_canonical_eq`.

The reusable scheme is a KEM/DEM: each encryption draws a fresh one-time
key, one-time encrypts a 128-bit data key, wraps the one-time key under the
long-term key, and seals the message under the data key.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import ske
from .bits import as_bits, bits_to_bytes, bytes_to_bits
from .errors import ShapeError
from .qmem import HADAMARD, QStore
from .serialization import register

KAPPA_Q = 256
EXT_OUT = 128
SEED_BYTES = 16
DEM_KEY_BYTES = 16


def _eq_arrays(a, b) -> bool:
    return np.array_equal(np.asarray(a), np.asarray(b))


@register
@dataclass(frozen=True, eq=False)
class OtcdKey:
    theta: np.ndarray
    seed: bytes

    def __eq__(self, other):
        return isinstance(other, OtcdKey) and self.seed == other.seed and _eq_arrays(self.theta, other.theta)

    @property
    def weight(self) -> int:
        return int(self.theta.sum())

    def to_bytes(self) -> bytes:
        return len(self.theta).to_bytes(2, "little") + bits_to_bytes(self.theta) + self.seed

    @classmethod
    def from_bytes(cls, data: bytes) -> "OtcdKey":
        n = int.from_bytes(data[:2], "little")
        nb = (n + 7) // 8
        if len(data) != 2 + nb + SEED_BYTES:
            raise ShapeError("malformed one-time key")
        return cls(bytes_to_bits(data[2:2 + nb], n), data[2 + nb:])


@register
@dataclass(frozen=True, eq=False)
class CDVerificationKey:
    theta: np.ndarray
    a_check: np.ndarray

    def __eq__(self, other):
        return (isinstance(other, CDVerificationKey) and _eq_arrays(self.theta, other.theta)
                and _eq_arrays(self.a_check, other.a_check))


@register
@dataclass(eq=False)
class CDCiphertext:
    """Classical mask plus qubit handle ids; the reusable variant adds the wrapped key and DEM body."""
    c: np.ndarray
    qubits: np.ndarray
    wrapped_key: Optional[bytes] = None
    body: Optional[bytes] = None

    def __eq__(self, other):
        return (isinstance(other, CDCiphertext) and _eq_arrays(self.c, other.c)
                and _eq_arrays(self.qubits, other.qubits)
                and self.wrapped_key == other.wrapped_key and self.body == other.body)


@register
@dataclass(frozen=True, eq=False)
class Certificate:
    bits: np.ndarray

    def __eq__(self, other):
        return isinstance(other, Certificate) and _eq_arrays(self.bits, other.bits)


# ------------------------------------------------------------ one-time scheme

def ot_keygen(rng: np.random.Generator, kappa_q: int = KAPPA_Q) -> OtcdKey:
    lo, hi = kappa_q // 4, 3 * kappa_q // 4
    while True:
        theta = rng.integers(0, 2, kappa_q, dtype=np.uint8)
        if lo <= theta.sum() <= hi:
            return OtcdKey(theta, rng.bytes(SEED_BYTES))


def extract(seed: bytes, bits: np.ndarray, n_out: int = EXT_OUT) -> np.ndarray:
    """Seeded Toeplitz extractor: ``n_out`` bits from ``bits``."""
    bits = as_bits(bits)
    n = bits.size
    diag = bytes_to_bits(hashlib.shake_256(b"toeplitz" + seed + n.to_bytes(4, "little"))
                         .digest((n_out + n + 6) // 8), n_out + n - 1)
    # row i is diag[i : i+n] reversed, so entry (i, j) depends only on i - j
    matrix = sliding_window_view(diag, n)[:, ::-1]
    return (matrix.astype(np.int64) @ bits.astype(np.int64) & 1).astype(np.uint8)


def ot_enc(otk: OtcdKey, m, store: QStore, rng: np.random.Generator) -> tuple[CDVerificationKey, CDCiphertext]:
    m = as_bits(m)
    if m.size > EXT_OUT:
        raise ShapeError(f"one-time message longer than {EXT_OUT} bits")
    theta = otk.theta
    a = rng.integers(0, 2, theta.size, dtype=np.uint8)
    qubits = store.prepare_many(a, theta)
    pad = extract(otk.seed, a[theta == 0])[:m.size]
    return CDVerificationKey(theta.copy(), a[theta == 1]), CDCiphertext(m ^ pad, qubits)


def ot_dec(otk: OtcdKey, ct: CDCiphertext, store: QStore) -> np.ndarray:
    if len(ct.qubits) != otk.theta.size:
        raise ShapeError("ciphertext and key disagree on qubit count")
    a = store.measure_many(ct.qubits, otk.theta)
    pad = extract(otk.seed, a[otk.theta == 0])[:ct.c.size]
    return ct.c ^ pad


def delete(ct: CDCiphertext, store: QStore) -> Certificate:
    return Certificate(store.measure_many(ct.qubits, HADAMARD))


def vrfy(vk: CDVerificationKey, cert: Certificate) -> bool:
    bits = as_bits(cert.bits)
    if bits.size != vk.theta.size:
        raise ShapeError("certificate length does not match the verification key")
    return bool(np.array_equal(bits[vk.theta == 1], vk.a_check))


def cert_canonical_eq(vk: CDVerificationKey, cert1: Certificate, cert2: Certificate) -> bool:
    """Masked equality: do the certificates agree on every position the key checks?"""
    b1, b2 = as_bits(cert1.bits), as_bits(cert2.bits)
    if b1.size != vk.theta.size or b2.size != vk.theta.size:
        raise ShapeError("certificate length does not match the verification key")
    mask = vk.theta == 1
    return bool(np.array_equal(b1[mask], b2[mask]))


# ------------------------------------------------------------ reusable scheme

def r_keygen(rng: np.random.Generator) -> bytes:
    return ske.keygen(rng)


def r_enc(sk: bytes, m: bytes, store: QStore, rng: np.random.Generator) -> tuple[CDVerificationKey, CDCiphertext]:
    otk = ot_keygen(rng)
    k_dem = rng.bytes(DEM_KEY_BYTES)
    vk, ct = ot_enc(otk, bytes_to_bits(k_dem), store, rng)
    ct.wrapped_key = ske.seal(sk, otk.to_bytes(), rng)
    ct.body = ske.seal(k_dem, bytes(m), rng)
    return vk, ct


def unwrap(sk: bytes, ct: CDCiphertext) -> OtcdKey:
    """Recover the one-time key of a reusable ciphertext (raises AuthError on a wrong key)."""
    if ct.wrapped_key is None:
        raise ShapeError("not a reusable ciphertext")
    return OtcdKey.from_bytes(ske.open_(sk, ct.wrapped_key))


def r_dec(sk: bytes, ct: CDCiphertext, store: QStore) -> bytes:
    otk = unwrap(sk, ct)
    k_dem = bits_to_bytes(ot_dec(otk, ct, store))
    return ske.open_(k_dem, ct.body)


r_del = delete
r_vrfy = vrfy


# ------------------------------------------------------------ CVA from CPA

class _Abort(Exception):
    pass


class _CvaView:
    """The chosen-verification oracles the wrapper shows its inner adversary."""

    kind = "ind-cva-cd"

    def __init__(self, wrapper: "CvaFromCpa", cpa):
        self._w = wrapper
        self._cpa = cpa
        self.store = cpa.store
        self.rng = cpa.rng
        self._challenge = None
        self._certs: list[Certificate] = []
        self._sk: Optional[bytes] = None
        self._vk_star: Optional[CDVerificationKey] = None
        self._cert_star: Optional[Certificate] = None

    def enc(self, m: bytes):
        return self._cpa.enc(m)

    def challenge(self, m0: bytes, m1: bytes):
        self._challenge = self._cpa.challenge(m0, m1)
        return self._challenge

    def verify(self, cert: Certificate) -> Optional[bytes]:
        i = len(self._certs) + 1
        w = self._w
        if self._challenge is None or i > w.q_vrfy:
            self._certs.append(cert)
            return None
        if self._sk is not None:
            self._certs.append(cert)
            return self._sk if cert_canonical_eq(self._vk_star, cert, self._cert_star) else None
        if i < w.i_star:
            self._certs.append(cert)
            return None
        # i == i_star: without sk only literal repeats are detectable
        if any(cert == c for c in self._certs):
            raise _Abort
        self._certs.append(cert)
        sk = self._cpa.submit(cert)
        if sk is None:
            raise _Abort
        self._sk = sk
        self._cert_star = cert
        theta = unwrap(sk, self._challenge).theta
        self._vk_star = CDVerificationKey(theta, as_bits(cert.bits)[theta == 1])
        return sk


class CvaFromCpa:
    """Turns an IND-CVA-CD adversary into an IND-CPA-CD adversary.

    Guesses which verification query ``i*`` in ``1 .. q_vrfy + 1`` is the
    first accepted one, answers earlier queries with rejection, forwards the
    ``i*``-th to the CPA challenger and replays the secret key for masked
    repeats afterwards.  An abort is scored as a uniform guess.
    """

    def __init__(self, inner, q_vrfy: int, rng: Optional[np.random.Generator] = None):
        if q_vrfy < 0:
            raise ValueError("q_vrfy must be non-negative")
        self.inner = inner
        self.q_vrfy = q_vrfy
        self.rng = rng
        self.i_star = 1
        self.aborted = False

    @property
    def needs_clone(self) -> bool:
        return getattr(self.inner, "needs_clone", False)

    def play(self, cpa) -> int:
        rng = self.rng if self.rng is not None else cpa.rng
        self.i_star = int(rng.integers(1, self.q_vrfy + 2))
        self.aborted = False
        try:
            return int(self.inner.play(_CvaView(self, cpa)))
        except _Abort:
            self.aborted = True
            return int(rng.integers(0, 2))

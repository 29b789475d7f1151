"""Symmetric encryption used throughout the stack.

Two flavours:

* ``seal``/``open_``: authenticated encryption of byte strings (SHAKE-256
  keystream, HMAC-SHA256 tag).  Wrong keys raise :class:`AuthError`.
* ``E``/``D``: bit-level encryption with pseudorandom ciphertexts,
  ``E(K, m) = r || m xor SHAKE(K || r)``.  Decryption never fails, which is
  what the trapdoor branches of the keyed programs need.
"""
from __future__ import annotations

import hashlib
import hmac

import numpy as np

from .bits import as_bits, bytes_to_bits
from .errors import AuthError

KEY_BYTES = 16
NONCE_BYTES = 16
TAG_BYTES = 16
PRCT_NONCE_BITS = 128


def keygen(rng: np.random.Generator) -> bytes:
    return rng.bytes(KEY_BYTES)


def _stream(key: bytes, nonce: bytes, n: int) -> bytes:
    return hashlib.shake_256(b"ske-ks" + key + nonce).digest(n)


def _xor(a: bytes, b: bytes) -> bytes:
    return np.bitwise_xor(np.frombuffer(a, np.uint8), np.frombuffer(b, np.uint8)).tobytes()


def seal(key: bytes, msg: bytes, rng: np.random.Generator) -> bytes:
    nonce = rng.bytes(NONCE_BYTES)
    body = _xor(msg, _stream(key, nonce, len(msg))) if msg else b""
    tag = hmac.digest(key, b"ske-tag" + nonce + body, "sha256")[:TAG_BYTES]
    return nonce + body + tag


def open_(key: bytes, ct: bytes) -> bytes:
    if len(ct) < NONCE_BYTES + TAG_BYTES:
        raise AuthError("ciphertext too short")
    nonce, body, tag = ct[:NONCE_BYTES], ct[NONCE_BYTES:-TAG_BYTES], ct[-TAG_BYTES:]
    want = hmac.digest(key, b"ske-tag" + nonce + body, "sha256")[:TAG_BYTES]
    if not hmac.compare_digest(tag, want):
        raise AuthError("ciphertext authentication failed")
    return _xor(body, _stream(key, nonce, len(body))) if body else b""


def prct_length(n_bits: int) -> int:
    return PRCT_NONCE_BITS + n_bits


def _pad_bits(key: bytes, r: np.ndarray, n: int) -> np.ndarray:
    seed = np.packbits(r, bitorder="little").tobytes()
    return bytes_to_bits(hashlib.shake_256(b"prct" + key + seed).digest((n + 7) // 8), n)


def E(key: bytes, m, rng: np.random.Generator) -> np.ndarray:
    m = as_bits(m)
    r = rng.integers(0, 2, PRCT_NONCE_BITS, dtype=np.uint8)
    return np.concatenate([r, m ^ _pad_bits(key, r, m.size)])


def D(key: bytes, ct) -> np.ndarray:
    ct = as_bits(ct)
    r, body = ct[:PRCT_NONCE_BITS], ct[PRCT_NONCE_BITS:]
    return body ^ _pad_bits(key, r, body.size)

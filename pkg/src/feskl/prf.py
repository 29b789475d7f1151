"""GGM pseudorandom function over SHA-256.

Inputs are integers in a fixed-width domain (64 bits unless the caller needs
more), so the tree depth and therefore the cost of one evaluation does not
depend on how large the index space actually is.
"""
from __future__ import annotations

import hashlib
import hmac

DEFAULT_DOMAIN_BITS = 64


def _prg(seed: bytes, bit: int) -> bytes:
    return hashlib.sha256(bytes((bit,)) + seed).digest()


class GGM:
    def __init__(self, key: bytes, domain_bits: int = DEFAULT_DOMAIN_BITS):
        if domain_bits <= 0:
            raise ValueError("domain_bits must be positive")
        self.key = bytes(key)
        self.domain_bits = domain_bits

    @classmethod
    def for_domain(cls, key: bytes, size: int) -> "GGM":
        """PRF whose domain covers ``0 .. size`` inclusive."""
        return cls(key, max(DEFAULT_DOMAIN_BITS, int(size).bit_length()))

    def __call__(self, x: int) -> bytes:
        if not 0 <= x < (1 << self.domain_bits):
            raise ValueError("PRF input outside the domain")
        s = hashlib.sha256(b"ggm-root" + self.key).digest()
        for i in range(self.domain_bits - 1, -1, -1):
            s = _prg(s, (x >> i) & 1)
        return s

    def expand(self, x: int, label: bytes, n: int) -> bytes:
        """``n`` pseudorandom bytes bound to ``x`` and a domain-separation label."""
        return hashlib.shake_256(b"ggm-exp" + label + self(x)).digest(n)

    def expand_many(self, x: int, labels, n: int) -> list[bytes]:
        """:meth:`expand` for several labels with a single tree walk."""
        node = self(x)
        return [hashlib.shake_256(b"ggm-exp" + label + node).digest(n) for label in labels]


def kdf(key: bytes, *parts: bytes, n: int = 16) -> bytes:
    """HMAC-SHA256 key derivation for fixed-size sub-keys."""
    msg = b"".join(len(p).to_bytes(2, "little") + p for p in parts)
    out = hmac.digest(key, msg, "sha256")
    while len(out) < n:
        out += hmac.digest(key, out[-32:] + msg, "sha256")
    return out[:n]

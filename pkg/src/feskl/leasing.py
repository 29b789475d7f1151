"""The leasing stack: index-based, SetHSS-amplified and dynamic-bound SKFE-SKL.

Index layer
    A single PRF key stands for ``N`` base SKFE instances.  Index ``j``
    expands to a seed for its base master key and a reusable CD-SKE key.  A
    leased key holds one CD ciphertext per index, each wrapping the
    serialized base function key; a ciphertext names one index and carries
    that index's CD key.

Amplified layer
    ``m`` index-layer instances, one per SetHSS party.  Party ``i``'s leased
    function is :class:`FProgram`, which evaluates the party's function share
    on its input share, or, when the flag bit of the payload is set, decrypts
    a hardwired ciphertext under the key supplied in the payload.  Honest
    ciphertexts pick a fresh uniform index per party and always clear the
    flag.

Dynamic layer
    Levels ``1 .. levels`` with availability bounds ``2^k``, each materialized
    on first use from a seed.  A key for bound ``n`` lives at the smallest
    level whose bound covers ``n``; a ciphertext has one component per level.

Decryption measures the CD ciphertext of the index it uses, so a leased key
decrypts at most one ciphertext per index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import ske
from .base_skfe import (
    CRYPTO, REFERENCE, SkfeCiphertext, SkfeFunctionKey, SkfeMasterKey, skfe_dec, skfe_enc, skfe_kg, skfe_setup,
)
from .bits import as_bits, bits_to_bytes, bytes_to_bits
from .cd_ske import CDCiphertext, Certificate, r_dec, r_enc, vrfy
from .errors import BoundError, BudgetError, IndexRangeError, ParameterError, QuotaError, ShapeError
from .prf import GGM, kdf
from .qmem import HADAMARD, QStore
from .serialization import register
from .sethss import (
    GARBLED, FunctionShare, InputShare, SetParams, ShareEvaluation, decode, func_encode, inp_encode, set_gen,
    share_eval,
)

KEY_BYTES = 16
ENUM_LIMIT = 1 << 12       # largest index space a key generation will enumerate
SKL_LEVELS = 20


def _consume_all(store: QStore, cts: Sequence[CDCiphertext]) -> list[Certificate]:
    """Hadamard-measure every CD ciphertext in one batch, so a failure consumes nothing."""
    if not cts:
        return []
    ids = np.concatenate([np.asarray(ct.qubits, dtype=np.int64) for ct in cts])
    bits = store.measure_many(ids, HADAMARD)
    out, pos = [], 0
    for ct in cts:
        k = len(ct.qubits)
        out.append(Certificate(bits[pos:pos + k]))
        pos += k
    return out


# ================================================================ index layer

@register
@dataclass
class IndexedMsk:
    q: int
    N: int
    K: bytes
    backend: str = CRYPTO
    n_in: int = 4
    n_gates_max: int = 8
    n_out: int = 1
    lam: int = 128
    issued: int = 0

    def prf(self) -> GGM:
        return GGM.for_domain(self.K, self.N)

    def material(self, j: int) -> tuple[SkfeMasterKey, bytes]:
        """Base master key and CD key of index ``j``, rebuilt from the PRF."""
        if not 1 <= j <= self.N:
            raise IndexRangeError(f"index {j} outside 1..{self.N}")
        r, w = self.prf().expand_many(j, (b"r", b"w"), KEY_BYTES)
        msk = skfe_setup(self.lam, self.q, self.backend, seed=r,
                         n_in=self.n_in, n_gates_max=self.n_gates_max, n_out=self.n_out)
        msk.counter = self.issued
        return msk, w


@register
@dataclass
class LeasedKey:
    entries: tuple      # CDCiphertext per index 1..N

    @property
    def qubits(self) -> np.ndarray:
        return np.concatenate([np.asarray(e.qubits, dtype=np.int64) for e in self.entries])


@register
@dataclass(frozen=True)
class LeasedVk:
    vks: tuple          # CDVerificationKey per index


@register
@dataclass(frozen=True)
class IndexedCiphertext:
    j: int
    ct: SkfeCiphertext
    cd_sk: bytes


def i_setup(lam: int, q: int, N: int, rng: np.random.Generator, *, backend: str = CRYPTO,
            n_in: int = 4, n_gates_max: int = 8, n_out: int = 1) -> IndexedMsk:
    if N < 1:
        raise ParameterError("index space must be nonempty")
    if q < 1:
        raise ParameterError("collusion bound q must be at least 1")
    return IndexedMsk(q, int(N), rng.bytes(KEY_BYTES), backend, n_in, n_gates_max, n_out, lam)


def i_kg(msk: IndexedMsk, f, store: QStore, rng: np.random.Generator) -> tuple[LeasedKey, LeasedVk]:
    if msk.issued >= msk.q:
        raise QuotaError(f"collusion bound q={msk.q} exhausted")
    if msk.N > ENUM_LIMIT:
        raise BudgetError(f"index space {msk.N} is too large to enumerate (limit {ENUM_LIMIT})")
    entries, vks = [], []
    for j in range(1, msk.N + 1):
        sub, w = msk.material(j)
        fsk = skfe_kg(sub, f)
        vk, ct = r_enc(w, fsk.to_bytes(), store, rng)
        entries.append(ct)
        vks.append(vk)
    msk.issued += 1
    return LeasedKey(tuple(entries)), LeasedVk(tuple(vks))


def i_enc(msk: IndexedMsk, j: int, x, rng: np.random.Generator) -> IndexedCiphertext:
    sub, w = msk.material(j)
    return IndexedCiphertext(j, skfe_enc(sub, x, rng), w)


def i_dec(fsk: LeasedKey, ct: IndexedCiphertext, store: QStore) -> np.ndarray:
    if not 1 <= ct.j <= len(fsk.entries):
        raise IndexRangeError(f"ciphertext index {ct.j} outside the leased key")
    raw = r_dec(ct.cd_sk, fsk.entries[ct.j - 1], store)
    return skfe_dec(SkfeFunctionKey.from_bytes(raw), ct.ct)


def i_cert(fsk: LeasedKey, store: QStore) -> tuple:
    return tuple(_consume_all(store, fsk.entries))


def i_vrfy(vk: LeasedVk, certs: Sequence[Certificate]) -> bool:
    if len(certs) != len(vk.vks):
        return False
    try:
        return all(vrfy(v, c) for v, c in zip(vk.vks, certs))
    except ShapeError:
        return False


# ============================================================ amplified layer

@register(memo=True)
@dataclass(eq=False)
class FProgram:
    """Party ``i``'s leased function.

    Input layout: the party's pieces (``len(elems) * piece_bits``), a
    ``KEY_BITS`` SKE key slot, then one flag bit.
    """
    share: FunctionShare
    sct: bytes           # packed bits of E(K, 0^n_out)
    elems: tuple
    piece_bits: int
    n_out: int

    KEY_BITS = 8 * ske.KEY_BYTES

    @property
    def s_bits(self) -> int:
        return len(self.elems) * self.piece_bits

    @property
    def n_in(self) -> int:
        return self.s_bits + self.KEY_BITS + 1

    def __call__(self, x) -> np.ndarray:
        x = as_bits(x)
        if x.size != self.n_in:
            raise ShapeError(f"payload has {x.size} bits, expected {self.n_in}")
        s, key, flag = x[:self.s_bits], x[self.s_bits:-1], int(x[-1])
        if flag:
            return ske.D(bits_to_bytes(key), bytes_to_bits(self.sct))
        n = self.piece_bits
        pieces = tuple((e, s[k * n:(k + 1) * n]) for k, e in enumerate(self.elems))
        return bytes_to_bits(share_eval(self.share, InputShare(self.share.i, pieces)).to_bytes())

    def __eq__(self, other):
        return (isinstance(other, FProgram) and self.share == other.share and self.elems == other.elems
                and self.sct == other.sct)


def payload(s_bits, key_bits=None, flag: int = 0) -> np.ndarray:
    """Fixed-width ``(pieces, key slot, flag)`` payload for an amplified sub-instance."""
    key = np.zeros(FProgram.KEY_BITS, np.uint8) if key_bits is None else as_bits(key_bits)
    if key.size != FProgram.KEY_BITS:
        raise ShapeError("key slot has the wrong width")
    return np.concatenate([as_bits(s_bits), key, np.array([flag], np.uint8)])


@register
@dataclass(frozen=True)
class SblConfig:
    """Amplification parameters; defaults keep ``N <= 32`` for ``n <= 4``."""
    lam: int = 128
    n_in: int = 4
    m: int = 3
    ell: int = 8
    p: Fraction = Fraction(1, 8)
    d: Fraction = Fraction(1, 2)
    sethss_backend: str = GARBLED


@register
@dataclass
class SbsklMsk:
    params: SetParams
    N: int
    n: int
    subs: tuple          # IndexedMsk per party
    K_ske: bytes
    cfg: SblConfig


@register
@dataclass
class SbsklLeasedKey:
    keys: tuple          # LeasedKey per party

    @property
    def qubits(self) -> np.ndarray:
        return np.concatenate([k.qubits for k in self.keys])


@register
@dataclass(frozen=True)
class SbsklVk:
    vks: tuple


@register
@dataclass(frozen=True)
class SbsklCiphertext:
    cts: tuple           # IndexedCiphertext per party


def index_space(n: int, p) -> int:
    """``N = ceil(n / p)``."""
    p = Fraction(p)
    return math.ceil(Fraction(n) / p)


def sample_index(N: int, rng: np.random.Generator) -> int:
    """Uniform encryption index in ``1 .. N``."""
    return int(rng.integers(1, N + 1))


def sb_setup(lam: int, q: int, n: int, rng: np.random.Generator, cfg: Optional[SblConfig] = None) -> SbsklMsk:
    cfg = cfg or SblConfig(lam=lam)
    if n < 1:
        raise ParameterError("availability bound n must be at least 1")
    params = set_gen(lam, cfg.m, cfg.ell, cfg.p, cfg.d, rng, n_in=cfg.n_in)
    N = index_space(n, cfg.p)
    subs = tuple(i_setup(lam, q, N, rng, backend=REFERENCE,
                         n_in=len(T) * cfg.n_in + FProgram.KEY_BITS + 1) for T in params.sets)
    return SbsklMsk(params, N, int(n), subs, ske.keygen(rng), cfg)


def _eval_width(share: FunctionShare, params: SetParams) -> int:
    dummy = InputShare(share.i, tuple((e, np.zeros(params.n_in, np.uint8)) for e in params.members(share.i)))
    return 8 * len(share_eval(share, dummy).to_bytes())


def sb_kg(msk: SbsklMsk, f, store: QStore, rng: np.random.Generator) -> tuple[SbsklLeasedKey, SbsklVk]:
    if f.n_in != msk.cfg.n_in:
        raise ShapeError(f"function takes {f.n_in} bits, scheme encrypts {msk.cfg.n_in}")
    if any(s.issued >= s.q for s in msk.subs):
        raise QuotaError("collusion bound exhausted")
    if msk.N > ENUM_LIMIT:
        raise BudgetError(f"index space {msk.N} is too large to enumerate (limit {ENUM_LIMIT})")
    shares = func_encode(msk.params, f, rng, msk.cfg.sethss_backend)
    keys, vks = [], []
    for share, sub, T in zip(shares, msk.subs, msk.params.sets):
        width = _eval_width(share, msk.params)
        sct = bits_to_bytes(ske.E(msk.K_ske, np.zeros(width, np.uint8), rng))
        prog = FProgram(share, sct, tuple(T), msk.params.n_in, width)
        k, v = i_kg(sub, prog, store, rng)
        keys.append(k)
        vks.append(v)
    return SbsklLeasedKey(tuple(keys)), SbsklVk(tuple(vks))


def sb_enc(msk: SbsklMsk, x, rng: np.random.Generator) -> SbsklCiphertext:
    shares = inp_encode(msk.params, x, rng)
    cts = []
    for s, sub in zip(shares, msk.subs):
        j = sample_index(msk.N, rng)
        cts.append(i_enc(sub, j, payload(s.to_bits()), rng))
    return SbsklCiphertext(tuple(cts))


def sb_dec(fsk: SbsklLeasedKey, ct: SbsklCiphertext, store: QStore) -> np.ndarray:
    if len(fsk.keys) != len(ct.cts):
        raise ShapeError("key and ciphertext disagree on the number of parties")
    evals = [ShareEvaluation.from_bytes(bits_to_bytes(i_dec(k, c, store))) for k, c in zip(fsk.keys, ct.cts)]
    return decode(evals)


def sb_cert(fsk: SbsklLeasedKey, store: QStore) -> tuple:
    flat = _consume_all(store, [e for k in fsk.keys for e in k.entries])
    out, pos = [], 0
    for k in fsk.keys:
        out.append(tuple(flat[pos:pos + len(k.entries)]))
        pos += len(k.entries)
    return tuple(out)


def sb_vrfy(vk: SbsklVk, certs) -> bool:
    return len(certs) == len(vk.vks) and all(i_vrfy(v, c) for v, c in zip(vk.vks, certs))


# ============================================================== dynamic layer

@register
@dataclass
class SklMsk:
    q: int
    seed: bytes
    levels: int = SKL_LEVELS
    cfg: SblConfig = field(default_factory=SblConfig)
    issued: int = 0
    level_issued: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def level(self, k: int) -> SbsklMsk:
        if not 1 <= k <= self.levels:
            raise BoundError(f"level {k} outside 1..{self.levels}")
        sub = self._cache.get(k)
        if sub is None:
            rng = np.random.default_rng(int.from_bytes(kdf(self.seed, b"level", k.to_bytes(2, "little"), n=32),
                                                       "little"))
            sub = sb_setup(self.cfg.lam, self.q, 1 << k, rng, self.cfg)
            self._cache[k] = sub
        for s in sub.subs:
            s.issued = self.level_issued.get(k, 0)
        return sub


@register
@dataclass
class SklLeasedKey:
    level: int
    key: SbsklLeasedKey

    @property
    def qubits(self) -> np.ndarray:
        return self.key.qubits


@register
@dataclass(frozen=True)
class SklVk:
    level: int
    vk: SbsklVk


@register
@dataclass(frozen=True)
class SklCiphertext:
    levels: tuple        # SbsklCiphertext per level 1..levels


def level_for(n: int, levels: int = SKL_LEVELS) -> int:
    """Smallest ``k >= 1`` with ``n <= 2^k``."""
    if n < 1 or n > (1 << levels):
        raise BoundError(f"availability bound {n} outside 1..2^{levels}")
    return max(1, (n - 1).bit_length())


def skl_setup(lam: int, q: int, rng: np.random.Generator, *, levels: int = SKL_LEVELS,
              cfg: Optional[SblConfig] = None) -> SklMsk:
    if q < 1:
        raise ParameterError("collusion bound q must be at least 1")
    if levels < 1:
        raise ParameterError("need at least one level")
    return SklMsk(q, rng.bytes(KEY_BYTES), levels, cfg or SblConfig(lam=lam))


def skl_kg(msk: SklMsk, f, n: int, store: QStore, rng: np.random.Generator) -> tuple[SklLeasedKey, SklVk]:
    k = level_for(n, msk.levels)
    if msk.issued >= msk.q:
        raise QuotaError(f"collusion bound q={msk.q} exhausted")
    key, vk = sb_kg(msk.level(k), f, store, rng)
    msk.issued += 1
    msk.level_issued[k] = msk.level_issued.get(k, 0) + 1
    return SklLeasedKey(k, key), SklVk(k, vk)


def skl_enc(msk: SklMsk, x, rng: np.random.Generator) -> SklCiphertext:
    return SklCiphertext(tuple(sb_enc(msk.level(k), x, rng) for k in range(1, msk.levels + 1)))


def skl_dec(fsk: SklLeasedKey, ct: SklCiphertext, store: QStore) -> np.ndarray:
    if not 1 <= fsk.level <= len(ct.levels):
        raise BoundError(f"ciphertext has no level {fsk.level}")
    return sb_dec(fsk.key, ct.levels[fsk.level - 1], store)


def skl_cert(fsk: SklLeasedKey, store: QStore) -> tuple:
    return sb_cert(fsk.key, store)


def skl_vrfy(vk: SklVk, certs) -> bool:
    return sb_vrfy(vk.vk, certs)

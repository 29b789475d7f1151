"""Adaptive and simulation-secure layers on top of the dynamic-bound scheme.

Adaptive layer
    Every ciphertext carries a fresh single-ciphertext SKFE instance.  The
    leased key is for :class:`GProgram`, which, given that instance's seed
    and a PRF key from the ciphertext, outputs a garbled circuit for ``f``
    wired to the instance's input labels.  The ciphertext carries the active
    labels for ``x``, so the garbled circuit decrypts only that ciphertext.
    Setting the flag bit switches ``G`` to decrypting its hardwired SKE
    ciphertext instead.

Simulation layer
    Keys are for the trapdoor circuit ``T[f, ct_ske, tau]`` compiled into the
    circuit IR.  Honest ciphertexts clear the flag so ``T`` computes ``f(x)``.
    The simulator sets the flag, lists ``(tau_i, f_i(x*))`` for pre-challenge
    keys and answers later keys by putting ``f(x*)`` under its one-time pad.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import ske
from .bits import as_bits, bits_to_bytes, bytes_to_bits, int_to_bits
from .circuit_ir import Circuit, CircuitBuilder, evaluate
from .errors import OneCiphertextError, ParameterError, ShapeError, SlotError
from .garbling import GarbledCircuit, eval_gc, garble, labels_from_seed, select_labels, serialized_size
from .leasing import (
    SKL_LEVELS, SblConfig, SklCiphertext, SklLeasedKey, SklMsk, SklVk, skl_cert, skl_dec, skl_enc, skl_kg,
    skl_setup, skl_vrfy,
)
from .prf import GGM
from .qmem import QStore
from .serialization import register
from .sethss import REFERENCE as SETHSS_REFERENCE

SEED_BITS = 128
TAG_BITS = 64


# ----------------------------------------------------------- one-ciphertext SKFE

@register
@dataclass
class OneCtMsk:
    seed: bytes
    n_in: int
    used: bool = False

    def pairs(self):
        return labels_from_seed(self.seed, self.n_in)


def one_setup(n_in: int, rng: np.random.Generator) -> OneCtMsk:
    return OneCtMsk(rng.bytes(SEED_BITS // 8), n_in)


def one_enc(msk: OneCtMsk, x) -> tuple:
    if msk.used:
        raise OneCiphertextError("a single-ciphertext master key encrypts once")
    msk.used = True
    return tuple(select_labels(msk.pairs(), x))


def one_kg(seed: bytes, f: Circuit, coins: bytes) -> bytes:
    """Garble ``f`` on the seed's input labels with coins derived from ``coins``."""
    rng = np.random.default_rng(int.from_bytes(coins, "little"))
    gc, _ = garble(f, rng, input_labels=labels_from_seed(seed, f.n_in))
    return gc.to_bytes()


def one_dec(sk: bytes, ct: Sequence[bytes]) -> np.ndarray:
    return eval_gc(GarbledCircuit.from_bytes(sk), list(ct))


# ----------------------------------------------------------- circuit G

G_IN = 3 * SEED_BITS + 1     # seed | PRF key | SKE key | flag


@register(memo=True)
@dataclass(eq=False)
class GProgram:
    f: Circuit
    ct_ske: bytes        # packed bits
    tau: int

    n_in = G_IN

    @property
    def n_out(self) -> int:
        return 8 * serialized_size(self.f)

    def __call__(self, x) -> np.ndarray:
        x = as_bits(x)
        if x.size != G_IN:
            raise ShapeError(f"G takes {G_IN} bits, got {x.size}")
        seed, key, k_ske = (bits_to_bytes(x[i * SEED_BITS:(i + 1) * SEED_BITS]) for i in range(3))
        if x[-1]:
            return ske.D(k_ske, bytes_to_bits(self.ct_ske))
        return bytes_to_bits(one_kg(seed, self.f, GGM(key, TAG_BITS)(self.tau)))

    def __eq__(self, other):
        return (isinstance(other, GProgram) and self.f == other.f and self.tau == other.tau
                and self.ct_ske == other.ct_ske)


def g_payload(seed: bytes, key: bytes, k_ske: bytes = bytes(16), flag: int = 0) -> np.ndarray:
    return np.concatenate([bytes_to_bits(seed), bytes_to_bits(key), bytes_to_bits(k_ske),
                           np.array([flag], np.uint8)])


# ----------------------------------------------------------- adaptive layer

def ada_config(lam: int = 128, **kw) -> SblConfig:
    """Amplification settings for native programs over the ``G`` payload."""
    return SblConfig(lam=lam, n_in=G_IN, sethss_backend=SETHSS_REFERENCE, **kw)


@register
@dataclass
class AdaMsk:
    skl: SklMsk
    n_in: int


@register
@dataclass
class AdaKey:
    key: SklLeasedKey
    tau: int

    @property
    def qubits(self) -> np.ndarray:
        return self.key.qubits


@register
@dataclass(frozen=True)
class AdaCiphertext:
    labels: tuple
    sel: SklCiphertext


def ada_setup(lam: int, q: int, rng: np.random.Generator, *, n_in: int = 4, levels: int = SKL_LEVELS,
              cfg: Optional[SblConfig] = None) -> AdaMsk:
    return AdaMsk(skl_setup(lam, q, rng, levels=levels, cfg=cfg or ada_config(lam)), n_in)


def _tag(rng: np.random.Generator) -> int:
    return int.from_bytes(rng.bytes(TAG_BITS // 8), "little")


def ada_kg(msk: AdaMsk, f: Circuit, n: int, store: QStore, rng: np.random.Generator,
           ct_ske: Optional[np.ndarray] = None) -> tuple[AdaKey, SklVk]:
    if f.n_in != msk.n_in:
        raise ShapeError(f"function takes {f.n_in} bits, scheme encrypts {msk.n_in}")
    tau = _tag(rng)
    if ct_ske is None:
        ct_ske = rng.integers(0, 2, ske.prct_length(8 * serialized_size(f)), dtype=np.uint8)
    key, vk = skl_kg(msk.skl, GProgram(f, bits_to_bytes(ct_ske), tau), n, store, rng)
    return AdaKey(key, tau), vk


def ada_enc(msk: AdaMsk, x, rng: np.random.Generator) -> AdaCiphertext:
    one = one_setup(msk.n_in, rng)
    labels = one_enc(one, x)
    sel = skl_enc(msk.skl, g_payload(one.seed, rng.bytes(16)), rng)
    return AdaCiphertext(labels, sel)


def ada_recover(key: AdaKey, ct: AdaCiphertext, store: QStore) -> bytes:
    """The single-ciphertext function key this ciphertext unlocks (consumes the key's index)."""
    return bits_to_bytes(skl_dec(key.key, ct.sel, store))


def ada_dec(key: AdaKey, ct: AdaCiphertext, store: QStore) -> np.ndarray:
    return one_dec(ada_recover(key, ct, store), ct.labels)


def ada_cert(key: AdaKey, store: QStore) -> tuple:
    return skl_cert(key.key, store)


def ada_vrfy(vk: SklVk, cert) -> bool:
    return skl_vrfy(vk, cert)


def trojan_branch_test(f: Circuit, target, rng: np.random.Generator, *, msk: Optional[AdaMsk] = None,
                       store: Optional[QStore] = None) -> np.ndarray:
    """Run ``G`` on a flag-set payload whose SKE ciphertext encrypts ``target``.

    ``target`` is zero-padded to ``G``'s output width and the first
    ``len(target)`` output bits are returned.  With ``msk`` and ``store`` the
    key is leased and decrypted through the whole stack; otherwise ``G`` is
    evaluated directly.
    """
    target = as_bits(target)
    width = 8 * serialized_size(f)
    if target.size > width:
        raise ShapeError(f"target longer than G's output ({width} bits)")
    k_ske = ske.keygen(rng)
    ct_ske = ske.E(k_ske, np.concatenate([target, np.zeros(width - target.size, np.uint8)]), rng)
    x = g_payload(rng.bytes(16), rng.bytes(16), k_ske, 1)
    if msk is None:
        out = GProgram(f, bits_to_bytes(ct_ske), _tag(rng))(x)
    else:
        if store is None:
            raise ParameterError("leasing the key needs a qubit store")
        key, _ = ada_kg(msk, f, 1, store, rng, ct_ske=ct_ske)
        out = skl_dec(key.key, skl_enc(msk.skl, x, rng), store)
    return out[:target.size]


# ----------------------------------------------------------- trapdoor circuit T

@dataclass(frozen=True)
class TLayout:
    n_x: int
    n_out: int
    q_pre: int
    tag_bits: int = TAG_BITS

    @property
    def slot_bits(self) -> int:
        return self.tag_bits + self.n_out

    @property
    def n_in(self) -> int:
        return self.n_x + self.n_out + self.q_pre * self.slot_bits + 1

    def pack(self, x, k_ske, slots: Sequence[tuple[int, np.ndarray]], flag: int) -> np.ndarray:
        if len(slots) > self.q_pre:
            raise SlotError(f"{len(slots)} pre-challenge keys, only {self.q_pre} slots")
        parts = [as_bits(x), as_bits(k_ske)]
        for tau, y in slots:
            parts += [int_to_bits(tau, self.tag_bits), as_bits(y)]
        parts.append(np.zeros((self.q_pre - len(slots)) * self.slot_bits, np.uint8))
        parts.append(np.array([flag], np.uint8))
        out = np.concatenate(parts)
        if out.size != self.n_in:
            raise ShapeError("payload fields have the wrong widths")
        return out

    def unpack(self, v: np.ndarray):
        v = as_bits(v)
        x = v[:self.n_x]
        k = v[self.n_x:self.n_x + self.n_out]
        pos = self.n_x + self.n_out
        slots = []
        for _ in range(self.q_pre):
            slots.append((v[pos:pos + self.tag_bits], v[pos + self.tag_bits:pos + self.slot_bits]))
            pos += self.slot_bits
        return x, k, slots, int(v[-1])


@dataclass(frozen=True)
class TProgram:
    """Native evaluation of ``T``; the oracle for the compiled circuit."""
    f: Circuit
    ct_ske: np.ndarray
    tau: int
    layout: TLayout

    @property
    def n_in(self) -> int:
        return self.layout.n_in

    @property
    def n_out(self) -> int:
        return self.f.n_out

    def __call__(self, v) -> np.ndarray:
        x, k, slots, flag = self.layout.unpack(v)
        if not flag:
            return evaluate(self.f, x)
        mine = int_to_bits(self.tau, self.layout.tag_bits)
        for t, y in slots:
            if np.array_equal(t, mine):
                return y.copy()
        return as_bits(self.ct_ske) ^ k


def compile_t(f: Circuit, ct_ske, tau: int, layout: TLayout) -> Circuit:
    ct_ske = as_bits(ct_ske)
    if f.n_in != layout.n_x or f.n_out != layout.n_out or ct_ske.size != layout.n_out:
        raise ShapeError("function or SKE ciphertext does not fit the layout")
    cb = CircuitBuilder(layout.n_in)
    x = cb.inputs(0, layout.n_x)
    k = cb.inputs(layout.n_x, layout.n_out)
    flag = layout.n_in - 1
    # one-time-pad decryption of the hardwired ciphertext
    res = [cb.not_(w) if c else w for w, c in zip(k, ct_ske)]
    mine = int_to_bits(tau, layout.tag_bits)
    pos = layout.n_x + layout.n_out
    slots = []
    for _ in range(layout.q_pre):
        t = cb.inputs(pos, layout.tag_bits)
        y = cb.inputs(pos + layout.tag_bits, layout.n_out)
        match = cb.and_all(w if c else cb.not_(w) for w, c in zip(t, mine))
        slots.append((match, y))
        pos += layout.slot_bits
    for match, y in reversed(slots):      # the first matching slot wins
        res = cb.mux_vec(match, res, y)
    return cb.build(cb.mux_vec(flag, cb.embed(f, x), res))


# ----------------------------------------------------------- simulation layer

@register
@dataclass
class SimMsk:
    ada: AdaMsk
    layout_n_x: int
    layout_n_out: int
    q_pre: int

    @property
    def layout(self) -> TLayout:
        return TLayout(self.layout_n_x, self.layout_n_out, self.q_pre)


@register
@dataclass
class SimKey:
    key: AdaKey
    f: Circuit
    n: int
    tau: int
    starred: bool = False

    @property
    def qubits(self) -> np.ndarray:
        return self.key.qubits


@dataclass(frozen=True)
class KeyRecord:
    """What the simulator learns about a pre-challenge key: ``f``, its bound, its tag and ``f(x*)``."""
    f: Circuit
    n: int
    tau: int
    y: np.ndarray
    starred: bool = False


def sim_setup(lam: int, q: int, rng: np.random.Generator, *, n_in: int = 4, n_out: int = 1, q_pre: int = 2,
              levels: int = SKL_LEVELS, cfg: Optional[SblConfig] = None) -> SimMsk:
    if q_pre < 0:
        raise ParameterError("q_pre must be non-negative")
    layout = TLayout(n_in, n_out, q_pre)
    return SimMsk(ada_setup(lam, q, rng, n_in=layout.n_in, levels=levels, cfg=cfg), n_in, n_out, q_pre)


def _lease_t(msk: SimMsk, f: Circuit, n: int, ct_ske, store: QStore, rng: np.random.Generator, starred: bool):
    layout = msk.layout
    # the tag is drawn here so T can hardwire it; the adaptive layer keeps its own
    tau = _tag(rng)
    t = compile_t(f, ct_ske, tau, layout)
    key, vk = ada_kg(msk.ada, t, n, store, rng)
    return SimKey(key, f, n, tau, starred), vk


def sim_kg(msk: SimMsk, f: Circuit, n: int, store: QStore, rng: np.random.Generator,
           starred: bool = False) -> tuple[SimKey, SklVk]:
    ct_ske = rng.integers(0, 2, msk.layout.n_out, dtype=np.uint8)
    return _lease_t(msk, f, n, ct_ske, store, rng, starred)


def sim_enc(msk: SimMsk, x, rng: np.random.Generator) -> AdaCiphertext:
    layout = msk.layout
    return ada_enc(msk.ada, layout.pack(x, np.zeros(layout.n_out, np.uint8), [], 0), rng)


def sim_dec(key: SimKey, ct: AdaCiphertext, store: QStore) -> np.ndarray:
    return ada_dec(key.key, ct, store)


def sim_cert(key: SimKey, store: QStore) -> tuple:
    return ada_cert(key.key, store)


def sim_vrfy(vk: SklVk, cert) -> bool:
    return ada_vrfy(vk, cert)


@dataclass
class Simulator:
    """Produces the challenge without ``x*`` and answers later keys from ``f(x*)`` alone."""
    msk: SimMsk
    k_ske: Optional[np.ndarray] = None
    seen: list = field(default_factory=list)

    def s_enc(self, records: Sequence[KeyRecord], rng: np.random.Generator) -> AdaCiphertext:
        if any(r.starred for r in records):
            raise ParameterError("the simulator must not receive outputs of deleted-key functions")
        layout = self.msk.layout
        if len(records) > layout.q_pre:
            raise SlotError(f"{len(records)} pre-challenge keys, only {layout.q_pre} slots")
        self.seen = list(records)
        self.k_ske = rng.integers(0, 2, layout.n_out, dtype=np.uint8)
        slots = [(r.tau, as_bits(r.y)) for r in records]
        payload = layout.pack(np.zeros(layout.n_x, np.uint8), self.k_ske, slots, 1)
        return ada_enc(self.msk.ada, payload, rng)

    def s_kg(self, f: Circuit, n: int, y, store: QStore, rng: np.random.Generator) -> tuple[SimKey, SklVk]:
        if self.k_ske is None:
            raise ParameterError("s_kg before s_enc")
        return _lease_t(self.msk, f, n, as_bits(y) ^ self.k_ske, store, rng, False)

"""Set homomorphic secret sharing from XOR sharing and one garbled combiner.

The input is split into ``ell`` XOR pieces and party ``i`` receives the pieces
indexed by its set ``T_i``.  Function encoding garbles the combiner
``c(x_1, ..., x_ell) = f(x_1 xor ... xor x_ell)``; party ``i`` gets the label
pairs of the blocks it owns, and party 0 also carries the garbled circuit
(the others only its digest).  Decoding collects one label per block from any
owner and evaluates.

A ``reference`` backend with the same interface skips garbling: party 0
carries the function itself and evaluations carry raw pieces.  Layers whose
functions are native programs use it.
"""
from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Optional, Sequence

import numpy as np

from .bits import as_bits, bytes_to_bits
from .circuit_ir import Circuit, CircuitBuilder
from .errors import CoverageError, ParameterError, ShapeError, TamperError
from .garbling import LABEL_BYTES, GarbledCircuit, eval_gc, garble
from .serialization import pack, register, unpack

GARBLED, REFERENCE = "garbled", "reference"
MAX_SETGEN_TRIES = 1000
DIGEST_BYTES = 32


@register
@dataclass(frozen=True)
class SetParams:
    p: Fraction
    ell: int
    sets: tuple            # tuple of sorted tuples of element indices
    n_in: int
    d: Fraction = Fraction(1, 2)

    @property
    def m(self) -> int:
        return len(self.sets)

    def members(self, i: int) -> tuple:
        return self.sets[i]


@register
@dataclass(frozen=True)
class InputShare:
    i: int
    pieces: tuple          # ((e, bits), ...) for e in T_i, ascending

    def to_bits(self) -> np.ndarray:
        if not self.pieces:
            return np.zeros(0, np.uint8)
        return np.concatenate([as_bits(b) for _, b in self.pieces])

    @classmethod
    def from_bits(cls, params: SetParams, i: int, bits) -> "InputShare":
        bits = as_bits(bits)
        elems = params.members(i)
        n = params.n_in
        if bits.size != n * len(elems):
            raise ShapeError("input share has the wrong width")
        return cls(i, tuple((e, bits[k * n:(k + 1) * n].copy()) for k, e in enumerate(elems)))


@register
@dataclass(frozen=True)
class FunctionShare:
    i: int
    backend: str
    digest: bytes
    tables: tuple          # garbled: ((e, (label0, label1) per bit), ...) for e in T_i
    gc: Optional[bytes] = None       # garbled backend, party 0 only
    program: Any = None              # reference backend, party 0 only
    n_out: int = 1
    ell: int = 0


@dataclass(frozen=True)
class ShareEvaluation:
    i: int
    digest: bytes
    blocks: tuple          # ((e, payload), ...): labels (garbled) or piece bits (reference)
    gc: Optional[bytes] = None
    program: Any = None
    ell: int = 0

    def to_bytes(self) -> bytes:
        """Fixed-width encoding for a given function share and input share."""
        out = [struct.pack("<HH", self.i, self.ell), self.digest, struct.pack("<H", len(self.blocks))]
        for e, payload in self.blocks:
            if isinstance(payload, np.ndarray):
                body = bytes([0]) + struct.pack("<H", payload.size) + np.packbits(payload, bitorder="little").tobytes()
            else:
                body = bytes([1]) + struct.pack("<H", len(payload)) + b"".join(payload)
            out.append(struct.pack("<H", e) + body)
        tail = b""
        if self.gc is not None:
            tail = bytes([1]) + self.gc
        elif self.program is not None:
            tail = bytes([2]) + pack(self.program)
        else:
            tail = bytes([0])
        out.append(tail)
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "ShareEvaluation":
        try:
            i, ell = struct.unpack_from("<HH", data, 0)
            digest = data[4:4 + DIGEST_BYTES]
            pos = 4 + DIGEST_BYTES
            (nb,) = struct.unpack_from("<H", data, pos)
            pos += 2
            blocks = []
            for _ in range(nb):
                e, kind, n = struct.unpack_from("<HBH", data, pos)
                pos += 5
                if kind == 0:
                    nbytes = (n + 7) // 8
                    payload = bytes_to_bits(data[pos:pos + nbytes], n)
                    pos += nbytes
                else:
                    payload = tuple(data[pos + k * LABEL_BYTES:pos + (k + 1) * LABEL_BYTES] for k in range(n))
                    pos += n * LABEL_BYTES
                blocks.append((e, payload))
            tag = data[pos]
            rest = data[pos + 1:]
        except (struct.error, IndexError):
            raise ShapeError("truncated share evaluation") from None
        gc = rest if tag == 1 else None
        program = unpack(rest) if tag == 2 else None
        return cls(i, digest, tuple(blocks), gc, program, ell)

    def __eq__(self, other):
        return isinstance(other, ShareEvaluation) and self.to_bytes() == other.to_bytes()


# ---------------------------------------------------------------- SetGen

def set_gen(lam: int, m: int, ell: int, p, d, rng: np.random.Generator, n_in: int = 4) -> SetParams:
    p, d = Fraction(p), Fraction(d)
    if not (0 < p < 1 and 0 < d < 1):
        raise ParameterError("need 0 < p < 1 and 0 < d < 1")
    if m < 1 or ell < 1:
        raise ParameterError("need m >= 1 and ell >= 1")
    for _ in range(MAX_SETGEN_TRIES):
        member = rng.random((m, ell)) < float(d)
        if member.any(axis=1).all() and member.any(axis=0).all():
            sets = tuple(tuple(int(e) for e in np.flatnonzero(row)) for row in member)
            return SetParams(p, ell, sets, n_in, d)
    raise ParameterError(f"no covering collection found in {MAX_SETGEN_TRIES} tries (m={m}, ell={ell}, d={d})")


def unmarked_probability(m: int, ell: int, d, p) -> Fraction:
    """Exact Pr[some element lies outside every corrupted set] under ``set_gen``.

    The collection is conditioned on every set being nonempty and the union
    being ``[ell]``; each party is corrupted independently with probability
    ``p``.  Inclusion-exclusion over the rows forced empty makes the columns
    independent.
    """
    d, p = Fraction(d), Fraction(p)
    q = 1 - d

    def covered_nonempty(s: int) -> Fraction:
        # Pr[all m rows nonempty and every column hit by the first s rows]
        total = Fraction(0)
        for a in range(s + 1):
            hit = (1 - q ** (s - a)) ** ell
            if hit == 0:
                continue
            for b in range(m - s + 1):
                sign = -1 if (a + b) % 2 else 1
                total += sign * math.comb(s, a) * math.comb(m - s, b) * q ** ((a + b) * ell) * hit
        return total

    pr_valid = covered_nonempty(m)
    covered = sum(math.comb(m, s) * p ** s * (1 - p) ** (m - s) * covered_nonempty(s) for s in range(m + 1))
    return 1 - covered / pr_valid


def has_unmarked(params: SetParams, corrupted: Sequence[int]) -> bool:
    hit = set()
    for i in corrupted:
        hit.update(params.sets[i])
    return len(hit) < params.ell


# ---------------------------------------------------------------- encoding

def inp_encode(params: SetParams, x, rng: np.random.Generator) -> list[InputShare]:
    x = as_bits(x)
    if x.size != params.n_in:
        raise ShapeError(f"expected {params.n_in} input bits, got {x.size}")
    pieces = rng.integers(0, 2, (params.ell, params.n_in), dtype=np.uint8)
    pieces[-1] = x ^ np.bitwise_xor.reduce(pieces[:-1], axis=0) if params.ell > 1 else x
    return [InputShare(i, tuple((e, pieces[e].copy()) for e in T)) for i, T in enumerate(params.sets)]


def combiner(params: SetParams, f: Circuit) -> Circuit:
    """``c(x_0 .. x_{ell-1}) = f(x_0 xor ... xor x_{ell-1})``."""
    n, ell = params.n_in, params.ell
    if f.n_in != n:
        raise ShapeError(f"function takes {f.n_in} bits, shares carry {n}")
    cb = CircuitBuilder(n * ell)
    acc = cb.inputs(0, n)
    for e in range(1, ell):
        acc = [cb.xor(a, w) for a, w in zip(acc, cb.inputs(e * n, n))]
    return cb.build(cb.embed(f, acc))


def func_encode(params: SetParams, f, rng: np.random.Generator, backend: str = GARBLED) -> list[FunctionShare]:
    n = params.n_in
    if backend == REFERENCE:
        if f.n_in != n:
            raise ShapeError(f"function takes {f.n_in} bits, shares carry {n}")
        digest = hashlib.sha256(b"ref" + rng.bytes(16) + pack(f)).digest()
        return [FunctionShare(i, REFERENCE, digest, (), None, f if i == 0 else None, f.n_out, params.ell)
                for i in range(params.m)]
    if backend != GARBLED:
        raise ParameterError(f"unknown SetHSS backend {backend!r}")
    if not isinstance(f, Circuit):
        raise ShapeError("the garbled backend needs a circuit")
    c = combiner(params, f)
    gc, pairs = garble(c, rng)
    gc_bytes = gc.to_bytes()
    digest = hashlib.sha256(gc_bytes).digest()
    shares = []
    for i, T in enumerate(params.sets):
        tables = tuple((e, tuple((pairs[e * n + k].label0, pairs[e * n + k].label1) for k in range(n))) for e in T)
        shares.append(FunctionShare(i, GARBLED, digest, tables, gc_bytes if i == 0 else None, None, f.n_out,
                                    params.ell))
    return shares


def share_eval(fs: FunctionShare, s: InputShare) -> ShareEvaluation:
    if fs.i != s.i:
        raise ShapeError(f"function share {fs.i} applied to input share {s.i}")
    if fs.backend == REFERENCE:
        return ShareEvaluation(fs.i, fs.digest, tuple((e, as_bits(b).copy()) for e, b in s.pieces),
                               None, fs.program, fs.ell)
    table = dict(fs.tables)
    blocks = []
    for e, bits in s.pieces:
        if e not in table:
            raise ShapeError(f"share {fs.i} has no table for element {e}")
        pairs = table[e]
        bits = as_bits(bits)
        if bits.size != len(pairs):
            raise ShapeError("piece width does not match the label table")
        blocks.append((e, tuple(pair[int(b)] for pair, b in zip(pairs, bits))))
    return ShareEvaluation(fs.i, fs.digest, tuple(blocks), fs.gc, None, fs.ell)


def _same(a, b) -> bool:
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b)
    return a == b


def decode(evals: Sequence[ShareEvaluation]) -> np.ndarray:
    evals = list(evals)
    if not evals:
        raise CoverageError("no share evaluations")
    digest, ell = evals[0].digest, evals[0].ell
    if any(ev.digest != digest or ev.ell != ell for ev in evals):
        raise TamperError("share evaluations carry different function digests")
    blocks: dict[int, Any] = {}
    for ev in evals:
        for e, payload in ev.blocks:
            if e in blocks and not _same(blocks[e], payload):
                raise TamperError(f"conflicting evaluations for element {e}")
            blocks.setdefault(e, payload)
    missing = [e for e in range(ell) if e not in blocks]
    if missing or len(blocks) != ell:
        raise CoverageError(f"no evaluation covers element(s) {missing}")
    carrier = next((ev for ev in evals if ev.gc is not None or ev.program is not None), None)
    if carrier is None:
        raise CoverageError("the evaluation carrying the function is missing")
    if carrier.program is not None:
        x = np.bitwise_xor.reduce(np.array([as_bits(blocks[e]) for e in range(ell)]), axis=0)
        return as_bits(carrier.program(x))
    if hashlib.sha256(carrier.gc).digest() != digest:
        raise TamperError("garbled circuit does not match its digest")
    gc = GarbledCircuit.from_bytes(carrier.gc)
    labels = [lab for e in range(ell) for lab in blocks[e]]
    return eval_gc(gc, labels)

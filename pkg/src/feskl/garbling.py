"""Yao garbling with point-and-permute and authenticated rows.

Labels are ``KAPPA``-bit strings whose least significant bit is the
point-and-permute colour; the two labels of a wire always carry opposite
colours.  Every garbled row is ``H(gate, label_a, label_b) xor (label_out || 0^128)``
so decryption under a wrong label is detected by the all-zero tag.  Output
wires are decoded through hashed labels, which also authenticates outputs
that are plain input pass-throughs.

Free-XOR is available but off by default; with it on, XOR and NOT gates carry
no rows and all label pairs share one global offset.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .bits import as_bits
from .circuit_ir import AND, CONST0, CONST1, NOT, XOR, Circuit, from_description
from .errors import GarbleError, ShapeError

KAPPA = 128
LABEL_BYTES = KAPPA // 8
ROW_BYTES = 2 * LABEL_BYTES
_TAG_MASK = (1 << KAPPA) - 1
_sha256 = hashlib.sha256


@dataclass(frozen=True)
class InputLabelPair:
    wire: int
    label0: bytes
    label1: bytes

    def __post_init__(self):
        if self.label0 == self.label1:
            raise ValueError("label pair must be distinct")

    def select(self, bit: int) -> bytes:
        return self.label1 if bit else self.label0


@dataclass(frozen=True)
class GarbledCircuit:
    circuit: Circuit
    tables: bytes
    output_map: bytes
    free_xor: bool = False
    kappa: int = KAPPA

    @property
    def n_in(self) -> int:
        return self.circuit.n_in

    @property
    def n_out(self) -> int:
        return self.circuit.n_out

    def to_bytes(self) -> bytes:
        desc = self.circuit.describe()
        return b"".join([struct.pack("<BII", int(self.free_xor), len(desc), len(self.tables)),
                         desc, self.tables, self.output_map])

    @classmethod
    def from_bytes(cls, data: bytes) -> "GarbledCircuit":
        free, n_desc, n_tab = struct.unpack_from("<BII", data, 0)
        pos = 9
        circuit = from_description(data[pos:pos + n_desc])
        pos += n_desc
        tables = data[pos:pos + n_tab]
        omap = data[pos + n_tab:]
        if len(tables) != n_tab or len(omap) != 2 * LABEL_BYTES * circuit.n_out:
            raise GarbleError("truncated garbled circuit")
        return cls(circuit, tables, omap, bool(free))


def serialized_size(c: Circuit, free_xor: bool = False) -> int:
    """Byte length of ``GarbledCircuit.to_bytes`` for any garbling of ``c``."""
    return 9 + len(c.describe()) + table_size(c, free_xor) + 2 * LABEL_BYTES * c.n_out


def table_size(c: Circuit, free_xor: bool = False) -> int:
    total = 0
    for op, _, _ in c.gates:
        total += _row_bytes(op, free_xor)
    return total


def _row_bytes(op: str, free_xor: bool) -> int:
    if op == AND or (op == XOR and not free_xor):
        return 4 * ROW_BYTES
    if op == NOT:
        return 0 if free_xor else 2 * ROW_BYTES
    if op in (CONST0, CONST1):
        return LABEL_BYTES
    return 0


def _h2(gid: bytes, a: int, b: int) -> int:
    return int.from_bytes(_sha256(gid + a.to_bytes(LABEL_BYTES, "big")
                                  + b.to_bytes(LABEL_BYTES, "big")).digest(), "big")


def _h1(gid: bytes, a: int) -> int:
    return int.from_bytes(_sha256(gid + a.to_bytes(LABEL_BYTES, "big")).digest(), "big")


def _out_hash(j: int, label: int) -> bytes:
    return _sha256(b"out" + j.to_bytes(4, "little") + label.to_bytes(LABEL_BYTES, "big")).digest()[:LABEL_BYTES]


def _random_pair(raw: bytes, free_delta: Optional[int]) -> tuple:
    l0 = int.from_bytes(raw[:LABEL_BYTES], "big")
    if free_delta is not None:
        return l0, l0 ^ free_delta
    l1 = int.from_bytes(raw[LABEL_BYTES:], "big")
    l1 = (l1 & ~1) | ((l0 & 1) ^ 1)
    if l1 == l0:
        l1 ^= 2
    return l0, l1


def labels_from_seed(seed: bytes, n: int, domain: bytes = b"") -> list[InputLabelPair]:
    """Deterministic label pairs for ``n`` input wires derived from a secret seed."""
    pairs = []
    for w in range(n):
        tag = domain + w.to_bytes(4, "little")
        l0 = int.from_bytes(_sha256(b"lbl0" + seed + tag).digest()[:LABEL_BYTES], "big")
        l1 = int.from_bytes(_sha256(b"lbl1" + seed + tag).digest()[:LABEL_BYTES], "big")
        l1 = (l1 & ~1) | ((l0 & 1) ^ 1)
        pairs.append(InputLabelPair(w, l0.to_bytes(LABEL_BYTES, "big"), l1.to_bytes(LABEL_BYTES, "big")))
    return pairs


def garble(c: Circuit, rng: np.random.Generator,
           input_labels: Optional[Sequence[InputLabelPair]] = None,
           free_xor: bool = False) -> tuple[GarbledCircuit, list[InputLabelPair]]:
    n_in = c.n_in
    delta = None
    if free_xor:
        if input_labels is not None:
            raise ValueError("external input labels are not supported with free-XOR")
        delta = int.from_bytes(rng.bytes(LABEL_BYTES), "big") | 1
    raw = rng.bytes(2 * LABEL_BYTES * c.n_wires)
    step = 2 * LABEL_BYTES
    wires: list = [None] * c.n_wires
    if input_labels is not None:
        if len(input_labels) != n_in:
            raise ShapeError("need one label pair per input wire")
        for w, p in enumerate(input_labels):
            wires[w] = (int.from_bytes(p.label0, "big"), int.from_bytes(p.label1, "big"))
    else:
        for w in range(n_in):
            wires[w] = _random_pair(raw[w * step:(w + 1) * step], delta)

    tables = bytearray()
    for k, (op, a, b) in enumerate(c.gates):
        w = n_in + k
        gid = k.to_bytes(4, "little")
        if free_xor and op == XOR:
            wires[w] = (wires[a][0] ^ wires[b][0], wires[a][0] ^ wires[b][0] ^ delta)
            continue
        if free_xor and op == NOT:
            wires[w] = (wires[a][1], wires[a][0])
            continue
        out = _random_pair(raw[w * step:(w + 1) * step], delta)
        wires[w] = out
        if op in (CONST0, CONST1):
            tables += out[op == CONST1].to_bytes(LABEL_BYTES, "big")
        elif op == NOT:
            rows = [0, 0]
            for va in (0, 1):
                la = wires[a][va]
                rows[la & 1] = _h1(gid, la) ^ (out[va ^ 1] << KAPPA)
            for r in rows:
                tables += r.to_bytes(ROW_BYTES, "big")
        else:
            rows = [0, 0, 0, 0]
            for va in (0, 1):
                la = wires[a][va]
                for vb in (0, 1):
                    lb = wires[b][vb]
                    v = (va & vb) if op == AND else (va ^ vb)
                    rows[((la & 1) << 1) | (lb & 1)] = _h2(gid, la, lb) ^ (out[v] << KAPPA)
            for r in rows:
                tables += r.to_bytes(ROW_BYTES, "big")

    omap = bytearray()
    for j, o in enumerate(c.outputs):
        omap += _out_hash(j, wires[o][0]) + _out_hash(j, wires[o][1])

    pairs = input_labels if input_labels is not None else [
        InputLabelPair(w, wires[w][0].to_bytes(LABEL_BYTES, "big"), wires[w][1].to_bytes(LABEL_BYTES, "big"))
        for w in range(n_in)]
    return GarbledCircuit(c, bytes(tables), bytes(omap), free_xor), list(pairs)


def select_labels(pairs: Sequence[InputLabelPair], x) -> list[bytes]:
    x = as_bits(x)
    if x.size != len(pairs):
        raise ShapeError("input length does not match label pairs")
    return [p.select(int(b)) for p, b in zip(pairs, x)]


def eval_gc(gc: GarbledCircuit, labels: Sequence[bytes]) -> np.ndarray:
    c = gc.circuit
    if len(labels) != c.n_in:
        raise ShapeError(f"expected {c.n_in} labels, got {len(labels)}")
    active = [int.from_bytes(l, "big") for l in labels]
    if any(len(l) != LABEL_BYTES for l in labels):
        raise ShapeError("labels must be KAPPA bits")
    tab = gc.tables
    pos = 0
    free = gc.free_xor
    for k, (op, a, b) in enumerate(c.gates):
        gid = k.to_bytes(4, "little")
        if free and op == XOR:
            active.append(active[a] ^ active[b])
            continue
        if free and op == NOT:
            # the NOT output pair is the input pair swapped, so the active label passes through
            active.append(active[a])
            continue
        if op in (CONST0, CONST1):
            active.append(int.from_bytes(tab[pos:pos + LABEL_BYTES], "big"))
            pos += LABEL_BYTES
            continue
        if op == NOT:
            la = active[a]
            r = (la & 1) * ROW_BYTES
            row = int.from_bytes(tab[pos + r:pos + r + ROW_BYTES], "big")
            v = row ^ _h1(gid, la)
            pos += 2 * ROW_BYTES
        else:
            la, lb = active[a], active[b]
            r = (((la & 1) << 1) | (lb & 1)) * ROW_BYTES
            row = int.from_bytes(tab[pos + r:pos + r + ROW_BYTES], "big")
            v = row ^ _h2(gid, la, lb)
            pos += 4 * ROW_BYTES
        if v & _TAG_MASK:
            raise GarbleError(f"row authentication failed at gate {k}")
        active.append(v >> KAPPA)

    omap = gc.output_map
    out = np.zeros(c.n_out, dtype=np.uint8)
    for j, o in enumerate(c.outputs):
        h = _out_hash(j, active[o])
        base = 2 * LABEL_BYTES * j
        if h == omap[base:base + LABEL_BYTES]:
            out[j] = 0
        elif h == omap[base + LABEL_BYTES:base + 2 * LABEL_BYTES]:
            out[j] = 1
        else:
            raise GarbleError(f"output label {j} does not decode")
    return out

"""Boolean circuits: the function language shared by every FE layer.

A circuit is a topologically ordered list of fan-in-2 gates over wires
``0 .. n_in-1`` (inputs) followed by one new wire per gate.  Circuits inside a
:class:`CircuitBudget` have a fixed-length bit encoding, and
:func:`universal` builds the interpreter circuit ``U`` with
``U(encode(f) || x) == f(x)``.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .bits import as_bits
from .errors import BudgetError, FormatError, ShapeError

AND, XOR, NOT, CONST0, CONST1 = "AND", "XOR", "NOT", "CONST0", "CONST1"
OPS = (AND, XOR, NOT, CONST0, CONST1)
OP_CODE = {op: i for i, op in enumerate(OPS)}
BINARY = frozenset((AND, XOR))
OP_BITS = 3


class Gate(NamedTuple):
    op: str
    a: Optional[int] = None
    b: Optional[int] = None


@dataclass(frozen=True)
class Circuit:
    n_in: int
    n_out: int
    gates: tuple
    outputs: tuple

    def __post_init__(self):
        gates = tuple(g if isinstance(g, Gate) else Gate(*g) for g in self.gates)
        object.__setattr__(self, "gates", gates)
        object.__setattr__(self, "outputs", tuple(int(w) for w in self.outputs))
        if self.n_in < 0 or self.n_out < 0:
            raise ShapeError("negative wire counts")
        for k, g in enumerate(gates):
            limit = self.n_in + k
            if g.op not in OPS:
                raise FormatError(f"gate {k}: unknown op {g.op!r}")
            if g.op in BINARY:
                if g.a is None or g.b is None:
                    raise FormatError(f"gate {k}: {g.op} needs two inputs")
                if not (0 <= g.a < limit and 0 <= g.b < limit):
                    raise FormatError(f"gate {k}: input wire not yet defined")
            elif g.op == NOT:
                if g.a is None or g.b is not None:
                    raise FormatError(f"gate {k}: NOT takes exactly one input")
                if not 0 <= g.a < limit:
                    raise FormatError(f"gate {k}: input wire not yet defined")
            elif g.a is not None or g.b is not None:
                raise FormatError(f"gate {k}: constants take no inputs")
        if len(self.outputs) != self.n_out:
            raise FormatError("output count does not match n_out")
        n_wires = self.n_in + len(gates)
        if any(not 0 <= w < n_wires for w in self.outputs):
            raise FormatError("output wire out of range")

    @property
    def n_wires(self) -> int:
        return self.n_in + len(self.gates)

    def __call__(self, x) -> np.ndarray:
        return evaluate(self, x)

    def describe(self) -> bytes:
        """Canonical byte description (stable across processes)."""
        out = [struct.pack("<III", self.n_in, self.n_out, len(self.gates))]
        for g in self.gates:
            out.append(struct.pack("<Bii", OP_CODE[g.op],
                                   -1 if g.a is None else g.a,
                                   -1 if g.b is None else g.b))
        out.append(struct.pack(f"<{self.n_out}I", *self.outputs))
        return b"".join(out)

    def and_count(self) -> int:
        return sum(1 for g in self.gates if g.op == AND)


def evaluate(c: Circuit, x) -> np.ndarray:
    x = as_bits(x)
    if x.size != c.n_in:
        raise ShapeError(f"expected {c.n_in} input bits, got {x.size}")
    w = [int(v) for v in x]
    append = w.append
    for op, a, b in c.gates:
        if op == AND:
            append(w[a] & w[b])
        elif op == XOR:
            append(w[a] ^ w[b])
        elif op == NOT:
            append(w[a] ^ 1)
        elif op == CONST0:
            append(0)
        else:
            append(1)
    return np.array([w[o] for o in c.outputs], dtype=np.uint8)


# ---------------------------------------------------------------- builder

ZERO, ONE = -1, -2   # constant pseudo-wires, folded away where possible


class CircuitBuilder:
    """Incremental circuit construction with constant folding and gate sharing."""

    def __init__(self, n_in: int):
        self.n_in = n_in
        self.gates: list[Gate] = []
        self._memo: dict[tuple, int] = {}

    def inputs(self, start: int = 0, count: Optional[int] = None) -> list[int]:
        count = self.n_in - start if count is None else count
        return list(range(start, start + count))

    @staticmethod
    def const(v: int) -> int:
        return ONE if v else ZERO

    def _emit(self, op: str, a=None, b=None) -> int:
        if op in BINARY and a > b:
            a, b = b, a
        key = (op, a, b)
        wire = self._memo.get(key)
        if wire is None:
            wire = self.n_in + len(self.gates)
            self.gates.append(Gate(op, a, b))
            self._memo[key] = wire
        return wire

    def not_(self, a: int) -> int:
        if a == ZERO:
            return ONE
        if a == ONE:
            return ZERO
        return self._emit(NOT, a)

    def xor(self, a: int, b: int) -> int:
        if a == ZERO:
            return b
        if b == ZERO:
            return a
        if a == ONE:
            return self.not_(b)
        if b == ONE:
            return self.not_(a)
        if a == b:
            return ZERO
        return self._emit(XOR, a, b)

    def and_(self, a: int, b: int) -> int:
        if ZERO in (a, b):
            return ZERO
        if a == ONE:
            return b
        if b == ONE or a == b:
            return a
        return self._emit(AND, a, b)

    def or_(self, a: int, b: int) -> int:
        return self.xor(self.xor(a, b), self.and_(a, b))

    def mux(self, s: int, if0: int, if1: int) -> int:
        if s == ZERO:
            return if0
        if s == ONE:
            return if1
        if if0 == if1:
            return if0
        return self.xor(if0, self.and_(s, self.xor(if0, if1)))

    def mux_vec(self, s: int, if0: Sequence[int], if1: Sequence[int]) -> list[int]:
        return [self.mux(s, a, b) for a, b in zip(if0, if1)]

    def and_all(self, ws: Iterable[int]) -> int:
        ws = list(ws)
        if not ws:
            return ONE
        while len(ws) > 1:
            nxt = [self.and_(ws[i], ws[i + 1]) for i in range(0, len(ws) - 1, 2)]
            if len(ws) % 2:
                nxt.append(ws[-1])
            ws = nxt
        return ws[0]

    def select(self, index_bits: Sequence[int], values: Sequence[int]) -> int:
        """values[index] with index given little-endian; out-of-range picks garbage."""
        if len(values) == 1 or not index_bits:
            return values[0]
        lo, rest = index_bits[0], index_bits[1:]
        evens, odds = values[0::2], values[1::2]
        if not odds:
            return self.select(rest, evens)
        return self.mux(lo, self.select(rest, evens), self.select(rest, odds))

    def embed(self, c: Circuit, inputs: Sequence[int]) -> list[int]:
        """Inline ``c`` on the given wires and return its output wires."""
        if len(inputs) != c.n_in:
            raise ShapeError("embed: input count mismatch")
        w = list(inputs)
        for op, a, b in c.gates:
            if op == AND:
                w.append(self.and_(w[a], w[b]))
            elif op == XOR:
                w.append(self.xor(w[a], w[b]))
            elif op == NOT:
                w.append(self.not_(w[a]))
            else:
                w.append(self.const(op == CONST1))
        return [w[o] for o in c.outputs]

    def build(self, outputs: Sequence[int]) -> Circuit:
        outs = []
        for o in outputs:
            if o == ZERO:
                o = self._emit(CONST0)
            elif o == ONE:
                o = self._emit(CONST1)
            outs.append(o)
        return Circuit(self.n_in, len(outs), tuple(self.gates), tuple(outs))


# ---------------------------------------------------------------- budgets

@dataclass(frozen=True)
class CircuitBudget:
    n_in: int = 4
    n_gates_max: int = 8
    n_out: int = 1

    def __post_init__(self):
        if min(self.n_in, self.n_gates_max, self.n_out) <= 0:
            raise BudgetError("budgets must be positive")

    @property
    def idx_bits(self) -> int:
        return max(1, math.ceil(math.log2(self.n_in + self.n_gates_max)))

    @property
    def count_bits(self) -> int:
        return max(1, math.ceil(math.log2(self.n_gates_max + 1)))

    @property
    def slot_bits(self) -> int:
        return OP_BITS + 2 * self.idx_bits

    @property
    def length(self) -> int:
        return self.n_gates_max * self.slot_bits + self.count_bits + self.n_out * self.idx_bits

    def admits(self, c) -> bool:
        return (isinstance(c, Circuit) and c.n_in == self.n_in
                and c.n_out == self.n_out and len(c.gates) <= self.n_gates_max)


def _put(bits: list, value: int, width: int):
    bits.extend((value >> i) & 1 for i in range(width))


def encode(c: Circuit, budget: CircuitBudget) -> np.ndarray:
    """Fixed-length encoding; layout is gate slots, gate count, output wires."""
    if not budget.admits(c):
        raise BudgetError(f"circuit does not fit budget {budget}")
    w = budget.idx_bits
    out: list[int] = []
    for k in range(budget.n_gates_max):
        if k < len(c.gates):
            op, a, b = c.gates[k]
            _put(out, OP_CODE[op], OP_BITS)
            _put(out, a or 0, w)
            _put(out, b or 0, w)
        else:
            _put(out, 0, budget.slot_bits)
    _put(out, len(c.gates), budget.count_bits)
    for o in c.outputs:
        _put(out, o, w)
    return np.array(out, dtype=np.uint8)


def decode(bits, budget: CircuitBudget) -> Circuit:
    bits = as_bits(bits)
    if bits.size != budget.length:
        raise ShapeError(f"encoding must have {budget.length} bits")
    pos = 0

    def take(width):
        nonlocal pos
        v = 0
        for i in range(width):
            v |= int(bits[pos + i]) << i
        pos += width
        return v

    w = budget.idx_bits
    slots = [(take(OP_BITS), take(w), take(w)) for _ in range(budget.n_gates_max)]
    count = take(budget.count_bits)
    outputs = [take(w) for _ in range(budget.n_out)]
    if count > budget.n_gates_max:
        raise FormatError("gate count exceeds budget")
    gates = []
    for k, (code, a, b) in enumerate(slots):
        if k >= count:
            if code or a or b:
                raise FormatError("non-zero padding slot")
            continue
        if code >= len(OPS):
            raise FormatError(f"unknown op code {code}")
        op = OPS[code]
        if op in BINARY:
            gates.append(Gate(op, a, b))
        elif op == NOT:
            if b:
                raise FormatError("NOT gate with second input")
            gates.append(Gate(op, a))
        else:
            if a or b:
                raise FormatError("constant gate with inputs")
            gates.append(Gate(op))
    return Circuit(budget.n_in, budget.n_out, tuple(gates), tuple(outputs))


_UNIVERSAL_CACHE: dict = {}


def universal(n_in: int, n_gates_max: int, n_out: int) -> Circuit:
    """Interpreter circuit over ``encode(f) || x``; a naive multiplexer network."""
    key = (n_in, n_gates_max, n_out)
    if key in _UNIVERSAL_CACHE:
        return _UNIVERSAL_CACHE[key]
    budget = CircuitBudget(n_in, n_gates_max, n_out)
    L = budget.length
    cb = CircuitBuilder(L + n_in)
    enc = list(range(L))
    vals = list(range(L, L + n_in))
    w = budget.idx_bits
    for k in range(n_gates_max):
        base = k * budget.slot_bits
        o0, o1, o2 = enc[base:base + 3]
        a = cb.select(enc[base + 3:base + 3 + w], vals)
        b = cb.select(enc[base + 3 + w:base + 3 + 2 * w], vals)
        binary = cb.mux(o0, cb.and_(a, b), cb.xor(a, b))
        unary = cb.mux(o0, cb.not_(a), ZERO)
        vals.append(cb.mux(o2, cb.mux(o1, binary, unary), ONE))
    out_base = n_gates_max * budget.slot_bits + budget.count_bits
    outs = [cb.select(enc[out_base + j * w:out_base + (j + 1) * w], vals) for j in range(n_out)]
    u = cb.build(outs)
    _UNIVERSAL_CACHE[key] = u
    return u


# ---------------------------------------------------------------- helpers

def random_circuit(rng: np.random.Generator, n_in: int, n_gates: int, n_out: int = 1,
                   ops: Sequence[str] = OPS) -> Circuit:
    gates = []
    for k in range(n_gates):
        op = ops[int(rng.integers(len(ops)))]
        lim = n_in + k
        if op in BINARY:
            gates.append(Gate(op, int(rng.integers(lim)), int(rng.integers(lim))))
        elif op == NOT:
            gates.append(Gate(op, int(rng.integers(lim))))
        else:
            gates.append(Gate(op))
    n_w = n_in + n_gates
    outputs = tuple(int(rng.integers(n_w)) for _ in range(n_out))
    return Circuit(n_in, n_out, tuple(gates), outputs)


def parse_text(text: str) -> Circuit:
    """Parse the line format: header ``in=4 out=1``, one gate per line, optional ``OUT w..``.

    Without an ``OUT`` line the last ``out`` wires are the outputs.
    """
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise FormatError("empty circuit text")
    header = dict(tok.split("=", 1) for tok in lines[0].split() if "=" in tok)
    try:
        n_in, n_out = int(header["in"]), int(header["out"])
    except (KeyError, ValueError):
        raise FormatError("header must be 'in=<n> out=<m>'") from None
    gates, outputs = [], None
    for ln in lines[1:]:
        parts = ln.split()
        op = parts[0].upper()
        try:
            args = [int(p) for p in parts[1:]]
        except ValueError:
            raise FormatError(f"bad wire index in {ln!r}") from None
        if op == "OUT":
            outputs = tuple(args)
            continue
        arity = 2 if op in BINARY else 1 if op == NOT else 0
        if op not in OPS or len(args) != arity:
            raise FormatError(f"bad gate line {ln!r}")
        gates.append(Gate(op, *args))
    if outputs is None:
        n_w = n_in + len(gates)
        outputs = tuple(range(n_w - n_out, n_w))
    return Circuit(n_in, n_out, tuple(gates), outputs)


def format_text(c: Circuit) -> str:
    lines = [f"in={c.n_in} out={c.n_out}"]
    for op, a, b in c.gates:
        lines.append(" ".join([op] + [str(v) for v in (a, b) if v is not None]))
    lines.append("OUT " + " ".join(str(o) for o in c.outputs))
    return "\n".join(lines) + "\n"


def from_description(data: bytes) -> Circuit:
    """Inverse of :meth:`Circuit.describe`."""
    try:
        n_in, n_out, n_g = struct.unpack_from("<III", data, 0)
        pos = 12
        gates = []
        for _ in range(n_g):
            code, a, b = struct.unpack_from("<Bii", data, pos)
            pos += 9
            gates.append(Gate(OPS[code], None if a < 0 else a, None if b < 0 else b))
        outputs = struct.unpack_from(f"<{n_out}I", data, pos)
        pos += 4 * n_out
    except (struct.error, IndexError):
        raise FormatError("truncated circuit description") from None
    if pos != len(data):
        raise FormatError("trailing bytes after circuit description")
    return Circuit(n_in, n_out, tuple(gates), outputs)

"""Simulated quantum memory for BB84 (conjugate-coding) product states.

SIMULATION ONLY.  A :class:`QStore` keeps the hidden ``(bit, basis)`` pair of
every prepared qubit in classical memory and enforces no-cloning purely by
API discipline: every handle is linear and can be consumed by exactly one
measurement or discard.  Measuring in the preparation basis returns the
prepared bit; measuring in the other basis returns a fresh uniform bit.

The batch calls (``prepare_many``, ``measure_many``) are what the schemes
use; they validate every handle before consuming any of them.
"""
from __future__ import annotations

import contextlib
import os
import struct
import tempfile
from dataclasses import dataclass
from typing import Iterator, Sequence, Union

import numpy as np
from filelock import FileLock

from .errors import CapabilityError, FormatError, LinearityError, ShapeError

COMPUTATIONAL, HADAMARD = 0, 1

MAGIC = b"QSIM1"
BANNER = b"\n# SIMULATION ONLY: classical record of simulated BB84 qubits, not quantum state\n"
_RECORD = struct.Struct("<QBBB")


@dataclass(frozen=True, slots=True)
class QubitHandle:
    id: int


HandleLike = Union[QubitHandle, int]


def _ids(handles) -> np.ndarray:
    if isinstance(handles, np.ndarray):
        return handles.astype(np.int64, copy=False).ravel()
    return np.fromiter((h.id if isinstance(h, QubitHandle) else int(h) for h in handles), dtype=np.int64)


class QStore:
    def __init__(self, rng: np.random.Generator | None = None, allow_unsafe_clone: bool = False):
        self.rng = rng if rng is not None else np.random.default_rng()
        self.allow_unsafe_clone = allow_unsafe_clone
        self._bit = np.zeros(0, dtype=np.uint8)
        self._basis = np.zeros(0, dtype=np.uint8)
        self._consumed = np.zeros(0, dtype=bool)
        self._present = np.zeros(0, dtype=bool)
        self._n = 0

    def __len__(self) -> int:
        return int(self._present[:self._n].sum())

    def _grow(self, k: int):
        need = self._n + k
        cap = self._bit.size
        if need > cap:
            new = max(need, 2 * cap, 1024)
            for name in ("_bit", "_basis", "_consumed", "_present"):
                old = getattr(self, name)
                arr = np.zeros(new, dtype=old.dtype)
                arr[:cap] = old
                setattr(self, name, arr)

    # -- preparation
    def prepare(self, bit: int, basis: int) -> QubitHandle:
        return QubitHandle(int(self.prepare_many(np.array([bit]), np.array([basis]))[0]))

    def prepare_many(self, bits, bases) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.uint8).ravel()
        bases = np.asarray(bases, dtype=np.uint8).ravel()
        if bits.size != bases.size:
            raise ShapeError("bits and bases differ in length")
        if bits.size and (bits.max() > 1 or bases.max() > 1):
            raise ShapeError("bits and bases must be 0/1")
        k = bits.size
        self._grow(k)
        lo = self._n
        self._bit[lo:lo + k] = bits
        self._basis[lo:lo + k] = bases
        self._consumed[lo:lo + k] = False
        self._present[lo:lo + k] = True
        self._n += k
        return np.arange(lo, lo + k, dtype=np.int64)

    # -- consumption
    def _check_live(self, ids: np.ndarray):
        if ids.size == 0:
            return
        if ids.min() < 0 or ids.max() >= self._n or not self._present[ids].all():
            raise LinearityError("unknown qubit handle")
        if self._consumed[ids].any():
            raise LinearityError("qubit handle already consumed")
        if np.unique(ids).size != ids.size:
            raise LinearityError("the same qubit handle appears twice in one call")

    def is_live(self, handle: HandleLike) -> bool:
        i = _ids([handle])[0]
        return 0 <= i < self._n and bool(self._present[i]) and not bool(self._consumed[i])

    def live_mask(self, handles) -> np.ndarray:
        ids = _ids(handles)
        ok = (ids >= 0) & (ids < self._n)
        out = np.zeros(ids.size, dtype=bool)
        out[ok] = self._present[ids[ok]] & ~self._consumed[ids[ok]]
        return out

    def measure(self, handle: HandleLike, basis: int) -> int:
        return int(self.measure_many([handle], np.array([basis]))[0])

    def measure_many(self, handles, bases) -> np.ndarray:
        ids = _ids(handles)
        bases = np.broadcast_to(np.asarray(bases, dtype=np.uint8), ids.shape)
        self._check_live(ids)
        out = self._bit[ids].copy()
        wrong = self._basis[ids] != bases
        n_wrong = int(wrong.sum())
        if n_wrong:
            out[wrong] = self.rng.integers(0, 2, n_wrong, dtype=np.uint8)
        self._consumed[ids] = True
        return out

    def discard_many(self, handles) -> None:
        ids = _ids(handles)
        self._check_live(ids)
        self._consumed[ids] = True

    # -- counterfactual cloning
    def unsafe_clone(self, handle: HandleLike) -> QubitHandle:
        return QubitHandle(int(self.clone_many([handle])[0]))

    def clone_many(self, handles) -> np.ndarray:
        """Duplicate hidden states. Physically impossible; only for attack demonstrations."""
        if not self.allow_unsafe_clone:
            raise CapabilityError("unsafe_clone requires allow_unsafe_clone=True")
        ids = _ids(handles)
        self._check_live(ids)
        return self.prepare_many(self._bit[ids], self._basis[ids])

    # -- persistence
    def to_bytes(self) -> bytes:
        n = self._n
        present = np.nonzero(self._present[:n])[0]
        rec = np.zeros(present.size, dtype=[("id", "<u8"), ("bit", "u1"), ("basis", "u1"), ("consumed", "u1")])
        rec["id"] = present
        rec["bit"] = self._bit[present]
        rec["basis"] = self._basis[present]
        rec["consumed"] = self._consumed[present]
        return MAGIC + BANNER + struct.pack("<Q", present.size) + rec.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, rng: np.random.Generator | None = None,
                   allow_unsafe_clone: bool = False) -> "QStore":
        if not data.startswith(MAGIC):
            raise FormatError("not a QSIM1 store file")
        pos = len(MAGIC)
        if data[pos:pos + len(BANNER)] != BANNER:
            raise FormatError("store file is missing the SIMULATION ONLY banner")
        pos += len(BANNER)
        (count,) = struct.unpack_from("<Q", data, pos)
        pos += 8
        if len(data) - pos != count * _RECORD.size:
            raise FormatError("store file length does not match its record count")
        rec = np.frombuffer(data, dtype=[("id", "<u8"), ("bit", "u1"), ("basis", "u1"), ("consumed", "u1")],
                            count=count, offset=pos)
        store = cls(rng, allow_unsafe_clone)
        if count:
            ids = rec["id"].astype(np.int64)
            n = int(ids.max()) + 1
            store._grow(n)
            store._n = n
            store._bit[ids] = rec["bit"]
            store._basis[ids] = rec["basis"]
            store._consumed[ids] = rec["consumed"].astype(bool)
            store._present[ids] = True
        return store

    def save(self, path: Union[str, os.PathLike]) -> None:
        """Atomic write: temp file in the same directory, then rename."""
        path = os.fspath(path)
        d = os.path.dirname(os.path.abspath(path))
        fd, tmp = tempfile.mkstemp(prefix=".qsim-", dir=d)
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(self.to_bytes())
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        except BaseException:
            with contextlib.suppress(FileNotFoundError):
                os.unlink(tmp)
            raise

    @classmethod
    def load(cls, path, rng=None, allow_unsafe_clone: bool = False) -> "QStore":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read(), rng, allow_unsafe_clone)


@contextlib.contextmanager
def open_store(path, rng=None, create: bool = False) -> Iterator[QStore]:
    """Lock a store file, yield the loaded store, then write it back atomically.

    The store is written back even when the body raises: measurements that
    already happened are irreversible.
    """
    path = os.fspath(path)
    with FileLock(path + ".lock"):
        if create and not os.path.exists(path):
            store = QStore(rng)
        else:
            store = QStore.load(path, rng)
        try:
            yield store
        finally:
            store.save(path)


def handles(ids: Sequence[int]) -> list[QubitHandle]:
    return [QubitHandle(int(i)) for i in ids]

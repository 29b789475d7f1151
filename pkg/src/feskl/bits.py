"""Bit-vector helpers. Bit vectors are 1-D ``numpy.uint8`` arrays of 0/1."""
from __future__ import annotations

from typing import Iterable, Union

import numpy as np

from .errors import ShapeError

BitsLike = Union[np.ndarray, Iterable[int], str, bytes]


def as_bits(x: BitsLike) -> np.ndarray:
    if isinstance(x, np.ndarray):
        arr = x.astype(np.uint8, copy=False).ravel()
    elif isinstance(x, str):
        if x and set(x) - {"0", "1"}:
            raise ShapeError(f"not a bit string: {x!r}")
        arr = np.frombuffer(x.encode(), dtype=np.uint8) - ord("0")
    elif isinstance(x, (bytes, bytearray)):
        raise TypeError("use bytes_to_bits for byte strings")
    else:
        arr = np.fromiter((int(b) for b in x), dtype=np.uint8)
    if arr.size and arr.max() > 1:
        raise ShapeError("bit vector entries must be 0 or 1")
    return arr


def zeros(n: int) -> np.ndarray:
    return np.zeros(n, dtype=np.uint8)


def bytes_to_bits(data: bytes, n: int | None = None) -> np.ndarray:
    out = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")
    return out if n is None else out[:n].copy()


def bits_to_bytes(bits: np.ndarray) -> bytes:
    return np.packbits(as_bits(bits), bitorder="little").tobytes()


def int_to_bits(v: int, width: int) -> np.ndarray:
    return bytes_to_bits(v.to_bytes((width + 7) // 8, "little"), width)


def bits_to_int(bits: np.ndarray) -> int:
    return int.from_bytes(bits_to_bytes(bits), "little")


def to_str(bits: np.ndarray) -> str:
    return "".join("1" if b else "0" for b in as_bits(bits))


def random_bits(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.integers(0, 2, n, dtype=np.uint8)

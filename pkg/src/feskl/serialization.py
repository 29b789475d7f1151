"""Binary serialization: a msgpack object codec and the FESKL1 container.

``pack``/``unpack`` handle plain data plus numpy arrays, fractions, big
integers, tuples, frozensets, circuits and any dataclass registered with
:func:`register`.  The container wraps one artifact as tagged sections::

    "FESKL1" | version u16 | kind u8 | (tag u16 | len u32 | bytes)*

All integers are little-endian.  Loading rejects unknown kinds, unknown
versions and inconsistent lengths.
"""
from __future__ import annotations

import dataclasses
import struct
from fractions import Fraction
from typing import Any

import msgpack
import numpy as np

from .circuit_ir import Circuit, Gate, from_description
from .errors import FormatError

MAGIC = b"FESKL1"
VERSION = 1

KIND_MSK, KIND_FSK, KIND_VK, KIND_CT, KIND_CERT, KIND_QSTORE_REF = 1, 2, 3, 4, 5, 6
KINDS = {
    KIND_MSK: "msk", KIND_FSK: "fsk", KIND_VK: "vk",
    KIND_CT: "ct", KIND_CERT: "cert", KIND_QSTORE_REF: "qstore-ref",
}
KIND_BY_NAME = {v: k for k, v in KINDS.items()}

SECTION_BODY, SECTION_QSTORE, SECTION_LEVEL = 1, 2, 3

_EXT_OBJ, _EXT_ARRAY, _EXT_FRACTION, _EXT_BIGINT, _EXT_FROZENSET, _EXT_TUPLE, _EXT_CIRCUIT, _EXT_GATE = range(1, 9)

_REGISTRY: dict[str, type] = {}


def register(cls=None, *, memo: bool = False):
    """Class decorator: make a dataclass serializable by name.

    With ``memo=True`` each instance caches its encoding after the first
    ``pack``; only use it for classes whose instances are never mutated.
    """
    def wrap(cls):
        if not dataclasses.is_dataclass(cls):
            raise TypeError(f"{cls.__name__} is not a dataclass")
        name = f"{cls.__module__.rsplit('.', 1)[-1]}.{cls.__qualname__}"
        _REGISTRY[name] = cls
        cls._feskl_name = name
        cls._feskl_memo = memo
        return cls
    return wrap if cls is None else wrap(cls)


def _default(obj):
    if isinstance(obj, Gate):
        return msgpack.ExtType(_EXT_GATE, _packb(list(obj)))
    if isinstance(obj, tuple):
        return msgpack.ExtType(_EXT_TUPLE, _packb(list(obj)))
    if isinstance(obj, Circuit):
        return msgpack.ExtType(_EXT_CIRCUIT, obj.describe())
    if isinstance(obj, np.ndarray):
        return msgpack.ExtType(_EXT_ARRAY, _packb([obj.dtype.str, list(obj.shape), obj.tobytes()]))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, Fraction):
        return msgpack.ExtType(_EXT_FRACTION, _packb([obj.numerator, obj.denominator]))
    if isinstance(obj, int):
        # only reached for integers outside the 64-bit msgpack range
        n = (obj.bit_length() + 8) // 8
        return msgpack.ExtType(_EXT_BIGINT, obj.to_bytes(n, "little", signed=True))
    if isinstance(obj, frozenset):
        return msgpack.ExtType(_EXT_FROZENSET, _packb(sorted(obj)))
    name = getattr(type(obj), "_feskl_name", None)
    if name is not None and _REGISTRY.get(name) is type(obj):
        cached = obj.__dict__.get("_feskl_packed") if type(obj)._feskl_memo else None
        if cached is not None:
            return cached
        values = [getattr(obj, f.name) for f in dataclasses.fields(obj) if f.init]
        ext = msgpack.ExtType(_EXT_OBJ, _packb([name, values]))
        if type(obj)._feskl_memo:
            object.__setattr__(obj, "_feskl_packed", ext)
        return ext
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _ext_hook(code: int, data: bytes):
    if code == _EXT_TUPLE:
        return tuple(_unpackb(data))
    if code == _EXT_GATE:
        return Gate(*_unpackb(data))
    if code == _EXT_CIRCUIT:
        return from_description(data)
    if code == _EXT_ARRAY:
        dtype, shape, raw = _unpackb(data)
        return np.frombuffer(raw, dtype=np.dtype(dtype)).reshape(shape).copy()
    if code == _EXT_FRACTION:
        num, den = _unpackb(data)
        return Fraction(num, den)
    if code == _EXT_BIGINT:
        return int.from_bytes(data, "little", signed=True)
    if code == _EXT_FROZENSET:
        return frozenset(_unpackb(data))
    if code == _EXT_OBJ:
        name, values = _unpackb(data)
        cls = _REGISTRY.get(name)
        if cls is None:
            raise FormatError(f"unknown serialized type {name!r}")
        return cls(*values)
    raise FormatError(f"unknown extension code {code}")


def _packb(obj) -> bytes:
    return msgpack.packb(obj, default=_default, strict_types=True, use_bin_type=True)


def _unpackb(data: bytes):
    return msgpack.unpackb(data, ext_hook=_ext_hook, raw=False, strict_map_key=False)


def pack(obj: Any) -> bytes:
    return _packb(obj)


def unpack(data: bytes) -> Any:
    try:
        return _unpackb(data)
    except FormatError:
        raise
    except (ValueError, TypeError, msgpack.UnpackException) as exc:
        raise FormatError(f"malformed payload: {exc}") from None


# ------------------------------------------------------------ container

_HEAD = struct.Struct("<6sHB")
_SECTION = struct.Struct("<HI")


def dump_container(kind: int, sections: dict[int, bytes]) -> bytes:
    if kind not in KINDS:
        raise FormatError(f"unknown container kind {kind}")
    out = [_HEAD.pack(MAGIC, VERSION, kind)]
    for tag in sorted(sections):
        body = sections[tag]
        out.append(_SECTION.pack(tag, len(body)))
        out.append(body)
    return b"".join(out)


def load_container(data: bytes) -> tuple[int, dict[int, bytes]]:
    if len(data) < _HEAD.size:
        raise FormatError("container too short")
    magic, version, kind = _HEAD.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError("not a FESKL1 container")
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}")
    if kind not in KINDS:
        raise FormatError(f"unknown container kind {kind}")
    pos = _HEAD.size
    sections: dict[int, bytes] = {}
    while pos < len(data):
        if len(data) - pos < _SECTION.size:
            raise FormatError("truncated section header")
        tag, n = _SECTION.unpack_from(data, pos)
        pos += _SECTION.size
        if len(data) - pos < n:
            raise FormatError("section length exceeds container")
        if tag in sections:
            raise FormatError(f"duplicate section {tag}")
        sections[tag] = data[pos:pos + n]
        pos += n
    return kind, sections


_EXTRA_TAGS = {"qstore": SECTION_QSTORE, "level": SECTION_LEVEL}


def dump_artifact(kind: int, obj: Any, **extra: bytes) -> bytes:
    """Container with the packed object plus optional ``qstore`` and ``level`` sections."""
    sections = {SECTION_BODY: pack(obj)}
    for name, body in extra.items():
        if name not in _EXTRA_TAGS:
            raise TypeError(f"unknown artifact section {name!r}")
        sections[_EXTRA_TAGS[name]] = bytes(body)
    return dump_container(kind, sections)


def load_artifact(data: bytes, expect: int | None = None) -> tuple[Any, dict[int, bytes]]:
    kind, sections = load_container(data)
    if expect is not None and kind != expect:
        raise FormatError(f"expected a {KINDS[expect]} container, got {KINDS[kind]}")
    if SECTION_BODY not in sections:
        raise FormatError("container has no body section")
    return unpack(sections[SECTION_BODY]), sections

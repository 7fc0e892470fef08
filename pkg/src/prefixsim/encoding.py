"""Low-level binary primitives: uvarints, length-prefixed bytes, vectors.

These are the building blocks of the wire format (see :mod:`prefixsim.wire`
for the full message layouts) and of the canonical byte strings fed to the
signing and hashing backends.
"""

from __future__ import annotations

from typing import Sequence, Tuple

from .prefixes import BOT, Element, Vector, _Bot


class DecodeError(ValueError):
    """Raised when a byte string cannot be parsed as the claimed structure."""


def write_uint(out: list, value: int) -> None:
    if value < 0:
        raise ValueError("uvarint cannot encode negatives")
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(bytes([byte | 0x80]))
        else:
            out.append(bytes([byte]))
            return


def read_uint(data: bytes, pos: int) -> Tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(data):
            raise DecodeError("truncated uvarint")
        byte = data[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7
        if shift > 63:
            raise DecodeError("uvarint too long")


def write_bytes(out: list, blob: bytes) -> None:
    write_uint(out, len(blob))
    out.append(blob)


def read_bytes(data: bytes, pos: int) -> Tuple[bytes, int]:
    length, pos = read_uint(data, pos)
    if pos + length > len(data):
        raise DecodeError("truncated byte field")
    return data[pos : pos + length], pos + length


_ELEM_BOT = 0
_ELEM_BYTES = 1


def write_element(out: list, elem: Element) -> None:
    if isinstance(elem, _Bot):
        out.append(bytes([_ELEM_BOT]))
    else:
        out.append(bytes([_ELEM_BYTES]))
        write_bytes(out, elem)


def read_element(data: bytes, pos: int) -> Tuple[Element, int]:
    if pos >= len(data):
        raise DecodeError("truncated element")
    kind = data[pos]
    pos += 1
    if kind == _ELEM_BOT:
        return BOT, pos
    if kind == _ELEM_BYTES:
        return read_bytes(data, pos)
    raise DecodeError(f"unknown element kind {kind}")


def encode_vector(vec: Sequence[Element]) -> bytes:
    out: list = []
    write_uint(out, len(vec))
    for elem in vec:
        write_element(out, elem)
    return b"".join(out)


def write_vector(out: list, vec: Sequence[Element]) -> None:
    out.append(encode_vector(vec))


def read_vector(data: bytes, pos: int) -> Tuple[Vector, int]:
    count, pos = read_uint(data, pos)
    elems = []
    for _ in range(count):
        elem, pos = read_element(data, pos)
        elems.append(elem)
    return tuple(elems), pos


def encode_uint_pair(a: int, b: int) -> bytes:
    out: list = []
    write_uint(out, a)
    write_uint(out, b)
    return b"".join(out)

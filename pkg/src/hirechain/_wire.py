"""Little-endian binary reader/writer and the canonical string-record codec.

Every variable-length field is length-prefixed and every map is emitted in
sorted key order, so each value has exactly one encoding.
"""

from __future__ import annotations

import struct
from typing import Mapping

from .errors import BadTag, TrailingBytes, TruncatedInput


class Writer:
    def __init__(self) -> None:
        self._parts: list[bytes] = []

    def u8(self, value: int) -> None:
        self._parts.append(struct.pack("<B", value))

    def u16(self, value: int) -> None:
        self._parts.append(struct.pack("<H", value))

    def u32(self, value: int) -> None:
        self._parts.append(struct.pack("<I", value))

    def u64(self, value: int) -> None:
        self._parts.append(struct.pack("<Q", value))

    def raw(self, data: bytes) -> None:
        self._parts.append(data)

    def blob16(self, data: bytes) -> None:
        if len(data) > 0xFFFF:
            raise ValueError("blob too long for 16-bit length prefix")
        self.u16(len(data))
        self.raw(data)

    def blob32(self, data: bytes) -> None:
        self.u32(len(data))
        self.raw(data)

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class Reader:
    """Strict cursor over a byte buffer; over-reads raise TruncatedInput."""

    def __init__(self, data: bytes) -> None:
        self._data = data
        self._pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self._pos + n > len(self._data):
            raise TruncatedInput(f"needed {n} bytes at offset {self._pos}")
        out = self._data[self._pos:self._pos + n]
        self._pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def blob16(self) -> bytes:
        return self.take(self.u16())

    def blob32(self) -> bytes:
        return self.take(self.u32())

    def remaining(self) -> int:
        return len(self._data) - self._pos

    def expect_end(self) -> None:
        if self._pos != len(self._data):
            raise TrailingBytes(f"{self.remaining()} unconsumed bytes")


def encode_record(fields: Mapping[str, str]) -> bytes:
    """Encode a string map with sorted keys; the canonical form of a record."""
    w = Writer()
    items = sorted(fields.items())
    w.u32(len(items))
    for key, value in items:
        w.blob32(key.encode("utf-8"))
        w.blob32(value.encode("utf-8"))
    return w.getvalue()


def read_record(r: Reader) -> dict[str, str]:
    count = r.u32()
    out: dict[str, str] = {}
    prev: bytes | None = None
    for _ in range(count):
        key_bytes = r.blob32()
        value_bytes = r.blob32()
        if prev is not None and key_bytes <= prev:
            raise BadTag("record keys not in strict sorted order")
        prev = key_bytes
        try:
            out[key_bytes.decode("utf-8")] = value_bytes.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise BadTag("record field is not valid UTF-8") from exc
    return out


def decode_record(data: bytes) -> dict[str, str]:
    r = Reader(data)
    out = read_record(r)
    r.expect_end()
    return out

"""Length-prefixed big-endian byte codec shared by all canonical encodings."""
from __future__ import annotations

import struct


class DecodeError(ValueError):
    pass


class Writer:
    def __init__(self) -> None:
        self._parts: list[bytes] = []

    def raw(self, data: bytes) -> "Writer":
        self._parts.append(bytes(data))
        return self

    def fixed(self, data: bytes, size: int) -> "Writer":
        if len(data) != size:
            raise ValueError(f"expected {size} bytes, got {len(data)}")
        return self.raw(data)

    def u8(self, v: int) -> "Writer":
        return self.raw(struct.pack(">B", v))

    def u16(self, v: int) -> "Writer":
        return self.raw(struct.pack(">H", v))

    def u32(self, v: int) -> "Writer":
        return self.raw(struct.pack(">I", v))

    def u64(self, v: int) -> "Writer":
        return self.raw(struct.pack(">Q", v))

    def bytes8(self, data: bytes) -> "Writer":
        return self.u8(len(data)).raw(data)

    def bytes16(self, data: bytes) -> "Writer":
        return self.u16(len(data)).raw(data)

    def bytes32(self, data: bytes) -> "Writer":
        return self.u32(len(data)).raw(data)

    def str16(self, s: str) -> "Writer":
        return self.bytes16(s.encode("utf-8"))

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class Reader:
    def __init__(self, data: bytes) -> None:
        self._data = memoryview(data)
        self._pos = 0

    def take(self, n: int) -> bytes:
        end = self._pos + n
        if n < 0 or end > len(self._data):
            raise DecodeError("truncated input")
        out = self._data[self._pos:end].tobytes()
        self._pos = end
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def bytes8(self) -> bytes:
        return self.take(self.u8())

    def bytes16(self) -> bytes:
        return self.take(self.u16())

    def bytes32(self) -> bytes:
        return self.take(self.u32())

    def str16(self) -> str:
        try:
            return self.bytes16().decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError(str(exc)) from None

    def flag(self) -> bool:
        v = self.u8()
        if v > 1:
            raise DecodeError(f"bad boolean byte {v}")
        return bool(v)

    @property
    def remaining(self) -> int:
        return len(self._data) - self._pos

    def done(self) -> None:
        if self.remaining:
            raise DecodeError(f"{self.remaining} trailing bytes")

"""Bit-level plumbing: bit buffers, CRC-16/CCITT-FALSE, Exp-Golomb codes.

Everything here operates on numpy uint8 arrays holding one bit per element
(values 0/1, MSB-first whenever a multi-bit field is involved). Packet
payloads are not byte aligned, so the CRC has to work on arbitrary bit
strings; bulk bytes go through a table and the ragged tail is processed
bit-serially.
"""

from __future__ import annotations

import numpy as np


class CorruptStreamError(Exception):
    """A bitstream failed to parse (bad codeword, overrun, or truncation)."""


class EndOfStreamError(CorruptStreamError):
    """A read ran past the end of the available bits."""


# ---------------------------------------------------------------------------
# bit buffers

class BitWriter:
    def __init__(self) -> None:
        self._chunks: list[np.ndarray] = []
        self._nbits = 0

    def __len__(self) -> int:
        return self._nbits

    def write_bit(self, bit: int) -> None:
        self._chunks.append(np.array([bit & 1], dtype=np.uint8))
        self._nbits += 1

    def write_bits(self, value: int, width: int) -> None:
        """Write an unsigned integer MSB-first in a fixed-width field."""
        if value < 0 or (width < 64 and value >> width):
            raise ValueError(f"value {value} does not fit in {width} bits")
        bits = (value >> np.arange(width - 1, -1, -1)) & 1
        self._chunks.append(bits.astype(np.uint8))
        self._nbits += width

    def write_array(self, bits: np.ndarray) -> None:
        arr = np.asarray(bits, dtype=np.uint8)
        self._chunks.append(arr)
        self._nbits += arr.size

    def to_array(self) -> np.ndarray:
        if not self._chunks:
            return np.zeros(0, dtype=np.uint8)
        return np.concatenate(self._chunks)


class BitReader:
    def __init__(self, bits: np.ndarray, pos: int = 0) -> None:
        self.bits = np.asarray(bits, dtype=np.uint8)
        self.pos = pos

    @property
    def remaining(self) -> int:
        return self.bits.size - self.pos

    def read_bit(self) -> int:
        if self.pos >= self.bits.size:
            raise EndOfStreamError("read past end of bitstream")
        b = int(self.bits[self.pos])
        self.pos += 1
        return b

    def read_bits(self, width: int) -> int:
        if self.pos + width > self.bits.size:
            raise EndOfStreamError("read past end of bitstream")
        chunk = self.bits[self.pos:self.pos + width]
        self.pos += width
        value = 0
        for b in chunk:
            value = (value << 1) | int(b)
        return value

    def read_array(self, n: int) -> np.ndarray:
        if self.pos + n > self.bits.size:
            raise EndOfStreamError("read past end of bitstream")
        chunk = self.bits[self.pos:self.pos + n]
        self.pos += n
        return chunk


def bytes_to_bits(data: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))


def bits_to_bytes(bits: np.ndarray) -> bytes:
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size % 8:
        raise ValueError("bit count not a multiple of 8")
    return np.packbits(bits).tobytes()


# ---------------------------------------------------------------------------
# CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, xorout 0

_CRC_POLY = 0x1021


def _build_crc_table() -> np.ndarray:
    table = np.zeros(256, dtype=np.uint16)
    for byte in range(256):
        reg = byte << 8
        for _ in range(8):
            if reg & 0x8000:
                reg = ((reg << 1) ^ _CRC_POLY) & 0xFFFF
            else:
                reg = (reg << 1) & 0xFFFF
        table[byte] = reg
    return table


_CRC_TABLE = _build_crc_table()


def crc16(bits: np.ndarray) -> int:
    """CRC-16/CCITT-FALSE over a bit string (any length, MSB-first)."""
    bits = np.asarray(bits, dtype=np.uint8)
    reg = 0xFFFF
    nbytes = bits.size // 8
    if nbytes:
        for byte in np.packbits(bits[:nbytes * 8]):
            reg = ((reg << 8) & 0xFFFF) ^ int(_CRC_TABLE[(reg >> 8) ^ int(byte)])
    for b in bits[nbytes * 8:]:
        msb = (reg >> 15) & 1
        reg = (reg << 1) & 0xFFFF
        if msb ^ int(b):
            reg ^= _CRC_POLY
    return reg


def crc16_bytes(data: bytes) -> int:
    return crc16(bytes_to_bits(data))


# ---------------------------------------------------------------------------
# order-0 Exp-Golomb code: u -> [k zeros][1][k-bit suffix of u+1]

_EG_CACHE: dict[int, np.ndarray] = {}


def exp_golomb_encode(u: int) -> np.ndarray:
    if u < 0:
        raise ValueError("Exp-Golomb encodes non-negative integers")
    cached = _EG_CACHE.get(u)
    if cached is not None:
        return cached
    k = (u + 1).bit_length() - 1
    bits = np.zeros(2 * k + 1, dtype=np.uint8)
    bits[k] = 1
    suffix = (u + 1) - (1 << k)
    for i in range(k):
        bits[k + 1 + i] = (suffix >> (k - 1 - i)) & 1
    if u < 4096:
        _EG_CACHE[u] = bits
    return bits


def exp_golomb_length(u: int) -> int:
    return 2 * ((u + 1).bit_length() - 1) + 1


def exp_golomb_decode(reader: BitReader) -> int:
    bits = reader.bits
    pos = reader.pos
    end = bits.size
    if pos >= end:
        raise EndOfStreamError("empty stream at codeword start")
    # leading zero count up to the separator 1
    nz = bits[pos:min(end, pos + 33)]
    ones = np.nonzero(nz)[0]
    if ones.size == 0:
        raise CorruptStreamError("no separator within 33 bits")
    k = int(ones[0])
    if k > 31:
        raise CorruptStreamError("implausible Exp-Golomb prefix")
    reader.pos = pos + k + 1
    suffix = reader.read_bits(k) if k else 0
    return (1 << k) + suffix - 1


def zigzag_int(v: int) -> int:
    """Signed to unsigned: 0->0, -1->1, 1->2, -2->3, ..."""
    return 2 * v if v >= 0 else -2 * v - 1


def unzigzag_int(u: int) -> int:
    return u // 2 if u % 2 == 0 else -(u + 1) // 2

"""MSB-first bit writer/reader with order-0 exp-Golomb syntax elements."""
from __future__ import annotations

from .errors import BitstreamError

COEFFS_PER_BLOCK = 64


class BitWriter:
    def __init__(self):
        self._buf = bytearray()
        self._acc = 0
        self._nacc = 0
        self.bits_written = 0

    def write_bits(self, value: int, n: int):
        if n == 0:
            return
        if value < 0 or value >> n:
            raise ValueError(f"value {value} does not fit in {n} bits")
        self.bits_written += n
        self._acc = (self._acc << n) | value
        self._nacc += n
        while self._nacc >= 8:
            self._nacc -= 8
            self._buf.append((self._acc >> self._nacc) & 0xFF)
        self._acc &= (1 << self._nacc) - 1

    def write_ue(self, v: int):
        if v < 0 or v >= 0xFFFFFFFF:
            raise ValueError(f"ue value out of range: {v}")
        code = v + 1
        length = code.bit_length()
        self.write_bits(code, 2 * length - 1)

    def write_se(self, v: int):
        self.write_ue(-2 * v if v <= 0 else 2 * v - 1)

    def byte_align(self) -> int:
        pad = (-self.bits_written) % 8
        self.write_bits(0, pad)
        return pad

    def getvalue(self) -> bytes:
        """Bytes written so far; a partial last byte is zero-padded."""
        if self._nacc:
            return bytes(self._buf) + bytes([(self._acc << (8 - self._nacc)) & 0xFF])
        return bytes(self._buf)


class BitReader:
    def __init__(self, data: bytes):
        self._data = bytes(data)
        self._nbits = len(self._data) * 8
        self.pos = 0

    @property
    def bits_left(self) -> int:
        return self._nbits - self.pos

    def read_bit(self) -> int:
        if self.pos >= self._nbits:
            raise BitstreamError("unexpected end of bitstream")
        b = (self._data[self.pos >> 3] >> (7 - (self.pos & 7))) & 1
        self.pos += 1
        return b

    def read_bits(self, n: int) -> int:
        if n == 0:
            return 0
        if self.pos + n > self._nbits:
            raise BitstreamError("unexpected end of bitstream")
        first, last = self.pos >> 3, (self.pos + n - 1) >> 3
        chunk = int.from_bytes(self._data[first:last + 1], "big")
        shift = (last + 1) * 8 - (self.pos + n)
        self.pos += n
        return (chunk >> shift) & ((1 << n) - 1)

    def read_ue(self) -> int:
        zeros = 0
        while self.read_bit() == 0:
            zeros += 1
            if zeros > 31:
                raise BitstreamError("exp-Golomb prefix too long")
        return (1 << zeros | self.read_bits(zeros)) - 1

    def read_se(self) -> int:
        k = self.read_ue()
        return (k + 1) // 2 if k & 1 else -(k // 2)

    def byte_align(self) -> int:
        pad = (-self.pos) % 8
        if pad and self.read_bits(pad):
            raise BitstreamError("non-zero alignment padding")
        return pad


def ue_bits(v: int) -> int:
    return 2 * (v + 1).bit_length() - 1


def se_bits(v: int) -> int:
    return ue_bits(-2 * v if v <= 0 else 2 * v - 1)


def write_coeffs(w: BitWriter, scanned):
    """ue(nonzero count), then per nonzero: ue(zero run before it), se(level)."""
    values = [int(v) for v in scanned]
    if len(values) != COEFFS_PER_BLOCK:
        raise ValueError("coefficient block must hold 64 values")
    nz = [i for i, v in enumerate(values) if v]
    w.write_ue(len(nz))
    prev = -1
    for i in nz:
        w.write_ue(i - prev - 1)
        w.write_se(values[i])
        prev = i


def read_coeffs(r: BitReader) -> list[int]:
    out = [0] * COEFFS_PER_BLOCK
    count = r.read_ue()
    if count > COEFFS_PER_BLOCK:
        raise BitstreamError("corrupt coefficient block")
    pos = -1
    for _ in range(count):
        pos += r.read_ue() + 1
        if pos >= COEFFS_PER_BLOCK:
            raise BitstreamError("corrupt coefficient block")
        level = r.read_se()
        if level == 0:
            raise BitstreamError("corrupt coefficient block")
        out[pos] = level
    return out

"""The ``.evc`` container, display-to-decoding reorder and the decoder.

Layout (little-endian, byte-aligned): header
``"EVC1" u16 width, u16 height, u8 block_size, u8 tu_size, u8 interp_factor,
u8 gop_length, u32 frame_count, u8 base_qp, u32 timebase_num, u32 timebase_den``
followed by ``frame_count`` units in decoding order, each
``u8 type, u32 poc, [u8 qp | u32 fwd_ref_poc, u32 bwd_ref_poc], u32 payload_size, payload``.
``width``/``height`` are the true picture size; coding uses the size padded
to a multiple of the block size. The timebase is seconds per display frame.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, Sequence

import numpy as np

from .core_model import (CTU_SIZE, TU_SIZE, EncodedFrameUnit, Frame, FrameType, GopStructure,
                         crop, fetch_block, padded_size)
from .counters import counters
from .errors import BitstreamError, EvcError
from .intermediate_encoder import parse_bframe_payload
from .keyframe_codec import FrameBuffer, decode_keyframe_payload
from .motion_estimation import BMode

MAGIC = b"EVC1"
_HEADER = struct.Struct("<4sHHBBBBIBII")
_UNIT_HEAD = struct.Struct("<BI")
_U8 = struct.Struct("<B")
_U32 = struct.Struct("<I")
_REFS = struct.Struct("<II")


@dataclass(frozen=True)
class StreamHeader:
    width: int
    height: int
    interp_factor: int
    gop_length: int
    frame_count: int
    base_qp: int
    timebase: tuple[int, int] = (1, 30)
    block_size: int = CTU_SIZE
    tu_size: int = TU_SIZE

    @property
    def coded_width(self) -> int:
        return padded_size(self.width, self.block_size)

    @property
    def coded_height(self) -> int:
        return padded_size(self.height, self.block_size)

    def timestamp_us(self, poc: int) -> int:
        num, den = self.timebase
        return (2 * poc * num * 1_000_000 + den) // (2 * den)


@dataclass(frozen=True)
class Bitstream:
    header: StreamHeader
    units: tuple[EncodedFrameUnit, ...]

    @property
    def payload_bits(self) -> int:
        return sum(u.payload_bits for u in self.units)


# synthesis ---------------------------------------------------------------------

def decoding_order(schedule: GopStructure) -> list[int]:
    """Display POCs in decoding order: each closing keyframe precedes the B frames it brackets."""
    order = []
    pending = []
    for slot in schedule.frame_slots:
        if slot.frame_type == FrameType.B:
            pending.append(slot.poc)
        else:
            order.append(slot.poc)
            order.extend(pending)
            pending = []
    if pending:
        raise EvcError("incomplete GOP")
    return order


def synthesize_stream(key_units: Sequence[EncodedFrameUnit], b_units: Sequence[EncodedFrameUnit],
                      schedule: GopStructure, header: StreamHeader | None = None) -> Bitstream:
    by_poc = {}
    for u in list(key_units) + list(b_units):
        if u.poc in by_poc:
            raise EvcError(f"duplicate unit for poc {u.poc}")
        by_poc[u.poc] = u
    for slot in schedule.frame_slots:
        u = by_poc.get(slot.poc)
        if u is None or u.frame_type != slot.frame_type:
            raise EvcError("incomplete GOP")
    if len(by_poc) != schedule.frame_count:
        raise EvcError("unit without a schedule slot")
    keys = {u.poc for u in key_units}
    for u in b_units:
        if u.fwd_ref_poc not in keys or u.bwd_ref_poc not in keys:
            raise EvcError("dangling reference")
    units = tuple(by_poc[p] for p in decoding_order(schedule))
    if header is None:
        raise EvcError("stream header required")
    if header.frame_count != schedule.frame_count:
        raise EvcError("header frame count does not match schedule")
    return Bitstream(header, units)


# serialization -----------------------------------------------------------------

def bitstream_bytes(bs: Bitstream) -> bytes:
    h = bs.header
    out = bytearray(_HEADER.pack(MAGIC, h.width, h.height, h.block_size, h.tu_size, h.interp_factor,
                                 h.gop_length, h.frame_count, h.base_qp, *h.timebase))
    for u in bs.units:
        out += _UNIT_HEAD.pack(int(u.frame_type), u.poc)
        if u.frame_type == FrameType.B:
            out += _REFS.pack(u.fwd_ref_poc, u.bwd_ref_poc)
        else:
            out += _U8.pack(u.qp)
        out += _U32.pack(len(u.payload))
        out += u.payload
    return bytes(out)


def write_bitstream(bs: Bitstream, sink: BinaryIO) -> int:
    data = bitstream_bytes(bs)
    sink.write(data)
    return len(data)


def container_overhead_bytes(bs: Bitstream) -> int:
    return len(bitstream_bytes(bs)) - sum(len(u.payload) for u in bs.units)


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: struct.Struct):
        if self.pos + fmt.size > len(self.data):
            raise BitstreamError("unexpected end of bitstream")
        vals = fmt.unpack_from(self.data, self.pos)
        self.pos += fmt.size
        return vals

    def raw(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise BitstreamError("unexpected end of bitstream")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out


def parse_bitstream(source) -> Bitstream:
    data = source if isinstance(source, (bytes, bytearray)) else source.read()
    cur = _Cursor(bytes(data))
    if len(data) < 4 or bytes(data[:4]) != MAGIC:
        raise BitstreamError("not an EVC stream")
    _, w, h, bsize, tsize, interp, gop, count, base_qp, num, den = cur.take(_HEADER)
    if bsize != CTU_SIZE or tsize != TU_SIZE or w == 0 or h == 0 or gop == 0 or base_qp > 51 \
            or num == 0 or den == 0:
        raise BitstreamError("corrupt header")
    header = StreamHeader(w, h, interp, gop, count, base_qp, (num, den), bsize, tsize)
    units = []
    for _ in range(count):
        ftype, poc = cur.take(_UNIT_HEAD)
        if ftype > FrameType.B:
            raise BitstreamError("corrupt header")
        try:
            if ftype == FrameType.B:
                fwd, bwd = cur.take(_REFS)
                (size,) = cur.take(_U32)
                units.append(EncodedFrameUnit(FrameType.B, poc, cur.raw(size), fwd_ref_poc=fwd, bwd_ref_poc=bwd))
            else:
                (qp,) = cur.take(_U8)
                if qp > 51:
                    raise BitstreamError("corrupt header")
                (size,) = cur.take(_U32)
                units.append(EncodedFrameUnit(FrameType(ftype), poc, cur.raw(size), qp=qp))
        except EvcError as exc:
            if isinstance(exc, BitstreamError):
                raise
            raise BitstreamError(f"corrupt header: {exc}") from exc
    if cur.pos != len(cur.data):
        raise BitstreamError("corrupt header: trailing data after last unit")
    pocs = sorted(u.poc for u in units)
    if pocs != list(range(count)):
        raise BitstreamError("corrupt header: unit POCs are not a permutation of the frame range")
    seen_keys = set()
    for u in units:
        if u.frame_type == FrameType.B:
            if u.fwd_ref_poc not in seen_keys or u.bwd_ref_poc not in seen_keys:
                raise BitstreamError("dangling reference")
        else:
            seen_keys.add(u.poc)
    if units and units[0].frame_type != FrameType.I:
        raise BitstreamError("corrupt header: stream must start with an I unit")
    return Bitstream(header, tuple(units))


# decoding ----------------------------------------------------------------------

def decode_keyframe(unit: EncodedFrameUnit, buf: FrameBuffer, width: int, height: int,
                    timestamp: int = 0) -> Frame:
    """Decode an I/P unit at the coded size and store it in ``buf``."""
    if unit.frame_type == FrameType.B:
        raise BitstreamError("corrupt keyframe payload: B units carry no coefficient syntax")
    ref = buf.frame if unit.frame_type == FrameType.P else None
    if unit.frame_type == FrameType.P and ref is None:
        raise EvcError("missing reference frame")
    frame = decode_keyframe_payload(unit.payload, unit.frame_type, unit.qp, width, height, ref,
                                    unit.poc, timestamp)
    buf.frame = frame
    return frame


def motion_compensate(fwd_src: np.ndarray, bwd_src: np.ndarray, modes: np.ndarray,
                      fwd: np.ndarray, bwd: np.ndarray) -> np.ndarray:
    """Per-block warp: forward, backward, or their half-up rounded average (bi)."""
    s = CTU_SIZE
    a = np.asarray(fwd_src, dtype=np.int64)
    b = np.asarray(bwd_src, dtype=np.int64)
    h, w = a.shape
    out = np.empty((h, w), np.int64)
    for by in range(h // s):
        for bx in range(w // s):
            mode = modes[by, bx]
            if mode != BMode.BWD:
                p_fwd = fetch_block(a, bx * s + int(fwd[by, bx, 0]), by * s + int(fwd[by, bx, 1]), s)
                counters.mc_block_warps += 1
            if mode != BMode.FWD:
                p_bwd = fetch_block(b, bx * s + int(bwd[by, bx, 0]), by * s + int(bwd[by, bx, 1]), s)
                counters.mc_block_warps += 1
            if mode == BMode.BI:
                pred = (p_fwd + p_bwd + 1) >> 1
            elif mode == BMode.FWD:
                pred = p_fwd
            else:
                pred = p_bwd
            out[by * s:(by + 1) * s, bx * s:(bx + 1) * s] = pred
    return out


def decode_bframe(unit: EncodedFrameUnit, fwd_ref: Frame | None, bwd_ref: Frame | None,
                  timestamp: int = 0) -> Frame:
    """Motion-compensate a B unit from its two keyframes; no residual is involved."""
    if unit.frame_type != FrameType.B:
        raise BitstreamError("corrupt B payload: not a B unit")
    if fwd_ref is None or bwd_ref is None:
        raise EvcError("dangling reference")
    if fwd_ref.samples.shape != bwd_ref.samples.shape:
        raise EvcError("geometry mismatch")
    h, w = fwd_ref.samples.shape
    modes, fwd, bwd = parse_bframe_payload(unit.payload, w // CTU_SIZE, h // CTU_SIZE)
    out = motion_compensate(fwd_ref.samples, bwd_ref.samples, modes, fwd, bwd)
    return Frame(out, unit.poc, timestamp)


def decode_stream(bs: Bitstream, crop_output: bool = True) -> list[Frame]:
    """All frames in display order."""
    h = bs.header
    cw, ch = h.coded_width, h.coded_height
    buf = FrameBuffer()
    keyframes: dict[int, Frame] = {}
    decoded: dict[int, Frame] = {}
    for u in bs.units:
        ts = h.timestamp_us(u.poc)
        if u.frame_type == FrameType.B:
            frame = decode_bframe(u, keyframes.get(u.fwd_ref_poc), keyframes.get(u.bwd_ref_poc), ts)
        else:
            frame = decode_keyframe(u, buf, cw, ch, ts)
            keyframes[u.poc] = frame
        decoded[u.poc] = frame
    frames = [decoded[p] for p in sorted(decoded)]
    if crop_output:
        frames = [crop(f, h.width, h.height) for f in frames]
    return frames


def read_stream_file(path) -> Bitstream:
    with open(path, "rb") as fh:
        return parse_bitstream(fh)


def write_stream_file(path, bs: Bitstream) -> int:
    with open(path, "wb") as fh:
        return write_bitstream(bs, fh)

"""Keyframe (I/P) coding: intra and inter prediction plus transform-coded residual.

Payload syntax per CU in raster order: ue(mode) with 0=intra_dc, 1=intra_h,
2=intra_v, 3=inter; for inter se(mvd_x), se(mvd_y); then four 8x8 TUs in
raster order, each as a coefficient block.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core_model import (CTU_SIZE, TU_SIZE, EncodedFrameUnit, Frame, FrameType, MotionVector,
                         fetch_block, median_mv_predictor, round_half_away)
from .counters import counters
from .entropy import BitReader, BitWriter, read_coeffs, write_coeffs
from .errors import BitstreamError, EvcError
from .rate_control import BitLedger, RateControl, record_bits
from .transform import dct8x8, dequantize, idct8x8, inverse_zigzag, quantize, zigzag

DEFAULT_SEARCH_RANGE = 24


class CuMode(enum.IntEnum):
    INTRA_DC = 0
    INTRA_H = 1
    INTRA_V = 2
    INTER = 3


INTRA_MODES = (CuMode.INTRA_DC, CuMode.INTRA_H, CuMode.INTRA_V)


@dataclass
class FrameBuffer:
    """Most recent reconstructed keyframe (decoder-identical)."""

    frame: Frame | None = None

    @property
    def poc(self):
        return None if self.frame is None else self.frame.poc


# prediction ------------------------------------------------------------------

def intra_predict(recon: np.ndarray, bx: int, by: int, mode) -> np.ndarray:
    """16x16 intra prediction from already reconstructed neighbours in ``recon``.

    Missing neighbours are replaced by 128.
    """
    s = CTU_SIZE
    x0, y0 = bx * s, by * s
    top = recon[y0 - 1, x0:x0 + s].astype(np.int64) if by > 0 else None
    left = recon[y0:y0 + s, x0 - 1].astype(np.int64) if bx > 0 else None
    try:
        mode = CuMode(mode)
    except ValueError:
        raise EvcError("invalid intra mode") from None
    if mode == CuMode.INTRA_DC:
        parts = [a for a in (top, left) if a is not None]
        if not parts:
            return np.full((s, s), 128, np.int64)
        total = int(sum(a.sum() for a in parts))
        n = sum(len(a) for a in parts)
        return np.full((s, s), (2 * total + n) // (2 * n), np.int64)
    if mode == CuMode.INTRA_H:
        if left is None:
            return np.full((s, s), 128, np.int64)
        return np.repeat(left[:, None], s, axis=1)
    if mode == CuMode.INTRA_V:
        if top is None:
            return np.full((s, s), 128, np.int64)
        return np.repeat(top[None, :], s, axis=0)
    raise EvcError("invalid intra mode")


def _tie_break_order(r: int) -> np.ndarray:
    d = np.arange(-r, r + 1)
    dy, dx = np.meshgrid(d, d, indexing="ij")
    dx, dy = dx.ravel(), dy.ravel()
    return np.lexsort((dx, dy, np.abs(dx) + np.abs(dy)))


class BlockSearcher:
    """Exhaustive integer-pel SAD search in one reference raster.

    Ties resolve to smaller |dx|+|dy|, then smaller dy, then smaller dx.
    """

    def __init__(self, ref: np.ndarray, search_range: int, block: int = CTU_SIZE):
        if search_range < 0:
            raise EvcError("search range must be non-negative")
        self.r = search_range
        self.block = block
        self.padded = np.pad(np.asarray(ref, dtype=np.int32), search_range, mode="edge")
        self.order = _tie_break_order(search_range)
        self.n_candidates = (2 * search_range + 1) ** 2

    def search(self, cur_block: np.ndarray, x0: int, y0: int) -> tuple[MotionVector, int]:
        r, s = self.r, self.block
        region = self.padded[y0:y0 + s + 2 * r, x0:x0 + s + 2 * r]
        windows = sliding_window_view(region, (s, s))
        sad = np.abs(windows - np.asarray(cur_block, dtype=np.int32)).sum(axis=(2, 3)).ravel()
        counters.sad_evals += self.n_candidates
        best = self.order[np.argmin(sad[self.order])]
        dy, dx = divmod(int(best), 2 * r + 1)
        return MotionVector(dx - r, dy - r), int(sad[best])


def motion_search_p(cur: Frame, ref: "FrameBuffer | Frame", bx: int, by: int,
                    search_range: int = DEFAULT_SEARCH_RANGE) -> tuple[MotionVector, int]:
    ref_frame = ref.frame if isinstance(ref, FrameBuffer) else ref
    if ref_frame is None:
        raise EvcError("missing reference frame")
    s = CTU_SIZE
    searcher = BlockSearcher(ref_frame.samples, search_range)
    return searcher.search(cur.samples[by * s:(by + 1) * s, bx * s:(bx + 1) * s], bx * s, by * s)


def inter_predict(ref: np.ndarray, bx: int, by: int, mv) -> np.ndarray:
    counters.inter_pred_blocks += 1
    s = CTU_SIZE
    return fetch_block(ref, bx * s + int(mv[0]), by * s + int(mv[1]), s).astype(np.int64)


def reconstruct_tu(levels: np.ndarray, qp: int, pred: np.ndarray) -> np.ndarray:
    """Shared by encoder and decoder: dequantize, inverse transform, add prediction."""
    res = np.clip(round_half_away(idct8x8(dequantize(levels, qp))), -255, 255).astype(np.int64)
    return np.clip(pred + res, 0, 255)


def _tus():
    for ty in range(CTU_SIZE // TU_SIZE):
        for tx in range(CTU_SIZE // TU_SIZE):
            yield slice(ty * TU_SIZE, (ty + 1) * TU_SIZE), slice(tx * TU_SIZE, (tx + 1) * TU_SIZE)


# encoder -----------------------------------------------------------------------

@dataclass
class KeyframeResult:
    payload: bytes
    recon: Frame
    cu_bits: list
    padding_bits: int
    modes: np.ndarray
    mvs: np.ndarray


def encode_keyframe_payload(cur: Frame, ref: Frame | None, frame_type, qp: int,
                            search_range: int = DEFAULT_SEARCH_RANGE) -> KeyframeResult:
    frame_type = FrameType(frame_type)
    if frame_type == FrameType.B:
        raise EvcError("keyframes are coded as I or P")
    if frame_type == FrameType.P and ref is None:
        raise EvcError("missing reference frame")
    s = CTU_SIZE
    h, w = cur.samples.shape
    if h % s or w % s:
        raise EvcError("frame dimensions must be multiples of the CTU size")
    if ref is not None and ref.samples.shape != (h, w):
        raise EvcError("geometry mismatch")
    bxs, bys = w // s, h // s
    src = cur.samples.astype(np.int64)
    recon = np.zeros((h, w), np.int64)
    modes = np.zeros((bys, bxs), np.int64)
    mvs = np.zeros((bys, bxs, 2), np.int64)
    is_inter = np.zeros((bys, bxs), bool)
    searcher = BlockSearcher(ref.samples, search_range) if frame_type == FrameType.P else None
    ref_samples = ref.samples if ref is not None else None

    bw = BitWriter()
    cu_bits = []
    for by in range(bys):
        for bx in range(bxs):
            start = bw.bits_written
            block = src[by * s:(by + 1) * s, bx * s:(bx + 1) * s]
            best_mode, best_pred, best_sad = None, None, None
            for m in INTRA_MODES:
                pred = intra_predict(recon, bx, by, m)
                sad = int(np.abs(block - pred).sum())
                if best_sad is None or sad < best_sad:
                    best_mode, best_pred, best_sad = m, pred, sad
            if searcher is not None:
                mv, sad = searcher.search(block, bx * s, by * s)
                if sad <= best_sad:
                    best_mode, best_sad = CuMode.INTER, sad
                    best_pred = inter_predict(ref_samples, bx, by, mv)
                    mvs[by, bx] = mv
                    is_inter[by, bx] = True
            modes[by, bx] = best_mode
            bw.write_ue(int(best_mode))
            if best_mode == CuMode.INTER:
                px, py = median_mv_predictor(mvs, is_inter, bx, by)
                bw.write_se(int(mvs[by, bx, 0]) - px)
                bw.write_se(int(mvs[by, bx, 1]) - py)
            residual = block - best_pred
            out = recon[by * s:(by + 1) * s, bx * s:(bx + 1) * s]
            for rows, cols in _tus():
                levels = quantize(dct8x8(residual[rows, cols]), qp)
                write_coeffs(bw, zigzag(levels))
                out[rows, cols] = reconstruct_tu(levels, qp, best_pred[rows, cols])
            cu_bits.append(bw.bits_written - start)
    pad = bw.byte_align()
    return KeyframeResult(bw.getvalue(), Frame(recon, cur.poc, cur.timestamp), cu_bits, pad, modes, mvs)


def encode_keyframe(cur: Frame, buf: FrameBuffer, ledger: BitLedger, rc: RateControl, frame_type,
                    frame_index_in_gop: int = 0, frames_in_gop: int = 1,
                    search_range: int = DEFAULT_SEARCH_RANGE) -> tuple[EncodedFrameUnit, Frame]:
    """Code one keyframe, record its bits and update ``buf`` with the reconstruction."""
    frame_type = FrameType(frame_type)
    if frame_type == FrameType.P and buf.frame is None:
        raise EvcError("missing reference frame")
    qp = rc.next_keyframe_qp(ledger, frame_index_in_gop, frames_in_gop)
    ref = buf.frame if frame_type == FrameType.P else None
    res = encode_keyframe_payload(cur, ref, frame_type, qp, search_range)
    record_bits(ledger, frame_type, res.cu_bits, res.padding_bits, poc=cur.poc, qp=qp)
    buf.frame = res.recon
    return EncodedFrameUnit(frame_type, cur.poc, res.payload, qp=qp), res.recon


# decoder -----------------------------------------------------------------------

def decode_keyframe_payload(payload: bytes, frame_type, qp: int, width: int, height: int,
                            ref: Frame | None, poc: int = 0, timestamp: int = 0) -> Frame:
    frame_type = FrameType(frame_type)
    if frame_type == FrameType.B:
        raise BitstreamError("corrupt keyframe payload: B units carry no coefficient syntax")
    if frame_type == FrameType.P and ref is None:
        raise EvcError("missing reference frame")
    s = CTU_SIZE
    bxs, bys = width // s, height // s
    recon = np.zeros((height, width), np.int64)
    mvs = np.zeros((bys, bxs, 2), np.int64)
    is_inter = np.zeros((bys, bxs), bool)
    br = BitReader(payload)
    try:
        for by in range(bys):
            for bx in range(bxs):
                mode = br.read_ue()
                if mode == CuMode.INTER:
                    if frame_type != FrameType.P:
                        raise BitstreamError("corrupt keyframe payload: inter CU in I frame")
                    px, py = median_mv_predictor(mvs, is_inter, bx, by)
                    mvs[by, bx] = (px + br.read_se(), py + br.read_se())
                    is_inter[by, bx] = True
                    pred = inter_predict(ref.samples, bx, by, mvs[by, bx])
                elif mode in INTRA_MODES:
                    pred = intra_predict(recon, bx, by, mode)
                else:
                    raise BitstreamError("corrupt keyframe payload: unknown CU mode")
                out = recon[by * s:(by + 1) * s, bx * s:(bx + 1) * s]
                for rows, cols in _tus():
                    levels = inverse_zigzag(np.array(read_coeffs(br), dtype=np.int64))
                    out[rows, cols] = reconstruct_tu(levels, qp, pred[rows, cols])
        br.byte_align()
    except BitstreamError as exc:
        if str(exc).startswith("corrupt keyframe payload"):
            raise
        raise BitstreamError(f"corrupt keyframe payload: {exc}") from exc
    if br.bits_left:
        raise BitstreamError("corrupt keyframe payload: trailing data")
    return Frame(recon, poc, timestamp)

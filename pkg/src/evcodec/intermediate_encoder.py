"""Motion-only B-frame payloads.

Per CU in raster order: ue(mode) with 0=bi, 1=fwd, 2=bwd, then
se(mvd_x), se(mvd_y) for the forward vector unless mode is bwd, then the
same for the backward vector unless mode is fwd. Each direction has its own
median predictor chain. The payload is byte-aligned and carries no
residual; no pixel is read while producing it.
"""
from __future__ import annotations

import numpy as np

from .core_model import EncodedFrameUnit, FrameType, MotionField, median_mv_predictor
from .entropy import BitReader, BitWriter, se_bits, ue_bits
from .errors import BitstreamError, EvcError
from .motion_estimation import BMode
from .rate_control import BitLedger, record_bits


def _check(to_prev: MotionField, to_next: MotionField, modes) -> np.ndarray:
    modes = np.asarray(modes, dtype=np.int64)
    shape = (to_prev.blocks_y, to_prev.blocks_x)
    if (to_next.blocks_y, to_next.blocks_x) != shape or modes.shape != shape:
        raise EvcError("motion field does not cover frame")
    if modes.size and (modes.min() < 0 or modes.max() > BMode.BWD):
        raise EvcError("invalid B prediction mode")
    return modes


def _syntax(to_prev: MotionField, to_next: MotionField, modes: np.ndarray):
    """Yield per CU the list of ('ue'|'se', value) elements, in write order."""
    bys, bxs = modes.shape
    fwd_avail = np.zeros((bys, bxs), bool)
    bwd_avail = np.zeros((bys, bxs), bool)
    for by in range(bys):
        for bx in range(bxs):
            mode = int(modes[by, bx])
            elems = [("ue", mode)]
            if mode != BMode.BWD:
                px, py = median_mv_predictor(to_prev.vectors, fwd_avail, bx, by)
                elems += [("se", int(to_prev.vectors[by, bx, 0]) - px), ("se", int(to_prev.vectors[by, bx, 1]) - py)]
                fwd_avail[by, bx] = True
            if mode != BMode.FWD:
                px, py = median_mv_predictor(to_next.vectors, bwd_avail, bx, by)
                elems += [("se", int(to_next.vectors[by, bx, 0]) - px), ("se", int(to_next.vectors[by, bx, 1]) - py)]
                bwd_avail[by, bx] = True
            yield elems


def _cu_cost(elems) -> int:
    return sum(ue_bits(v) if kind == "ue" else se_bits(v) for kind, v in elems)


def estimate_bframe_bits(to_prev: MotionField, to_next: MotionField, modes) -> int:
    """Bits ``generate_bframe_unit`` writes before byte alignment."""
    modes = _check(to_prev, to_next, modes)
    return sum(_cu_cost(e) for e in _syntax(to_prev, to_next, modes))


def write_bframe_payload(to_prev: MotionField, to_next: MotionField, modes) -> tuple[bytes, list, int]:
    modes = _check(to_prev, to_next, modes)
    bw = BitWriter()
    cu_bits = []
    for elems in _syntax(to_prev, to_next, modes):
        start = bw.bits_written
        for kind, v in elems:
            (bw.write_ue if kind == "ue" else bw.write_se)(v)
        cu_bits.append(bw.bits_written - start)
    pad = bw.byte_align()
    return bw.getvalue(), cu_bits, pad


def generate_bframe_unit(to_prev: MotionField, to_next: MotionField, modes, poc: int,
                         refs: tuple[int, int], ledger: BitLedger | None = None) -> EncodedFrameUnit:
    fwd_ref, bwd_ref = refs
    payload, cu_bits, pad = write_bframe_payload(to_prev, to_next, modes)
    unit = EncodedFrameUnit(FrameType.B, poc, payload, fwd_ref_poc=fwd_ref, bwd_ref_poc=bwd_ref)
    if ledger is not None:
        record_bits(ledger, FrameType.B, cu_bits, pad, poc=poc)
    return unit


def parse_bframe_payload(payload: bytes, blocks_x: int, blocks_y: int):
    """Inverse of ``write_bframe_payload``: returns (modes, fwd vectors, bwd vectors).

    Vectors for an absent direction are left at zero.
    """
    br = BitReader(payload)
    modes = np.zeros((blocks_y, blocks_x), np.int64)
    fwd = np.zeros((blocks_y, blocks_x, 2), np.int64)
    bwd = np.zeros((blocks_y, blocks_x, 2), np.int64)
    fwd_avail = np.zeros((blocks_y, blocks_x), bool)
    bwd_avail = np.zeros((blocks_y, blocks_x), bool)
    try:
        for by in range(blocks_y):
            for bx in range(blocks_x):
                mode = br.read_ue()
                if mode > BMode.BWD:
                    raise BitstreamError("corrupt B payload: unknown mode")
                modes[by, bx] = mode
                if mode != BMode.BWD:
                    px, py = median_mv_predictor(fwd, fwd_avail, bx, by)
                    fwd[by, bx] = (px + br.read_se(), py + br.read_se())
                    fwd_avail[by, bx] = True
                if mode != BMode.FWD:
                    px, py = median_mv_predictor(bwd, bwd_avail, bx, by)
                    bwd[by, bx] = (px + br.read_se(), py + br.read_se())
                    bwd_avail[by, bx] = True
        br.byte_align()
    except BitstreamError as exc:
        if str(exc).startswith("corrupt B payload"):
            raise
        raise BitstreamError(f"corrupt B payload: {exc}") from exc
    if br.bits_left:
        raise BitstreamError("corrupt B payload: trailing data")
    return modes, fwd, bwd

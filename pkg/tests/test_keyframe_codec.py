import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evcodec.core_model import Frame, FrameType
from evcodec.counters import counters
from evcodec.errors import BitstreamError, EvcError
from evcodec.keyframe_codec import (CuMode, FrameBuffer, decode_keyframe_payload, encode_keyframe,
                                    encode_keyframe_payload, intra_predict, motion_search_p)
from evcodec.rate_control import BitLedger, RateControl, RateControlConfig

from conftest import random_frame


def sad_search_oracle(cur, ref, bx, by, r):
    """Plain loops over the window with the documented tie-break."""
    h, w = ref.shape
    block = cur[by * 16:(by + 1) * 16, bx * 16:(bx + 1) * 16].astype(int)
    best = None
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            ys = np.clip(np.arange(by * 16 + dy, by * 16 + dy + 16), 0, h - 1)
            xs = np.clip(np.arange(bx * 16 + dx, bx * 16 + dx + 16), 0, w - 1)
            sad = int(np.abs(block - ref[np.ix_(ys, xs)].astype(int)).sum())
            key = (sad, abs(dx) + abs(dy), dy, dx)
            if best is None or key < best[0]:
                best = (key, (dx, dy), sad)
    return best[1], best[2]


def encode(cur, frame_type=FrameType.I, qp=28, ref=None):
    buf = FrameBuffer(ref)
    rc = RateControl(RateControlConfig(base_qp=qp, qp_min=min(4, qp), qp_max=max(48, qp)))
    return encode_keyframe(cur, buf, BitLedger(), rc, frame_type)


def decode(unit, ref=None, shape=(64, 64)):
    return decode_keyframe_payload(unit.payload, unit.frame_type, unit.qp, shape[1], shape[0], ref, unit.poc, 0)


def test_intra_dc_fallback_and_mean():
    recon = np.zeros((32, 32), np.int64)
    assert np.all(intra_predict(recon, 0, 0, CuMode.INTRA_DC) == 128)
    recon[15, 16:32] = 50
    recon[16:32, 15] = 70
    assert np.all(intra_predict(recon, 1, 1, CuMode.INTRA_DC) == 60)


def test_intra_v_and_h():
    recon = np.zeros((32, 32), np.int64)
    recon[15, 0:16] = np.arange(1, 17)
    v = intra_predict(recon, 0, 1, CuMode.INTRA_V)
    assert all(np.array_equal(row, np.arange(1, 17)) for row in v)
    recon[0:16, 15] = np.arange(16) * 3
    h = intra_predict(recon, 1, 0, CuMode.INTRA_H)
    assert all(np.array_equal(col, np.arange(16) * 3) for col in h.T)
    with pytest.raises(EvcError, match="invalid intra mode"):
        intra_predict(recon, 0, 0, 7)


def test_motion_search_identity_and_constant(rng):
    f = random_frame(rng)
    assert motion_search_p(f, f, 1, 1) == ((0, 0), 0)
    c = Frame(np.full((64, 64), 77, np.uint8))
    assert motion_search_p(c, c, 2, 2)[0] == (0, 0)


def test_motion_search_global_shift(rng):
    ref = random_frame(rng)
    cur = Frame(np.roll(ref.samples, 3, axis=1))  # cur(x) = ref(x - 3)
    mv, sad = motion_search_p(cur, FrameBuffer(ref), 1, 1)
    assert mv == (-3, 0) and sad == 0


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 3), st.integers(0, 3))
def test_motion_search_matches_loop_oracle(seed, bx, by):
    rng = np.random.default_rng(seed)
    ref = rng.integers(0, 4, (64, 64), dtype=np.uint8)  # small alphabet: many ties
    cur = rng.integers(0, 4, (64, 64), dtype=np.uint8)
    got = motion_search_p(Frame(cur), Frame(ref), bx, by, search_range=4)
    assert got == sad_search_oracle(cur, ref, bx, by, 4)


def test_constant_i_frame_is_exact():
    src = Frame(np.full((64, 64), 128, np.uint8))
    unit, recon = encode(src, qp=4)
    assert recon.pixels_equal(src)
    assert decode(unit).pixels_equal(src)


def test_p_frame_of_identical_reference(rng):
    ref = random_frame(rng)
    unit, recon = encode(ref, FrameType.P, qp=28, ref=ref)
    assert recon.pixels_equal(ref)
    res = encode_keyframe_payload(ref, ref, FrameType.P, 28, 24)
    assert np.all(res.modes == CuMode.INTER)
    assert np.all(res.mvs == 0)


def test_p_frame_without_reference(rng):
    with pytest.raises(EvcError, match="missing reference frame"):
        encode(random_frame(rng), FrameType.P)


@pytest.mark.parametrize("qp", [0, 4, 16, 28, 40, 51])
def test_zero_drift_i_and_p(rng, qp):
    i_src = random_frame(rng)
    i_unit, i_rec = encode(i_src, qp=qp)
    i_dec = decode(i_unit)
    assert i_dec.pixels_equal(i_rec)
    p_src = Frame(np.clip(np.roll(i_src.samples.astype(int), 2, axis=0) + 3, 0, 255).astype(np.uint8), 1)
    p_unit, p_rec = encode(p_src, FrameType.P, qp=qp, ref=i_rec)
    assert decode(p_unit, ref=i_dec).pixels_equal(p_rec)


def test_quality_improves_with_lower_qp(rng):
    src = random_frame(rng)
    errs = []
    for qp in (4, 28, 46):
        _, rec = encode(src, qp=qp)
        errs.append(np.abs(rec.samples.astype(int) - src.samples).mean())
    assert errs[0] < errs[1] < errs[2]


def test_ledger_matches_payload(rng):
    ledger = BitLedger()
    rc = RateControl(RateControlConfig())
    unit, _ = encode_keyframe(random_frame(rng), FrameBuffer(), ledger, rc, FrameType.I)
    assert ledger.bc_acc_key == unit.payload_bits == 8 * len(unit.payload)


def test_corrupt_payload_rejected(rng):
    unit, _ = encode(random_frame(rng))
    with pytest.raises(BitstreamError, match="corrupt keyframe payload"):
        decode_keyframe_payload(unit.payload[: len(unit.payload) // 2], FrameType.I, unit.qp, 64, 64, None, 0, 0)
    with pytest.raises(BitstreamError, match="corrupt keyframe payload"):
        decode_keyframe_payload(unit.payload + b"\xff", FrameType.I, unit.qp, 64, 64, None, 0, 0)


def test_keyframe_counters_move(rng):
    encode(random_frame(rng))
    assert counters.dct_calls == 64 and counters.quant_calls == 64

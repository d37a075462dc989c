"""Acceptance criteria 1-10, each at its stated tolerance.

Every test reports one PASS/FAIL line; the lines are repeated in the
"acceptance criteria" section of the pytest terminal summary.
"""
import math
import time

import numpy as np
import pytest

from evcodec.core_model import Frame, FrameType, MotionField, build_gop_schedule
from evcodec.counters import counters
from evcodec.entropy import BitReader, BitWriter, read_coeffs, write_coeffs
from evcodec.event_sim import SimConfig, decimate_keyframes, simulate_events
from evcodec.intermediate_encoder import parse_bframe_payload, write_bframe_payload
from evcodec.metrics import interior_psnr, psnr
from evcodec.pipeline import EncoderConfig, encode_sequence, run_compare
from evcodec.stream_io import container_overhead_bytes, decode_stream, decoding_order, parse_bitstream
from evcodec.synthetic import stop_and_go_sequence, translating_sequence
from evcodec.transform import dct8x8, idct8x8

from conftest import natural_clip

PERIOD = 8333


def _clips():
    noise = np.random.default_rng(7)
    noisy = [Frame(noise.integers(0, 256, (64, 80), dtype=np.uint8), i, i * PERIOD) for i in range(9)]
    return {
        "translate-128": translating_sequence(9, size=(128, 128), velocity=(2, 0), seed=0),
        "diagonal-72x88": translating_sequence(9, size=(72, 88), velocity=(1, -1), seed=11, smooth=2),
        "stop-and-go-96": stop_and_go_sequence(2, size=(96, 96), seed=2),
        "noise-64x80": noisy,
        "camera-pan-96": natural_clip(9, size=(96, 96), step=(1, 1)),
    }


def test_c1_zero_drift(acceptance):
    t0 = time.perf_counter()
    checked = mismatches = 0
    for name, frames in _clips().items():
        keys = decimate_keyframes(frames, 4)
        events = simulate_events(frames)
        for qp in (4, 16, 28, 40):
            res = encode_sequence(keys, events, EncoderConfig(qp=qp))
            decoded = decode_stream(parse_bitstream(res.data), crop_output=False)
            for f in decoded:
                if f.poc in res.recon:
                    checked += 1
                    mismatches += not np.array_equal(f.samples, res.recon[f.poc].samples)
    elapsed = time.perf_counter() - t0
    acceptance(1, mismatches == 0 and checked == 5 * 4 * 3 and elapsed < 60,
               f"{checked} keyframes over 5 clips x 4 qp, {mismatches} mismatches, {elapsed:.1f} s")


def test_c2_decode_order(acceptance):
    s = build_gop_schedule(3, 3, 33333)
    order = decoding_order(s)
    types = {sl.poc: sl.frame_type.name for sl in s.frame_slots}
    exact = order == [0, 4, 1, 2, 3, 8, 5, 6, 7] and "".join(types[p] for p in order) == "IPBBBPBBB"

    rng = np.random.default_rng(2024)
    good = 0
    for _ in range(100):
        n, interp, gop = int(rng.integers(2, 14)), int(rng.integers(0, 8)), int(rng.integers(1, 6))
        s = build_gop_schedule(n, interp, int(rng.integers(interp + 1, 100000)), gop_length=gop)
        order = decoding_order(s)
        kinds = {sl.poc: sl.frame_type for sl in s.frame_slots}
        keys = [p for p in sorted(kinds) if kinds[p] != FrameType.B]
        pos = {p: i for i, p in enumerate(order)}
        ok = sorted(order) == list(range(s.frame_count)) and len(order) == s.frame_count
        ok &= [p for p in order if kinds[p] != FrameType.B] == keys
        for p, k in kinds.items():
            if k == FrameType.B:
                fwd = max(q for q in keys if q < p)
                bwd = min(q for q in keys if q > p)
                ok &= pos[fwd] < pos[p] and pos[bwd] < pos[p]
        good += ok
    acceptance(2, exact and good == 100, f"IBBBPBBBP -> IPBBBPBBB: {exact}; random schedules valid: {good}/100")


def test_c3_motion_only_b_frames(acceptance, translation_128):
    keys = decimate_keyframes(translation_128, 4)
    events = simulate_events(translation_128)
    key_only = encode_sequence(keys, None, EncoderConfig(interp_factor=0, qp=28))
    counters.reset()
    res = encode_sequence(keys, events, EncoderConfig(qp=28))
    n_tus = len(keys) * (128 // 8) ** 2
    b_units = [u for u in res.bitstream.units if u.frame_type == FrameType.B]
    syntax_only = True
    for u in b_units:
        modes, fwd, bwd = parse_bframe_payload(u.payload, 8, 8)
        rebuilt, _, _ = write_bframe_payload(MotionField(8, 8, fwd), MotionField(8, 8, bwd), modes)
        syntax_only &= rebuilt == u.payload  # payload is exactly mode + MVD syntax
    b_dct = res.ops["dct_calls"] - key_only.ops["dct_calls"]
    b_quant = res.ops["quant_calls"] - key_only.ops["quant_calls"]
    ok = (syntax_only and len(b_units) == 6 and b_dct == 0 and b_quant == 0
          and res.ops["dct_calls"] == n_tus and res.ops["mc_block_warps"] == 0)
    acceptance(3, ok, f"{len(b_units)} B units, residual-free payloads: {syntax_only}, "
                      f"B dct/quant calls: {b_dct}/{b_quant}, encoder mc warps: {res.ops['mc_block_warps']}")


def test_c4_global_translation(acceptance):
    t0 = time.perf_counter()
    frames = translating_sequence(17, size=(128, 128), velocity=(2, 0), seed=0)
    keys = decimate_keyframes(frames, 4)
    res = encode_sequence(keys, simulate_events(frames), EncoderConfig(qp=4))
    decoded = {f.poc: f for f in decode_stream(parse_bitstream(res.data))}
    b_psnr = [interior_psnr(decoded[p], frames[p], 16) for p in decoded if p % 4]
    exact = total = 0
    for flow in res.flows:
        interior = flow.field.vectors[1:-1, 1:-1].reshape(-1, 2)
        exact += int(np.all(interior == (8, 0), axis=1).sum())
        total += len(interior)
    elapsed = time.perf_counter() - t0
    ok = min(b_psnr) >= 40 and exact / total >= 0.95 and len(b_psnr) == 12
    acceptance(4, ok, f"min interior B PSNR {min(b_psnr):.2f} dB over {len(b_psnr)} B frames, "
                      f"ME exact on {exact}/{total} interior blocks, {elapsed:.1f} s")


def test_c5_event_guided_nonuniform_motion(acceptance):
    frames = stop_and_go_sequence(2, size=(128, 128), shift=4, seed=0)
    keys = decimate_keyframes(frames, 4)
    events = simulate_events(frames)

    def mean_b_psnr(mode):
        res = encode_sequence(keys, events, EncoderConfig(qp=4, alpha_mode=mode))
        out = decode_stream(res.bitstream)
        return float(np.mean([psnr(f, frames[f.poc]) for f in out if f.poc % 4]))

    ev, lin = mean_b_psnr("events"), mean_b_psnr("linear")
    acceptance(5, ev >= lin + 5, f"event-alpha B PSNR {ev:.2f} dB vs linear-alpha {lin:.2f} dB "
                                 f"(gain {ev - lin:.2f} dB, need >= 5)")


@pytest.mark.parametrize("qp", [28, 34])
def test_c6_coupled_rate_control(acceptance, qp):
    frames = translating_sequence(49, size=(64, 64), velocity=(1, 1), seed=0)
    keys = decimate_keyframes(frames, 4)
    events = simulate_events(frames)
    base = encode_sequence(keys, events, EncoderConfig(qp=qp))
    target = 1.5 * base.total_bits
    frame_period_us = PERIOD  # interp 3 between keyframes 4 frames apart
    duration_s = base.bitstream.header.frame_count * frame_period_us / 1e6
    res = encode_sequence(keys, events, EncoderConfig(qp=qp, rc_mode="coupled", bitrate_bps=target / duration_s))
    ratio = res.total_bits / target
    gops = res.ledger.summary()
    gop_sum = sum(g["key_bits"] + g["inter_bits"] for g in gops)
    file_payload_bits = 8 * (len(res.data) - container_overhead_bytes(res.bitstream))
    reconciled = gop_sum == file_payload_bits == res.bitstream.payload_bits
    ok = len(gops) >= 3 and abs(ratio - 1) <= 0.15 and reconciled
    acceptance(f"6 (qp {qp})", ok, f"{res.total_bits} bits vs target {target:.0f} (ratio {ratio:.3f}) over "
                                   f"{len(gops)} GOPs; ledger {gop_sum} == file payload {file_payload_bits}: "
                                   f"{reconciled}")


@pytest.mark.parametrize("qp", [4, 28])
def test_c7_compression_vs_naive(acceptance, translation_128, qp):
    cmp = run_compare(translation_128, SimConfig(), EncoderConfig(qp=qp))
    c, n = cmp.report["coupled"], cmp.report["naive"]
    ok = c["total_bits"] < n["total_bits"] and c["op_total"] < n["op_total"]
    acceptance(f"7 (qp {qp})", ok,
               f"bits coupled {c['total_bits']} < naive {n['total_bits']}; sad+dct+quant coupled "
               f"{c['op_total']} < naive {n['op_total']}; B PSNR {c['intermediate_psnr_db']:.2f} vs "
               f"{n['intermediate_psnr_db']:.2f} dB")


def test_c8_entropy_exhaustive(acceptance):
    ue_vals = range(0, 65536)
    se_vals = range(-32768, 32768)
    w = BitWriter()
    for v in ue_vals:
        w.write_ue(v)
    for v in se_vals:
        w.write_se(v)
    r = BitReader(w.getvalue())
    ue_ok = all(r.read_ue() == v for v in ue_vals)
    se_ok = all(r.read_se() == v for v in se_vals)

    rng = np.random.default_rng(8)
    blocks = []
    for _ in range(10_000):
        b = np.zeros(64, np.int64)
        k = int(rng.integers(0, 65))
        pos = rng.choice(64, k, replace=False)
        b[pos] = rng.integers(-32768, 32768, k)
        blocks.append(b.tolist())
    w = BitWriter()
    for b in blocks:
        write_coeffs(w, b)
    r = BitReader(w.getvalue())
    coeff_ok = all(read_coeffs(r) == b for b in blocks)
    acceptance(8, ue_ok and se_ok and coeff_ok,
               f"ue [0,65535]: {ue_ok}; se [-32768,32767]: {se_ok}; 10^4 coefficient blocks: {coeff_ok}")


def test_c9_event_simulator_analytic(acceptance):
    i1, period = 200, 30000
    threshold = math.log(i1 + 1) / 3  # L rises from ln(1) = 0 by exactly 3 thresholds
    a = np.zeros((8, 8), np.uint8)
    b = a.copy()
    b[5, 3] = i1
    ev = simulate_events([Frame(a, 0, 0), Frame(b, 1, period)], SimConfig(contrast_threshold=threshold))
    expect = np.array([k * period / 3 for k in (1, 2, 3)])
    ramp_ok = (len(ev) == 3 and np.all(ev.x == 3) and np.all(ev.y == 5) and np.all(ev.polarity == 1)
               and np.all(np.abs(ev.t - expect) <= 1))
    still = np.random.default_rng(9).integers(0, 256, (32, 32), dtype=np.uint8)
    n_static = len(simulate_events([Frame(still, i, i * PERIOD) for i in range(9)]))
    acceptance(9, ramp_ok and n_static == 0,
               f"ramp events at {ev.t.tolist()} us vs {expect.round(1).tolist()}; static video events: {n_static}")


def test_c10_transform_numerics(acceptance):
    rng = np.random.default_rng(10)
    worst_rt = worst_parseval = 0.0
    for _ in range(10_000):
        x = rng.integers(-255, 256, (8, 8))
        c = dct8x8(x)
        worst_rt = max(worst_rt, float(np.abs(idct8x8(c) - x).max()))
        energy = float((x.astype(np.float64) ** 2).sum())
        if energy:
            worst_parseval = max(worst_parseval, abs(float((c ** 2).sum()) - energy) / energy)
    acceptance(10, worst_rt < 0.5 and worst_parseval <= 1e-6,
               f"max |idct(dct(x)) - x| = {worst_rt:.2e}; max Parseval rel. error = {worst_parseval:.2e}")

"""End-to-end encode, the explicit-interpolation baseline, and their comparison."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core_model import (EventStream, Frame, FrameSlot, FrameType, GopStructure, bracketing_keyframes,
                         build_gop_schedule, pad_to_ctu)
from .counters import counters
from .errors import EvcError
from .event_sim import SimConfig, decimate_keyframes, simulate_events
from .intermediate_encoder import generate_bframe_unit
from .keyframe_codec import DEFAULT_SEARCH_RANGE, FrameBuffer, encode_keyframe
from .metrics import mean_psnr, psnr
from .motion_estimation import (DEFAULT_N_MIN, DEFAULT_T_OCC, block_match_keyframes, distribute_motion,
                                event_fraction, linear_activation, select_prediction_mode)
from .rate_control import BitLedger, RateControl, RateControlConfig
from .stream_io import (Bitstream, StreamHeader, bitstream_bytes, container_overhead_bytes, decode_stream,
                        motion_compensate, synthesize_stream)


@dataclass
class EncoderConfig:
    interp_factor: int = 3
    gop_length: int = 4
    qp: int = 28
    rc_mode: str = "constant_qp"
    bitrate_bps: float | None = None
    target_bits_per_gop: float | None = None
    k_p: float = 6.0
    qp_min: int = 4
    qp_max: int = 48
    search_range: int = DEFAULT_SEARCH_RANGE
    n_min: int = DEFAULT_N_MIN
    t_occ: int = DEFAULT_T_OCC
    alpha_mode: str = "events"
    alpha_pool: int = 1

    def __post_init__(self):
        if self.alpha_mode not in ("events", "linear"):
            raise EvcError(f"unknown alpha mode {self.alpha_mode!r}")
        if self.interp_factor < 0 or self.interp_factor > 255 or not 1 <= self.gop_length <= 255:
            raise EvcError("interp/gop out of range")


@dataclass
class BFrameInfo:
    poc: int
    to_prev: object
    to_next: object
    modes: np.ndarray
    alpha: np.ndarray


@dataclass
class EncodeResult:
    bitstream: Bitstream
    data: bytes
    ledger: BitLedger
    schedule: GopStructure
    recon: dict
    bframes: dict
    ops: dict
    config: dict
    flows: list = field(default_factory=list)

    @property
    def total_bits(self) -> int:
        return 8 * len(self.data)


def _check_keyframes(keyframes: Sequence[Frame]) -> tuple[int, int]:
    if len(keyframes) < 2:
        raise EvcError("need at least two keyframes")
    shape = keyframes[0].samples.shape
    if any(k.samples.shape != shape for k in keyframes):
        raise EvcError("geometry mismatch")
    gaps = {b.timestamp - a.timestamp for a, b in zip(keyframes, keyframes[1:])}
    if len(gaps) != 1 or min(gaps) <= 0:
        raise EvcError("keyframe timestamps must be uniformly spaced and increasing")
    return gaps.pop(), keyframes[0].timestamp


def _timebase(period_us: int, interp: int) -> tuple[int, int]:
    f = Fraction(period_us, 1_000_000 * (interp + 1))
    return f.numerator, f.denominator


def _rc_config(cfg: EncoderConfig, gop_frames: int, frame_period_us: float) -> RateControlConfig:
    target = cfg.target_bits_per_gop
    if target is None and cfg.bitrate_bps:
        target = cfg.bitrate_bps * gop_frames * frame_period_us / 1e6
    return RateControlConfig(target_bits_per_gop=target or 0.0, base_qp=cfg.qp, k_p=cfg.k_p,
                             qp_min=min(cfg.qp_min, cfg.qp), qp_max=max(cfg.qp_max, cfg.qp), mode=cfg.rc_mode)


def encode_sequence(keyframes: Sequence[Frame], events: EventStream | None,
                    cfg: EncoderConfig = EncoderConfig()) -> EncodeResult:
    """Keyframes plus events to a coupled stream; intermediate frames are never built.

    Encoding order per keyframe interval: motion estimation, B units (their
    bits enter the GOP ledger), then the closing keyframe.
    """
    period, start = _check_keyframes(keyframes)
    height, width = keyframes[0].samples.shape
    if events is not None and (events.width, events.height) != (width, height):
        raise EvcError("geometry mismatch")
    if cfg.alpha_mode == "events" and events is None and cfg.interp_factor > 0:
        raise EvcError("event-guided motion needs an event stream")
    schedule = build_gop_schedule(len(keyframes), cfg.interp_factor, period, cfg.gop_length, start)
    step = cfg.interp_factor + 1
    rc = RateControl(_rc_config(cfg, schedule.gop_frames, period / step))
    src = [pad_to_ctu(k.with_meta(poc=i * step)) for i, k in enumerate(keyframes)]
    bxs, bys = src[0].width // 16, src[0].height // 16
    types = {s.poc: s for s in schedule.frame_slots}

    before = counters.snapshot()
    ledger = BitLedger()
    buf = FrameBuffer()
    key_units, b_units, recon, binfo, flows = [], [], {}, {}, []
    for k, cur in enumerate(src):
        if k > 0:
            prev = src[k - 1]
            flow = block_match_keyframes(prev, cur, cfg.search_range)
            flows.append(flow)
            b_slots = [types[p] for p in range(prev.poc + 1, cur.poc)]
            taus = [s.timestamp for s in b_slots]
            t0, t1 = keyframes[k - 1].timestamp, keyframes[k].timestamp
            if not taus:
                act = None
            elif cfg.alpha_mode == "events":
                act = event_fraction(events, t0, t1, taus, bxs, bys, cfg.n_min, pool_radius=cfg.alpha_pool)
            else:
                act = linear_activation(t0, t1, taus, bxs, bys)
            for i, slot in enumerate(b_slots):
                alpha = act.alphas[i]
                to_prev, to_next = distribute_motion(flow, alpha, slot.poc, prev.poc, cur.poc)
                modes = select_prediction_mode(prev, cur, to_prev, to_next, alpha, cfg.t_occ)
                b_units.append(generate_bframe_unit(to_prev, to_next, modes, slot.poc,
                                                    (prev.poc, cur.poc), ledger))
                binfo[slot.poc] = BFrameInfo(slot.poc, to_prev, to_next, modes, alpha)
        slot = types[cur.poc]
        unit, rec = encode_keyframe(cur, buf, ledger, rc, slot.frame_type,
                                    frame_index_in_gop=cur.poc - schedule.gop_start(cur.poc),
                                    frames_in_gop=schedule.gop_frames, search_range=cfg.search_range)
        key_units.append(unit)
        recon[cur.poc] = rec
    ops = counters.since(before)
    if ops["mc_block_warps"]:
        raise RuntimeError("intermediate frame materialized during encoding")

    header = StreamHeader(width, height, cfg.interp_factor, cfg.gop_length, schedule.frame_count,
                          cfg.qp, _timebase(period, cfg.interp_factor))
    bs = synthesize_stream(key_units, b_units, schedule, header)
    return EncodeResult(bs, bitstream_bytes(bs), ledger, schedule, recon, binfo, ops, asdict(cfg), flows)


def interpolate_frames(keyframes: Sequence[Frame], cfg: EncoderConfig,
                       events: EventStream | None) -> list[Frame]:
    """Explicitly warp every intermediate frame with the same motion model (baseline only)."""
    period, start = _check_keyframes(keyframes)
    step = cfg.interp_factor + 1
    schedule = build_gop_schedule(len(keyframes), cfg.interp_factor, period, cfg.gop_length, start)
    src = [pad_to_ctu(k.with_meta(poc=i * step)) for i, k in enumerate(keyframes)]
    h, w = keyframes[0].samples.shape
    bxs, bys = src[0].width // 16, src[0].height // 16
    out = []
    for k in range(len(src)):
        out.append(src[k])
        if k == len(src) - 1 or step == 1:
            continue
        a, b = src[k], src[k + 1]
        flow = block_match_keyframes(a, b, cfg.search_range)
        slots = [schedule.frame_slots[p] for p in range(a.poc + 1, b.poc)]
        taus = [s.timestamp for s in slots]
        t0, t1 = keyframes[k].timestamp, keyframes[k + 1].timestamp
        if cfg.alpha_mode == "events":
            act = event_fraction(events, t0, t1, taus, bxs, bys, cfg.n_min, pool_radius=cfg.alpha_pool)
        else:
            act = linear_activation(t0, t1, taus, bxs, bys)
        for i, slot in enumerate(slots):
            to_prev, to_next = distribute_motion(flow, act.alphas[i])
            modes = select_prediction_mode(a, b, to_prev, to_next, act.alphas[i], cfg.t_occ)
            pix = motion_compensate(a.samples, b.samples, modes, to_prev.vectors, to_next.vectors)
            out.append(Frame(pix, slot.poc, slot.timestamp))
    out.sort(key=lambda f: f.poc)
    return [Frame(f.samples[:h, :w], f.poc, f.timestamp) for f in out]


def encode_naive(keyframes: Sequence[Frame], events: EventStream | None,
                 cfg: EncoderConfig = EncoderConfig()) -> EncodeResult:
    """Baseline: interpolate pixels first, then code every frame as I/P with residuals."""
    period, start = _check_keyframes(keyframes)
    height, width = keyframes[0].samples.shape
    coupled_schedule = build_gop_schedule(len(keyframes), cfg.interp_factor, period, cfg.gop_length, start)
    gop_frames = coupled_schedule.gop_frames
    if gop_frames > 255:
        raise EvcError("GOP too long for the baseline stream header")
    before = counters.snapshot()
    frames = interpolate_frames(keyframes, cfg, events)
    slots = tuple(FrameSlot(s.poc, FrameType.P if s.frame_type == FrameType.B else s.frame_type, s.timestamp)
                  for s in coupled_schedule.frame_slots)
    schedule = GopStructure(gop_frames, 0, slots)
    rc = RateControl(_rc_config(replace(cfg, rc_mode="constant_qp"), gop_frames, period / (cfg.interp_factor + 1)))
    ledger = BitLedger()
    buf = FrameBuffer()
    units, recon = [], {}
    for f, slot in zip(frames, slots):
        cur = pad_to_ctu(f)
        unit, rec = encode_keyframe(cur, buf, ledger, rc, slot.frame_type,
                                    frame_index_in_gop=slot.poc % gop_frames, frames_in_gop=gop_frames,
                                    search_range=cfg.search_range)
        units.append(unit)
        recon[slot.poc] = rec
    ops = counters.since(before)
    header = StreamHeader(width, height, 0, gop_frames, len(slots), cfg.qp,
                          _timebase(period, cfg.interp_factor))
    bs = synthesize_stream(units, [], schedule, header)
    return EncodeResult(bs, bitstream_bytes(bs), ledger, schedule, recon, {}, ops, asdict(cfg))


# reports -----------------------------------------------------------------------

def metrics_report(result: EncodeResult, references: dict | None = None,
                   decoded: Sequence[Frame] | None = None) -> dict:
    """Per-frame bits/PSNR, per-GOP ledger, operation counts and reconciled totals.

    PSNR compares ``decoded`` (or keyframe reconstructions) to ``references``
    keyed by POC; frames without a reference get ``None``.
    """
    bs = result.bitstream
    unit_bits = {u.poc: u.payload_bits for u in bs.units}
    types = {u.poc: u.frame_type.name for u in bs.units}
    if decoded is None:
        out_frames = {p: f for p, f in result.recon.items()}
    else:
        out_frames = {f.poc: f for f in decoded}
    per_frame = []
    for poc in sorted(unit_bits):
        ref = references.get(poc) if references else None
        value = None
        if ref is not None and poc in out_frames:
            cand = out_frames[poc].samples[:ref.height, :ref.width]
            value = psnr(cand, ref)
        per_frame.append({"poc": poc, "type": types[poc], "bits": unit_bits[poc], "psnr_db": value})
    payload_bits = sum(unit_bits.values())
    container_bits = 8 * container_overhead_bytes(bs)
    report = {
        "frames": per_frame,
        "gops": result.ledger.summary(),
        "ops": result.ops,
        "totals": {
            "frame_count": bs.header.frame_count,
            "payload_bits": payload_bits,
            "ledger_bits": result.ledger.total_bits,
            "container_bits": container_bits,
            "file_bits": result.total_bits,
            "mean_psnr_db": mean_psnr(f["psnr_db"] for f in per_frame),
        },
        "config": result.config,
    }
    if not payload_bits == result.ledger.total_bits == result.total_bits - container_bits:
        raise RuntimeError("bit totals do not reconcile")
    return report


@dataclass
class CompareResult:
    coupled: EncodeResult
    naive: EncodeResult
    coupled_decoded: list
    naive_decoded: list
    report: dict


def run_compare(ground_truth: Sequence[Frame], sim: SimConfig, cfg: EncoderConfig) -> CompareResult:
    """Simulate the sensor from high-rate frames, then run both encoders at matched qp."""
    if cfg.interp_factor + 1 != sim.decimation:
        raise EvcError("compare needs interp + 1 == decimation so every output frame has ground truth")
    events = simulate_events(ground_truth, sim)
    keyframes = decimate_keyframes(ground_truth, sim.decimation)
    gt = {i: f for i, f in enumerate(ground_truth[:(len(keyframes) - 1) * sim.decimation + 1])}
    cfg = replace(cfg, rc_mode="constant_qp")

    sides = {}
    for name, fn in (("coupled", encode_sequence), ("naive", encode_naive)):
        t0 = time.perf_counter()
        res = fn(keyframes, events, cfg)
        wall = time.perf_counter() - t0
        decoded = decode_stream(res.bitstream)
        rep = metrics_report(res, gt, decoded)
        b_pocs = [p for p in gt if p % sim.decimation]
        sides[name] = (res, decoded, {
            "total_bits": res.total_bits,
            "intermediate_bits": sum(f["bits"] for f in rep["frames"] if f["poc"] in b_pocs),
            "sad_evals": res.ops["sad_evals"],
            "dct_calls": res.ops["dct_calls"],
            "quant_calls": res.ops["quant_calls"],
            "mc_block_warps": res.ops["mc_block_warps"],
            "op_total": res.ops["sad_evals"] + res.ops["dct_calls"] + res.ops["quant_calls"],
            "wall_time_s": wall,
            "frame_count": len(decoded),
            "mean_psnr_db": rep["totals"]["mean_psnr_db"],
            "intermediate_psnr_db": mean_psnr(f["psnr_db"] for f in rep["frames"] if f["poc"] in b_pocs),
        })
    report = {
        "coupled": sides["coupled"][2],
        "naive": sides["naive"][2],
        "events": len(events),
        "config": {"encoder": asdict(cfg), "sim": asdict(sim)},
    }
    return CompareResult(sides["coupled"][0], sides["naive"][0], sides["coupled"][1], sides["naive"][1], report)

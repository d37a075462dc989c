"""Command-line entry points: simulate-events, encode, decode, metrics, compare."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .counters import counters
from .errors import EvcError
from .event_sim import SimConfig, decimate_keyframes, read_events, simulate_events, write_evt1
from .keyframe_codec import DEFAULT_SEARCH_RANGE
from .metrics import mean_psnr, psnr
from .pgm import list_frames, read_sequence, write_sequence
from .pipeline import EncoderConfig, encode_sequence, metrics_report, run_compare
from .stream_io import decode_stream, read_stream_file, write_stream_file

DEFAULT_FPS = 120.0


def _frame_period(fps: float) -> int:
    if fps <= 0:
        raise EvcError("--fps must be positive")
    return int(round(1e6 / fps))


def _dump_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def _encoder_config(args) -> EncoderConfig:
    return EncoderConfig(
        interp_factor=args.interp, gop_length=args.gop, qp=args.qp, rc_mode=args.rc,
        bitrate_bps=args.bitrate, search_range=args.search_range,
        alpha_mode="linear" if args.linear_alpha else "events",
    )


def cmd_simulate(args):
    frames = read_sequence(args.frames, _frame_period(args.fps))
    cfg = SimConfig(contrast_threshold=args.threshold, decimation=args.decimation)
    events = simulate_events(frames, cfg)
    keys = decimate_keyframes(frames, cfg.decimation)
    out = Path(args.out)
    write_sequence(out / "keyframes", keys)
    write_evt1(out / "events.evt1", events, cfg.contrast_threshold)
    print(f"{len(keys)} keyframes, {len(events)} events -> {out}")


def cmd_encode(args):
    if args.rc == "coupled" and not args.bitrate:
        raise EvcError("--rc coupled needs --bitrate")
    keyframes = read_sequence(args.frames, _frame_period(args.fps))
    events = None
    if args.events:
        events = read_events(args.events, keyframes[0].width, keyframes[0].height)
    cfg = _encoder_config(args)
    result = encode_sequence(keyframes, events, cfg)
    write_stream_file(args.out, result.bitstream)
    refs = {i * (cfg.interp_factor + 1): k for i, k in enumerate(keyframes)}
    report = metrics_report(result, refs)
    report["config"]["fps"] = args.fps
    if args.report:
        _dump_json(report, args.report)
    print(f"{report['totals']['frame_count']} frames, {result.total_bits} bits -> {args.out}")


def cmd_decode(args):
    frames = decode_stream(read_stream_file(args.stream))
    write_sequence(args.out, frames)
    print(f"{len(frames)} frames -> {args.out}")


def cmd_metrics(args):
    period = _frame_period(args.fps)
    refs = {f.poc: f for f in read_sequence(args.frames, period)}
    decoded = {f.poc: f for f in read_sequence(args.decoded, period)}
    rows = []
    for poc in sorted(decoded):
        ref = refs.get(poc)
        rows.append({"poc": poc, "psnr_db": psnr(decoded[poc], ref) if ref is not None else None})
    report = {"frames": rows, "mean_psnr_db": mean_psnr(r["psnr_db"] for r in rows)}
    if args.stream:
        bs = read_stream_file(args.stream)
        bits = {u.poc: u.payload_bits for u in bs.units}
        types = {u.poc: u.frame_type.name for u in bs.units}
        for r in rows:
            r["bits"] = bits.get(r["poc"])
            r["type"] = types.get(r["poc"])
        report["payload_bits"] = sum(bits.values())
        report["file_bits"] = 8 * Path(args.stream).stat().st_size
    report["config"] = {"frames": str(args.frames), "decoded": str(args.decoded), "fps": args.fps}
    _dump_json(report, args.report)


def cmd_compare(args):
    gt = read_sequence(args.frames, _frame_period(args.fps))
    sim = SimConfig(contrast_threshold=args.threshold, decimation=args.decimation)
    cfg = _encoder_config(args)
    res = run_compare(gt, sim, cfg)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_stream_file(out / "coupled.evc", res.coupled.bitstream)
        write_stream_file(out / "naive.evc", res.naive.bitstream)
    _dump_json(res.report, args.report)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="evcodec", description="Event-guided keyframe + motion-only B-frame codec")
    sub = p.add_subparsers(dest="command", required=True)

    def fps(sp):
        sp.add_argument("--fps", type=float, default=DEFAULT_FPS,
                        help="rate of the frame_%%06d.pgm index; timestamp = index / fps")

    def enc(sp):
        sp.add_argument("--interp", type=int, default=3, help="B frames between consecutive keyframes")
        sp.add_argument("--gop", type=int, default=4, help="keyframes per GOP (I P P P for 4)")
        sp.add_argument("--qp", type=int, default=28, help="keyframe qp, or the controller's base qp")
        sp.add_argument("--bitrate", type=float, default=None, help="target bits per second (coupled rc)")
        sp.add_argument("--rc", choices=("constant_qp", "coupled"), default="constant_qp")
        sp.add_argument("--search-range", type=int, default=DEFAULT_SEARCH_RANGE)
        sp.add_argument("--linear-alpha", action="store_true", help="ignore events; split motion linearly in time")

    sp = sub.add_parser("simulate-events", help="synthesize events and keyframes from a high-rate PGM sequence")
    sp.add_argument("--frames", required=True)
    sp.add_argument("--out", required=True, help="output directory (keyframes/ and events.evt1)")
    sp.add_argument("--threshold", type=float, default=0.15)
    sp.add_argument("--decimation", type=int, default=4)
    fps(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("encode", help="encode keyframes + events into an .evc stream")
    sp.add_argument("--frames", required=True, help="keyframe PGM directory")
    sp.add_argument("--events", help="EVT1 or CSV event file")
    sp.add_argument("--out", required=True)
    sp.add_argument("--report")
    enc(sp)
    fps(sp)
    sp.set_defaults(func=cmd_encode)

    sp = sub.add_parser("decode", help="decode an .evc stream to PGM frames in display order")
    sp.add_argument("stream")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_decode)

    sp = sub.add_parser("metrics", help="PSNR of decoded frames against references")
    sp.add_argument("--frames", required=True, help="reference PGM directory")
    sp.add_argument("--decoded", required=True, help="decoded PGM directory")
    sp.add_argument("--stream", help="optional .evc stream for per-frame bits")
    sp.add_argument("--report")
    fps(sp)
    sp.set_defaults(func=cmd_metrics)

    sp = sub.add_parser("compare", help="coupled encoder vs explicit interpolation + residual coding")
    sp.add_argument("--frames", required=True, help="high-rate ground-truth PGM directory")
    sp.add_argument("--out", help="directory for both streams")
    sp.add_argument("--report")
    sp.add_argument("--threshold", type=float, default=0.15)
    sp.add_argument("--decimation", type=int, default=4)
    enc(sp)
    fps(sp)
    sp.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    counters.reset()
    try:
        args.func(args)
    except (EvcError, OSError) as exc:
        print(f"evcodec: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

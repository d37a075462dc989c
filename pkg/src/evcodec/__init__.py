"""Keyframe + event codec emitting motion-only B frames for high-rate video."""
from .core_model import (EncodedFrameUnit, Event, EventStream, Frame, FrameType, GopStructure, MotionField,
                         MotionVector, build_gop_schedule, sample_clamped)
from .errors import BitstreamError, EvcError
from .pipeline import EncoderConfig, encode_naive, encode_sequence, run_compare
from .stream_io import Bitstream, decode_stream, parse_bitstream, write_bitstream

__all__ = [
    "Bitstream", "BitstreamError", "EncodedFrameUnit", "EncoderConfig", "Event", "EventStream", "EvcError",
    "Frame", "FrameType", "GopStructure", "MotionField", "MotionVector", "build_gop_schedule",
    "decode_stream", "encode_naive", "encode_sequence", "parse_bitstream", "run_compare", "sample_clamped",
    "write_bitstream",
]

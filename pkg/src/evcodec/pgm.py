"""Binary PGM (P5, maxval 255) frame sequences named ``frame_%06d.pgm``."""
from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .core_model import Frame
from .errors import EvcError

FRAME_NAME = "frame_{:06d}.pgm"
_NAME_RE = re.compile(r"frame_(\d+)\.pgm$")


def _tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    out, pos = [], 0
    while len(out) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise EvcError("truncated PGM header")
        out.append(data[start:pos])
    return out, pos + 1


def read_pgm(path, poc: int = 0, timestamp: int = 0) -> Frame:
    data = Path(path).read_bytes()
    (magic, w, h, maxval), offset = _tokens(data, 4)
    if magic != b"P5":
        raise EvcError(f"{path}: not a binary PGM")
    w, h, maxval = int(w), int(h), int(maxval)
    if maxval != 255:
        raise EvcError(f"{path}: only maxval 255 is supported")
    raster = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=offset)
    return Frame(raster.reshape(h, w), poc, timestamp)


def write_pgm(path, frame: Frame):
    header = f"P5\n{frame.width} {frame.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + frame.samples.tobytes())


def frame_index(path) -> int:
    m = _NAME_RE.search(Path(path).name)
    if not m:
        raise EvcError(f"unexpected frame file name: {path}")
    return int(m.group(1))


def list_frames(directory) -> list[Path]:
    paths = sorted(Path(directory).glob("frame_*.pgm"), key=frame_index)
    if not paths:
        raise EvcError(f"no frame_*.pgm files in {directory}")
    return paths


def read_sequence(directory, frame_period_us: int) -> list[Frame]:
    """Frames in index order; the file index sets poc and timestamp = index * period."""
    frames = []
    for p in list_frames(directory):
        i = frame_index(p)
        frames.append(read_pgm(p, poc=i, timestamp=i * frame_period_us))
    return frames


def write_sequence(directory, frames, indices=None):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for n, frame in enumerate(frames):
        idx = frame.poc if indices is None else indices[n]
        write_pgm(directory / FRAME_NAME.format(idx), frame)

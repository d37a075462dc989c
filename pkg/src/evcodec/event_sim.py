"""Synthetic event stream from a high-rate luma video.

Stand-in for a hybrid event sensor: per pixel the log intensity
L = ln(I + log_eps) is linearly interpolated between frames, and an event
fires each time L moves one contrast threshold away from the pixel's
reference level. No noise, no refractory period.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core_model import EventStream, Frame
from .errors import BitstreamError, EvcError

EVT_MAGIC = b"EVT1"
_EVT_HEADER = struct.Struct("<4sHHQf")
EVT_RECORD = np.dtype([("t", "<u4"), ("x", "<u2"), ("y", "<u2"), ("p", "i1")])

# absorbs float error when a change is an exact multiple of the threshold
_CROSS_EPS = 1e-9


@dataclass(frozen=True)
class SimConfig:
    contrast_threshold: float = 0.15
    log_eps: float = 1.0
    decimation: int = 4

    def __post_init__(self):
        if not self.contrast_threshold > 0:
            raise EvcError("contrast_threshold must be positive")
        if self.decimation < 1:
            raise EvcError("decimation must be >= 1")
        if not self.log_eps > 0:
            raise EvcError("log_eps must be positive")


def simulate_events(frames: Sequence[Frame], cfg: SimConfig = SimConfig()) -> EventStream:
    if len(frames) < 2:
        raise EvcError("need at least two frames")
    shape = frames[0].samples.shape
    if any(f.samples.shape != shape for f in frames):
        raise EvcError("geometry mismatch")
    if any(b.timestamp <= a.timestamp for a, b in zip(frames, frames[1:])):
        raise EvcError("frame timestamps must be strictly increasing")
    h, w = shape
    c = cfg.contrast_threshold
    ref = np.log(frames[0].samples.astype(np.float64).ravel() + cfg.log_eps)
    ts, xs, ys, ps = [], [], [], []
    for a, b in zip(frames, frames[1:]):
        l0 = np.log(a.samples.astype(np.float64).ravel() + cfg.log_eps)
        l1 = np.log(b.samples.astype(np.float64).ravel() + cfg.log_eps)
        diff = l1 - ref
        n = np.floor(np.abs(diff) / c + _CROSS_EPS).astype(np.int64)
        fired = np.nonzero(n)[0]
        if fired.size:
            counts = n[fired]
            pix = np.repeat(fired, counts)
            # k-th crossing of each firing pixel, k = 1..n
            k = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts) + 1
            sign = np.sign(diff[pix])
            level = ref[pix] + sign * k * c
            span = l1[pix] - l0[pix]
            frac = np.clip((level - l0[pix]) / span, 0.0, 1.0)
            dt = b.timestamp - a.timestamp
            t = np.floor(a.timestamp + frac * dt + 0.5).astype(np.int64)
            ts.append(t)
            xs.append(pix % w)
            ys.append(pix // w)
            ps.append(sign.astype(np.int8))
            ref[fired] += np.sign(diff[fired]) * counts * c
    if not ts:
        return EventStream(w, h)
    return EventStream.from_unsorted(w, h, np.concatenate(ts), np.concatenate(xs),
                                     np.concatenate(ys), np.concatenate(ps))


def decimate_keyframes(frames: Sequence[Frame], k: int) -> list[Frame]:
    """Every k-th frame from index 0; a tail without a closing keyframe is dropped."""
    if not frames:
        raise EvcError("no frames")
    if k < 1:
        raise EvcError("decimation must be >= 1")
    last = (len(frames) - 1) // k * k
    return list(frames[0:last + 1:k])


# EVT1 / CSV -------------------------------------------------------------------

def write_evt1(path, events: EventStream, contrast_threshold: float):
    rec = np.zeros(len(events), dtype=EVT_RECORD)
    if len(events) and events.t.max() > 0xFFFFFFFF:
        raise EvcError("event timestamp exceeds 32 bits")
    rec["t"], rec["x"], rec["y"], rec["p"] = events.t, events.x, events.y, events.polarity
    header = _EVT_HEADER.pack(EVT_MAGIC, events.width, events.height, len(events), contrast_threshold)
    Path(path).write_bytes(header + rec.tobytes())


def read_evt1(path) -> tuple[EventStream, float]:
    data = Path(path).read_bytes()
    if len(data) < _EVT_HEADER.size:
        raise BitstreamError("unexpected end of event file")
    magic, w, h, count, threshold = _EVT_HEADER.unpack_from(data)
    if magic != EVT_MAGIC:
        raise BitstreamError("not an EVT1 file")
    body = data[_EVT_HEADER.size:]
    if len(body) != count * EVT_RECORD.itemsize:
        raise BitstreamError("event count does not match file size")
    rec = np.frombuffer(body, dtype=EVT_RECORD, count=count)
    stream = EventStream(w, h, rec["t"].astype(np.int64), rec["x"].astype(np.int64),
                         rec["y"].astype(np.int64), rec["p"])
    return stream, float(threshold)


def read_events_csv(path, width: int, height: int) -> EventStream:
    """Rows ``t_us,x,y,p``; a header row is skipped if present."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or not row[0].strip().lstrip("-").isdigit():
                continue
            rows.append([int(v) for v in row[:4]])
    arr = np.array(rows, dtype=np.int64).reshape(-1, 4)
    return EventStream.from_unsorted(width, height, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])


def write_events_csv(path, events: EventStream):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["t_us", "x", "y", "p"])
        out.writerows(events)


def read_events(path, width: int | None = None, height: int | None = None) -> EventStream:
    if str(path).lower().endswith(".csv"):
        if width is None or height is None:
            raise EvcError("CSV events need the frame geometry")
        return read_events_csv(path, width, height)
    return read_evt1(path)[0]

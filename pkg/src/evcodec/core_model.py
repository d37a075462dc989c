"""Shared domain types, block geometry, GOP scheduling and clamped sampling."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import EvcError

CTU_SIZE = 16
TU_SIZE = 8


@dataclass(frozen=True)
class BlockGrid:
    ctu_size: int = CTU_SIZE
    tu_size: int = TU_SIZE
    pu_size: int = CTU_SIZE

    def __post_init__(self):
        if self.ctu_size % self.tu_size or self.pu_size != self.ctu_size:
            raise EvcError("invalid block grid")


class FrameType(enum.IntEnum):
    I = 0
    P = 1
    B = 2


def round_half_away(x):
    """Round half away from zero; works on scalars and arrays."""
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def div_round_half_up(num: int, den: int) -> int:
    return (2 * num + den) // (2 * den)


@dataclass(frozen=True, eq=False)
class Frame:
    """8-bit luma raster, stored as a read-only (height, width) uint8 array."""

    samples: np.ndarray
    poc: int = 0
    timestamp: int = 0

    def __post_init__(self):
        arr = np.asarray(self.samples)
        if arr.ndim != 2 or arr.size == 0:
            raise EvcError("frame samples must be a non-empty 2-D raster")
        if arr.dtype != np.uint8:
            if arr.min() < 0 or arr.max() > 255:
                raise EvcError("frame samples must be 8-bit")
            arr = arr.astype(np.uint8)
        arr = np.array(arr, dtype=np.uint8, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    def with_meta(self, poc: int | None = None, timestamp: int | None = None) -> "Frame":
        return Frame(
            self.samples,
            self.poc if poc is None else poc,
            self.timestamp if timestamp is None else timestamp,
        )

    def pixels_equal(self, other: "Frame") -> bool:
        return np.array_equal(self.samples, other.samples)


class Event(NamedTuple):
    t: int
    x: int
    y: int
    polarity: int


@dataclass(frozen=True, eq=False)
class EventStream:
    """Time-ordered events stored column-wise.

    Ties in ``t`` are ordered by (y, x, polarity).
    """

    width: int
    height: int
    t: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    x: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    y: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    polarity: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int8))

    def __post_init__(self):
        cols = {}
        for name, dtype in (("t", np.int64), ("x", np.int64), ("y", np.int64), ("polarity", np.int8)):
            col = np.asarray(getattr(self, name), dtype=dtype).ravel()
            col.setflags(write=False)
            cols[name] = col
            object.__setattr__(self, name, col)
        n = len(cols["t"])
        if any(len(c) != n for c in cols.values()):
            raise EvcError("event columns differ in length")
        if n:
            if cols["x"].min() < 0 or cols["x"].max() >= self.width:
                raise EvcError("event x outside geometry")
            if cols["y"].min() < 0 or cols["y"].max() >= self.height:
                raise EvcError("event y outside geometry")
            if not np.all(np.isin(cols["polarity"], (-1, 1))):
                raise EvcError("event polarity must be +1 or -1")
            if cols["t"].min() < 0:
                raise EvcError("event timestamps must be non-negative")
            key = np.lexsort((cols["polarity"], cols["x"], cols["y"], cols["t"]))
            if not np.array_equal(key, np.arange(n)):
                raise EvcError("events are not sorted")

    @classmethod
    def from_unsorted(cls, width, height, t, x, y, polarity) -> "EventStream":
        t, x, y, p = (np.asarray(a) for a in (t, x, y, polarity))
        order = np.lexsort((p, x, y, t))
        return cls(width, height, t[order], x[order], y[order], p[order])

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator[Event]:
        for row in zip(self.t.tolist(), self.x.tolist(), self.y.tolist(), self.polarity.tolist()):
            yield Event(*row)

    def window(self, t0: int, t1: int) -> "EventStream":
        """Events with t0 < t <= t1."""
        lo = np.searchsorted(self.t, t0, side="right")
        hi = np.searchsorted(self.t, t1, side="right")
        return EventStream(self.width, self.height, self.t[lo:hi], self.x[lo:hi], self.y[lo:hi], self.polarity[lo:hi])


class MotionVector(NamedTuple):
    dx: int
    dy: int


@dataclass(frozen=True, eq=False)
class MotionField:
    """Per-block integer motion vectors, ``vectors`` shaped (blocks_y, blocks_x, 2) as (dx, dy)."""

    blocks_x: int
    blocks_y: int
    vectors: np.ndarray
    target_poc: int = 0
    reference_poc: int = 0
    block_size: int = CTU_SIZE

    def __post_init__(self):
        vec = np.array(self.vectors, dtype=np.int64).reshape(self.blocks_y, self.blocks_x, 2)
        vec.setflags(write=False)
        object.__setattr__(self, "vectors", vec)

    @classmethod
    def zeros(cls, blocks_x, blocks_y, **kw) -> "MotionField":
        return cls(blocks_x, blocks_y, np.zeros((blocks_y, blocks_x, 2), np.int64), **kw)

    def __getitem__(self, b) -> MotionVector:
        bx, by = b
        dx, dy = self.vectors[by, bx]
        return MotionVector(int(dx), int(dy))

    def max_abs(self) -> int:
        return int(np.abs(self.vectors).max()) if self.vectors.size else 0

    def covers(self, width: int, height: int) -> bool:
        return self.blocks_x * self.block_size == width and self.blocks_y * self.block_size == height

    def __eq__(self, other):
        if not isinstance(other, MotionField):
            return NotImplemented
        return (self.blocks_x, self.blocks_y, self.block_size) == (other.blocks_x, other.blocks_y, other.block_size) \
            and np.array_equal(self.vectors, other.vectors)


class FrameSlot(NamedTuple):
    poc: int
    frame_type: FrameType
    timestamp: int


@dataclass(frozen=True)
class GopStructure:
    gop_length: int
    interp_factor: int
    frame_slots: tuple[FrameSlot, ...]

    @property
    def frame_count(self) -> int:
        return len(self.frame_slots)

    @property
    def keyframe_pocs(self) -> list[int]:
        return [s.poc for s in self.frame_slots if s.frame_type != FrameType.B]

    @property
    def gop_frames(self) -> int:
        """Display frames in a complete GOP."""
        return self.gop_length * (self.interp_factor + 1)

    def gop_start(self, poc: int) -> int:
        return poc - poc % self.gop_frames

    def frames_in_gop(self, poc: int) -> int:
        start = self.gop_start(poc)
        return min(self.gop_frames, self.frame_count - start)


# sampling -----------------------------------------------------------------

def sample_clamped(frame: Frame, x: int, y: int) -> int:
    h, w = frame.samples.shape
    return int(frame.samples[min(max(y, 0), h - 1), min(max(x, 0), w - 1)])


def fetch_block(samples: np.ndarray, x0: int, y0: int, size: int = CTU_SIZE) -> np.ndarray:
    """size x size tile with top-left (x0, y0); coordinates outside the raster are clamped."""
    h, w = samples.shape
    if 0 <= x0 and x0 + size <= w and 0 <= y0 and y0 + size <= h:
        return samples[y0:y0 + size, x0:x0 + size]
    ys = np.clip(np.arange(y0, y0 + size), 0, h - 1)
    xs = np.clip(np.arange(x0, x0 + size), 0, w - 1)
    return samples[np.ix_(ys, xs)]


def extract_block(frame: Frame, bx: int, by: int, size: int = CTU_SIZE) -> np.ndarray:
    if bx < 0 or by < 0 or bx * size >= frame.width or by * size >= frame.height:
        raise EvcError("block index out of range")
    return frame.samples[by * size:(by + 1) * size, bx * size:(bx + 1) * size]


# geometry -----------------------------------------------------------------

def padded_size(n: int, block: int = CTU_SIZE) -> int:
    return -(-n // block) * block


def pad_to_ctu(frame: Frame, block: int = CTU_SIZE) -> Frame:
    """Replicate the last row/column up to the next multiple of ``block``."""
    h, w = frame.samples.shape
    ph, pw = padded_size(h, block), padded_size(w, block)
    if (ph, pw) == (h, w):
        return frame
    arr = np.pad(frame.samples, ((0, ph - h), (0, pw - w)), mode="edge")
    return Frame(arr, frame.poc, frame.timestamp)


def crop(frame: Frame, width: int, height: int) -> Frame:
    if (frame.width, frame.height) == (width, height):
        return frame
    return Frame(frame.samples[:height, :width], frame.poc, frame.timestamp)


def block_counts(width: int, height: int, block: int = CTU_SIZE) -> tuple[int, int]:
    return width // block, height // block


# GOP ----------------------------------------------------------------------

def build_gop_schedule(n_keyframes: int, interp_factor: int, keyframe_period_us: int,
                       gop_length: int = 4, start_us: int = 0) -> GopStructure:
    """Display-ordered slots: keyframes are I every ``gop_length`` keyframes, P otherwise,
    with ``interp_factor`` B slots uniformly subdividing each keyframe interval."""
    if n_keyframes < 2:
        raise EvcError("need at least two keyframes")
    if interp_factor < 0 or gop_length < 1 or keyframe_period_us <= 0:
        raise EvcError("invalid GOP parameters")
    if interp_factor + 1 > keyframe_period_us:
        raise EvcError("keyframe period too short for the interpolation factor")
    slots = []
    step = interp_factor + 1
    for k in range(n_keyframes):
        t_k = start_us + k * keyframe_period_us
        ftype = FrameType.I if k % gop_length == 0 else FrameType.P
        slots.append(FrameSlot(k * step, ftype, t_k))
        if k == n_keyframes - 1:
            break
        for j in range(1, step):
            slots.append(FrameSlot(k * step + j, FrameType.B,
                                   t_k + div_round_half_up(j * keyframe_period_us, step)))
    return GopStructure(gop_length, interp_factor, tuple(slots))


def bracketing_keyframes(schedule: GopStructure, poc: int) -> tuple[int, int]:
    step = schedule.interp_factor + 1
    lo = poc - poc % step
    return lo, lo + step


def as_frames(arrays: Sequence[np.ndarray], frame_period_us: int = 1) -> list[Frame]:
    return [Frame(a, i, i * frame_period_us) for i, a in enumerate(arrays)]


# coded units -----------------------------------------------------------------

@dataclass(frozen=True)
class EncodedFrameUnit:
    """One coded picture; ``qp`` for I/P units, reference POCs for B units."""

    frame_type: FrameType
    poc: int
    payload: bytes
    qp: int | None = None
    fwd_ref_poc: int | None = None
    bwd_ref_poc: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "frame_type", FrameType(self.frame_type))
        if self.frame_type == FrameType.B:
            if self.fwd_ref_poc is None or self.bwd_ref_poc is None or self.qp is not None:
                raise EvcError("B unit needs two reference POCs and no qp")
            if not self.fwd_ref_poc < self.poc < self.bwd_ref_poc:
                raise EvcError("B unit references must bracket its poc")
        elif self.qp is None or self.fwd_ref_poc is not None or self.bwd_ref_poc is not None:
            raise EvcError("keyframe unit needs a qp and no reference POCs")

    @property
    def payload_bits(self) -> int:
        return 8 * len(self.payload)


def median_mv_predictor(mvs: np.ndarray, avail: np.ndarray, bx: int, by: int) -> tuple[int, int]:
    """Component-wise median of the causal left / above / above-right neighbours.

    No neighbour gives (0, 0); a single neighbour is used as-is; with two,
    the missing one counts as (0, 0).
    """
    bxs = avail.shape[1]
    cand = []
    for nx, ny in ((bx - 1, by), (bx, by - 1), (bx + 1, by - 1)):
        if 0 <= nx < bxs and ny >= 0 and avail[ny, nx]:
            cand.append((int(mvs[ny, nx, 0]), int(mvs[ny, nx, 1])))
    if not cand:
        return 0, 0
    if len(cand) == 1:
        return cand[0]
    if len(cand) == 2:
        cand.append((0, 0))
    xs = sorted(c[0] for c in cand)
    ys = sorted(c[1] for c in cand)
    return xs[1], ys[1]

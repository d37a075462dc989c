"""Motion for intermediate timestamps from two keyframes and the events between them.

Keyframe-to-keyframe block matching gives the full-interval vector per
block; cumulative event counts per block decide how much of that motion has
happened by each intermediate timestamp. No intermediate frame is built.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core_model import CTU_SIZE, EventStream, Frame, MotionField, fetch_block, round_half_away
from .counters import counters
from .errors import EvcError
from .keyframe_codec import DEFAULT_SEARCH_RANGE, BlockSearcher

DEFAULT_N_MIN = 8
DEFAULT_T_OCC = 8 * CTU_SIZE * CTU_SIZE


class BMode(enum.IntEnum):
    BI = 0
    FWD = 1
    BWD = 2


@dataclass(frozen=True, eq=False)
class InterKeyframeFlow:
    field: MotionField
    sad: np.ndarray
    search_range: int


@dataclass(frozen=True, eq=False)
class EventActivation:
    """``counts[i]`` holds per-block event counts in (t, taus[i]]; ``totals`` in (t, t1]."""

    t: int
    t1: int
    taus: tuple
    counts: np.ndarray
    totals: np.ndarray
    alphas: np.ndarray
    n_min: int

    def alpha(self, tau: int) -> np.ndarray:
        try:
            return self.alphas[self.taus.index(tau)]
        except ValueError:
            raise EvcError("timestamp outside keyframe interval") from None


def block_match_keyframes(frame_t: Frame, frame_t1: Frame,
                          search_range: int = DEFAULT_SEARCH_RANGE) -> InterKeyframeFlow:
    """Per 16x16 block of ``frame_t``, the displacement into ``frame_t1``."""
    if frame_t.samples.shape != frame_t1.samples.shape:
        raise EvcError("geometry mismatch")
    s = CTU_SIZE
    h, w = frame_t.samples.shape
    if h % s or w % s:
        raise EvcError("frame dimensions must be multiples of the CTU size")
    bxs, bys = w // s, h // s
    searcher = BlockSearcher(frame_t1.samples, search_range)
    src = frame_t.samples.astype(np.int32)
    vec = np.zeros((bys, bxs, 2), np.int64)
    sad = np.zeros((bys, bxs), np.int64)
    for by in range(bys):
        for bx in range(bxs):
            mv, cost = searcher.search(src[by * s:(by + 1) * s, bx * s:(bx + 1) * s], bx * s, by * s)
            vec[by, bx] = mv
            sad[by, bx] = cost
    field = MotionField(bxs, bys, vec, target_poc=frame_t.poc, reference_poc=frame_t1.poc)
    return InterKeyframeFlow(field, sad, search_range)


def _pool(grid: np.ndarray, r: int) -> np.ndarray:
    if r <= 0:
        return grid
    padded = np.pad(grid, r)
    out = np.zeros_like(grid)
    h, w = grid.shape
    for dy in range(2 * r + 1):
        for dx in range(2 * r + 1):
            out += padded[dy:dy + h, dx:dx + w]
    return out


def event_fraction(events: EventStream, t: int, t1: int, taus: Sequence[int],
                   blocks_x: int, blocks_y: int, n_min: int = DEFAULT_N_MIN,
                   block_size: int = CTU_SIZE, pool_radius: int = 0) -> EventActivation:
    """Per block, the fraction of (t, t1] events that occurred by each tau.

    With ``pool_radius`` r > 0 the counts of a block are summed over its
    (2r+1) x (2r+1) block neighbourhood (clipped at the frame edge) before
    the ratio is taken. Blocks whose (pooled) total is below ``n_min`` fall
    back to (tau - t) / (t1 - t).
    """
    if not t < t1:
        raise EvcError("empty keyframe interval")
    taus = tuple(int(v) for v in taus)
    if any(not t < tau < t1 for tau in taus):
        raise EvcError("timestamp outside keyframe interval")
    win = events.window(t, t1)
    bidx = np.minimum(win.y // block_size, blocks_y - 1) * blocks_x + np.minimum(win.x // block_size, blocks_x - 1)
    nblocks = blocks_x * blocks_y
    totals = _pool(np.bincount(bidx, minlength=nblocks).reshape(blocks_y, blocks_x), pool_radius)
    counts = np.zeros((len(taus), blocks_y, blocks_x), np.int64)
    alphas = np.zeros((len(taus), blocks_y, blocks_x), np.float64)
    enough = totals >= n_min
    for i, tau in enumerate(taus):
        upto = np.searchsorted(win.t, tau, side="right")
        counts[i] = _pool(np.bincount(bidx[:upto], minlength=nblocks).reshape(blocks_y, blocks_x), pool_radius)
        linear = (tau - t) / (t1 - t)
        alphas[i] = np.where(enough, counts[i] / np.maximum(totals, 1), linear)
    return EventActivation(t, t1, taus, counts, totals, alphas, n_min)


def linear_activation(t: int, t1: int, taus: Sequence[int], blocks_x: int, blocks_y: int) -> EventActivation:
    """Event-free activation: alpha = (tau - t) / (t1 - t) everywhere."""
    empty = EventStream(blocks_x * CTU_SIZE, blocks_y * CTU_SIZE)
    return event_fraction(empty, t, t1, taus, blocks_x, blocks_y, n_min=1)


def distribute_motion(flow: InterKeyframeFlow, alpha: np.ndarray, tau_poc: int = 0,
                      fwd_poc: int = 0, bwd_poc: int = 0) -> tuple[MotionField, MotionField]:
    """Split v into F_{tau->t} = -round(alpha v) and F_{tau->t+1} = round((1 - alpha) v)."""
    v = flow.field.vectors.astype(np.float64)
    a = np.broadcast_to(np.asarray(alpha, dtype=np.float64), v.shape[:2])[..., None]
    to_prev = -round_half_away(a * v)
    to_next = round_half_away((1.0 - a) * v)
    bx, by = flow.field.blocks_x, flow.field.blocks_y
    return (MotionField(bx, by, to_prev.astype(np.int64), target_poc=tau_poc, reference_poc=fwd_poc),
            MotionField(bx, by, to_next.astype(np.int64), target_poc=tau_poc, reference_poc=bwd_poc))


def select_prediction_mode(frame_t: Frame, frame_t1: Frame, to_prev: MotionField, to_next: MotionField,
                           alpha: np.ndarray, t_occ: int = DEFAULT_T_OCC) -> np.ndarray:
    """Per block: bi when the two warped candidates agree within ``t_occ`` SAD,
    otherwise the temporally closer keyframe (fwd for alpha <= 0.5)."""
    s = CTU_SIZE
    bys, bxs = to_prev.blocks_y, to_prev.blocks_x
    alpha = np.broadcast_to(np.asarray(alpha, dtype=np.float64), (bys, bxs))
    modes = np.zeros((bys, bxs), np.int64)
    a_src = frame_t.samples.astype(np.int64)
    b_src = frame_t1.samples.astype(np.int64)
    for by in range(bys):
        for bx in range(bxs):
            fx, fy = to_prev.vectors[by, bx]
            gx, gy = to_next.vectors[by, bx]
            p_fwd = fetch_block(a_src, bx * s + int(fx), by * s + int(fy), s)
            p_bwd = fetch_block(b_src, bx * s + int(gx), by * s + int(gy), s)
            counters.mc_candidate_warps += 2
            if int(np.abs(p_fwd - p_bwd).sum()) <= t_occ:
                modes[by, bx] = BMode.BI
            else:
                modes[by, bx] = BMode.FWD if alpha[by, bx] <= 0.5 else BMode.BWD
    return modes


def write_motion_dump(path, poc: int, to_prev: MotionField, to_next: MotionField, modes: np.ndarray | None = None):
    """Text dump, one ``poc dir bx by dx dy`` line per block and direction."""
    lines = []
    for name, field, skip in (("fwd", to_prev, BMode.BWD), ("bwd", to_next, BMode.FWD)):
        for by in range(field.blocks_y):
            for bx in range(field.blocks_x):
                if modes is not None and modes[by, bx] == skip:
                    continue
                dx, dy = field.vectors[by, bx]
                lines.append(f"{poc} {name} {bx} {by} {dx} {dy}")
    Path(path).write_text("\n".join(lines) + "\n")

"""Deterministic synthetic test sequences with exact integer-pixel motion."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .core_model import Frame


def textured_canvas(height: int, width: int, seed: int = 0, smooth: float = 1.0,
                    lo: float = 20.0, hi: float = 240.0) -> np.ndarray:
    """Box-blurred uniform noise rescaled to [lo, hi]; ``smooth`` is the blur radius in pixels."""
    rng = np.random.default_rng(seed)
    img = rng.uniform(0.0, 255.0, (height, width))
    r = int(round(smooth))
    if r > 0:
        k = np.ones(2 * r + 1) / (2 * r + 1)
        img = np.apply_along_axis(lambda v: np.convolve(v, k, mode="same"), 0, img)
        img = np.apply_along_axis(lambda v: np.convolve(v, k, mode="same"), 1, img)
    img = (img - img.min()) / max(img.max() - img.min(), 1e-9)
    return img * (hi - lo) + lo


def pan_sequence(canvas: np.ndarray, offsets: Sequence[tuple[int, int]], size: tuple[int, int],
                 frame_period_us: int = 8333, origin: tuple[int, int] | None = None) -> list[Frame]:
    """Crop windows from ``canvas``; frame i shows content displaced by offsets[i] = (dx, dy).

    Content moving by (dx, dy) means frame_i(x, y) = frame_0(x - dx, y - dy).
    """
    h, w = size
    if origin is None:
        origin = ((canvas.shape[1] - w) // 2, (canvas.shape[0] - h) // 2)
    ox, oy = origin
    frames = []
    for i, (dx, dy) in enumerate(offsets):
        x0, y0 = ox - dx, oy - dy
        if x0 < 0 or y0 < 0 or x0 + w > canvas.shape[1] or y0 + h > canvas.shape[0]:
            raise ValueError("canvas too small for the requested motion")
        crop = canvas[y0:y0 + h, x0:x0 + w]
        frames.append(Frame(np.clip(np.round(crop), 0, 255).astype(np.uint8), i, i * frame_period_us))
    return frames


def translating_sequence(n_frames: int, size=(128, 128), velocity=(2, 0), seed: int = 0,
                         smooth: float = 1.0, frame_period_us: int = 8333) -> list[Frame]:
    vx, vy = velocity
    margin = max(abs(vx), abs(vy)) * n_frames + 16
    canvas = textured_canvas(size[0] + 2 * margin, size[1] + 2 * margin, seed, smooth)
    return pan_sequence(canvas, [(vx * i, vy * i) for i in range(n_frames)], size, frame_period_us)


def stop_and_go_sequence(n_intervals: int, step: int = 4, size=(128, 128), shift: int = 4, seed: int = 0,
                         smooth: float = 1.0, frame_period_us: int = 8333) -> list[Frame]:
    """Within every keyframe interval of ``step`` frames: still for the first half, then
    ``shift`` pixels of horizontal motion spread evenly over the second half."""
    half = step // 2
    offsets = []
    for k in range(n_intervals):
        for j in range(step):
            moved = 0 if j <= half else shift * (j - half) // (step - half)
            offsets.append((k * shift + moved, 0))
    offsets.append((n_intervals * shift, 0))
    margin = shift * n_intervals + 16
    canvas = textured_canvas(size[0] + 2 * margin, size[1] + 2 * margin, seed, smooth)
    return pan_sequence(canvas, offsets, size, frame_period_us)

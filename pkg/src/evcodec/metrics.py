"""PSNR and JSON metrics reports."""
from __future__ import annotations

import math

import numpy as np

from .errors import EvcError

PSNR_CAP = 99.0


def psnr(a, b) -> float:
    """PSNR in dB for 8-bit rasters (Frames or arrays); identical inputs give 99.0."""
    a = np.asarray(getattr(a, "samples", a), dtype=np.float64)
    b = np.asarray(getattr(b, "samples", b), dtype=np.float64)
    if a.shape != b.shape:
        raise EvcError("geometry mismatch")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(255.0 ** 2 / mse))


def mean_psnr(values) -> float | None:
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None


def interior_psnr(a, b, margin: int) -> float:
    """PSNR over the raster with ``margin`` pixels removed on every side."""
    a = np.asarray(getattr(a, "samples", a))
    b = np.asarray(getattr(b, "samples", b))
    h, w = a.shape
    return psnr(a[margin:h - margin, margin:w - margin], b[margin:h - margin, margin:w - margin])

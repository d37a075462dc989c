"""8x8 orthonormal DCT-II, uniform scalar quantization and zigzag scan.

Encoder and decoder reconstruct through the same functions, so the float
path is identical on both sides. Matrix products are written as explicit
broadcast-and-sum so the summation order does not depend on a BLAS backend.
"""
import numpy as np

from .core_model import round_half_away
from .counters import counters

N = 8
QP_MIN, QP_MAX = 0, 51
COEFF_MIN, COEFF_MAX = -32768, 32767


def _dct_matrix(n=N):
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    m = np.cos(np.pi * (2 * i + 1) * k / (2 * n)) * np.sqrt(2.0 / n)
    m[0, :] = np.sqrt(1.0 / n)
    return m


DCT_MATRIX = _dct_matrix()
DCT_MATRIX.setflags(write=False)


def _matmul(a, b):
    return (a[:, :, None] * b[None, :, :]).sum(axis=1)


def dct8x8(residual) -> np.ndarray:
    counters.dct_calls += 1
    x = np.asarray(residual, dtype=np.float64)
    return _matmul(_matmul(DCT_MATRIX, x), DCT_MATRIX.T)


def idct8x8(coeffs) -> np.ndarray:
    counters.idct_calls += 1
    c = np.asarray(coeffs, dtype=np.float64)
    return _matmul(_matmul(DCT_MATRIX.T, c), DCT_MATRIX)


def qstep(qp: int) -> float:
    if not QP_MIN <= qp <= QP_MAX:
        raise ValueError(f"qp {qp} outside [{QP_MIN}, {QP_MAX}]")
    return 2.0 ** ((qp - 4) / 6.0)


def quantize(coeffs, qp: int) -> np.ndarray:
    counters.quant_calls += 1
    q = round_half_away(np.asarray(coeffs, dtype=np.float64) / qstep(qp))
    return np.clip(q, COEFF_MIN, COEFF_MAX).astype(np.int64)


def dequantize(block, qp: int) -> np.ndarray:
    counters.dequant_calls += 1
    return np.asarray(block, dtype=np.float64) * qstep(qp)


def _zigzag_order(n=N):
    # JPEG order: walk anti-diagonals, alternating direction
    order = []
    for s in range(2 * n - 1):
        cells = [(r, s - r) for r in range(n) if 0 <= s - r < n]
        if s % 2 == 0:
            cells.reverse()
        order.extend(cells)
    return order


ZIGZAG = tuple(_zigzag_order())
_ZZ_ROWS = np.array([r for r, _ in ZIGZAG])
_ZZ_COLS = np.array([c for _, c in ZIGZAG])


def zigzag(block) -> np.ndarray:
    return np.asarray(block)[_ZZ_ROWS, _ZZ_COLS]


def inverse_zigzag(seq) -> np.ndarray:
    seq = np.asarray(seq)
    out = np.zeros((N, N), dtype=seq.dtype)
    out[_ZZ_ROWS, _ZZ_COLS] = seq
    return out

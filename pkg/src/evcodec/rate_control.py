"""Bit accounting and keyframe QP selection.

Intermediate-frame bits count against the same GOP budget as keyframe bits,
so cheap motion-only frames leave more room for keyframe quality.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .core_model import FrameType, round_half_away
from .errors import EvcError
from .transform import QP_MAX, QP_MIN

MODES = ("constant_qp", "coupled")


@dataclass
class BitLedger:
    bc_current_cu: int = 0
    bc_acc_key: int = 0
    bc_acc_inter: int = 0
    cu_bits: list = field(default_factory=list)
    gop_history: list = field(default_factory=list)
    frames: list = field(default_factory=list)
    _gop_qps: list = field(default_factory=list)
    _gop_open: bool = False

    @property
    def gop_total(self) -> int:
        return self.bc_acc_key + self.bc_acc_inter

    @property
    def total_bits(self) -> int:
        return sum(f["bits"] for f in self.frames)

    def close_gop(self):
        if self._gop_open:
            self.gop_history.append({
                "key_bits": self.bc_acc_key,
                "inter_bits": self.bc_acc_inter,
                "qp_per_keyframe": list(self._gop_qps),
            })
        self.bc_acc_key = self.bc_acc_inter = 0
        self._gop_qps = []
        self._gop_open = False

    def summary(self) -> list[dict]:
        """Closed GOPs followed by the open one, if any."""
        out = list(self.gop_history)
        if self._gop_open:
            out.append({"key_bits": self.bc_acc_key, "inter_bits": self.bc_acc_inter,
                        "qp_per_keyframe": list(self._gop_qps)})
        return out


def record_bits(ledger: BitLedger, frame_type, cu_bits, padding_bits: int = 0,
                poc: int | None = None, qp: int | None = None) -> int:
    """Accumulate one frame's CU bits (plus byte-alignment padding); I frames open a new GOP."""
    frame_type = FrameType(frame_type)
    cu_bits = [int(b) for b in cu_bits]
    if any(b < 0 for b in cu_bits) or padding_bits < 0:
        raise EvcError("negative bit count")
    if frame_type == FrameType.I:
        ledger.close_gop()
    ledger._gop_open = True
    total = sum(cu_bits) + padding_bits
    ledger.cu_bits = cu_bits
    ledger.bc_current_cu = cu_bits[-1] if cu_bits else 0
    if frame_type == FrameType.B:
        ledger.bc_acc_inter += total
    else:
        ledger.bc_acc_key += total
        ledger._gop_qps.append(qp)
    ledger.frames.append({"poc": poc, "type": frame_type.name, "bits": total, "qp": qp})
    return total


@dataclass
class RateControlConfig:
    target_bits_per_gop: float = 0.0
    base_qp: int = 28
    k_p: float = 6.0
    qp_min: int = 4
    qp_max: int = 48
    mode: str = "constant_qp"

    def __post_init__(self):
        if self.mode not in MODES:
            raise EvcError(f"unknown rate control mode {self.mode!r}")
        if not QP_MIN <= self.qp_min <= self.base_qp <= self.qp_max <= QP_MAX:
            raise EvcError("qp_min <= base_qp <= qp_max violated")
        if self.mode == "coupled" and self.target_bits_per_gop <= 0:
            raise EvcError("invalid rate target")


def _clamp(v, lo, hi):
    return max(lo, min(hi, v))


def next_keyframe_qp(ledger: BitLedger, cfg: RateControlConfig, frame_index_in_gop: int,
                     frames_in_gop: int, base_qp: int | None = None) -> int:
    """Proportional control on the normalised GOP budget error.

    ``frame_index_in_gop`` counts display frames since the GOP's I frame;
    ``frames_in_gop`` is the nominal GOP length the budget refers to.
    """
    base = cfg.base_qp if base_qp is None else base_qp
    if cfg.mode == "constant_qp":
        return base
    if cfg.target_bits_per_gop <= 0:
        raise EvcError("invalid rate target")
    if frames_in_gop <= 0:
        raise EvcError("frames_in_gop must be positive")
    ideal = cfg.target_bits_per_gop * (frame_index_in_gop / frames_in_gop)
    e = (ledger.bc_acc_key + ledger.bc_acc_inter - ideal) / cfg.target_bits_per_gop
    return int(_clamp(base + int(round_half_away(cfg.k_p * e)), cfg.qp_min, cfg.qp_max))


class RateControl:
    """Stateful wrapper used by the encode loop.

    In coupled mode the setpoint carries over between GOPs. When a new GOP
    opens, the setpoint is moved so that the closing GOP's rate would have
    hit the target, using the slope of log2(bits) against mean keyframe qp
    measured over the last two GOPs (clamped to one doubling per 3..24 qp).
    Before two GOPs exist the slope is 1 / k_p, which matches the qp step
    law. Within a GOP the proportional law applies unchanged.
    """

    SLOPE_MIN, SLOPE_MAX = 1 / 24, 1 / 3

    def __init__(self, cfg: RateControlConfig):
        self.cfg = cfg
        self.setpoint = cfg.base_qp
        self._points = []

    def _slope(self) -> float:
        default = 1.0 / self.cfg.k_p
        if len(self._points) < 2:
            return default
        (q0, r0), (q1, r1) = self._points[-2:]
        if q1 == q0:
            return default
        return _clamp(-(r1 - r0) / (q1 - q0), self.SLOPE_MIN, self.SLOPE_MAX)

    def _close_gop(self, ledger: BitLedger):
        cfg = self.cfg
        qps = [q for q in ledger._gop_qps if q is not None] or [self.setpoint]
        log_ratio = math.log2(max(ledger.gop_total, 1) / cfg.target_bits_per_gop)
        self._points.append((sum(qps) / len(qps), log_ratio))
        step = int(round_half_away(log_ratio / self._slope()))
        self.setpoint = int(_clamp(self.setpoint + step, cfg.qp_min, cfg.qp_max))

    def next_keyframe_qp(self, ledger: BitLedger, frame_index_in_gop: int, frames_in_gop: int) -> int:
        cfg = self.cfg
        if frame_index_in_gop == 0:
            if cfg.mode == "coupled" and ledger._gop_open:
                self._close_gop(ledger)
            # the GOP accumulators are about to reset; evaluate against an empty GOP
            return next_keyframe_qp(BitLedger(), cfg, 0, frames_in_gop, self.setpoint)
        return next_keyframe_qp(ledger, cfg, frame_index_in_gop, frames_in_gop, self.setpoint)

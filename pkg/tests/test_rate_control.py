import pytest

from evcodec.core_model import FrameType
from evcodec.errors import EvcError
from evcodec.rate_control import BitLedger, RateControl, RateControlConfig, next_keyframe_qp, record_bits


def coupled(**kw):
    return RateControlConfig(mode="coupled", **{"target_bits_per_gop": 8000, "base_qp": 28, **kw})


def ledger_with(bits):
    led = BitLedger()
    record_bits(led, FrameType.I, [bits], qp=28)
    return led


def test_constant_mode_returns_base():
    cfg = RateControlConfig(base_qp=31)
    assert next_keyframe_qp(ledger_with(10**6), cfg, 4, 16) == 31


def test_on_budget_gives_base():
    assert next_keyframe_qp(ledger_with(2000), coupled(), 4, 16) == 28


def test_fifty_percent_over_adds_three():
    # ideal at 4/16 is 2000; spent 6000 -> e = 0.5 -> +round(6 * 0.5)
    assert next_keyframe_qp(ledger_with(6000), coupled(), 4, 16) == 31


def test_large_underrun_clamps():
    assert next_keyframe_qp(BitLedger(), coupled(qp_min=25, k_p=100), 15, 16) == 25
    assert next_keyframe_qp(ledger_with(10**7), coupled(qp_max=40), 1, 16) == 40


def test_invalid_target():
    with pytest.raises(EvcError, match="invalid rate target"):
        RateControlConfig(mode="coupled", target_bits_per_gop=0)
    cfg = coupled()
    cfg.target_bits_per_gop = -5.0
    with pytest.raises(EvcError, match="invalid rate target"):
        next_keyframe_qp(BitLedger(), cfg, 0, 16)


def test_ledger_accumulators():
    led = BitLedger()
    record_bits(led, FrameType.I, [600, 400], qp=28)
    assert (led.bc_acc_key, led.bc_acc_inter) == (1000, 0)
    for _ in range(3):
        record_bits(led, FrameType.B, [144])
    assert led.bc_acc_inter == 432
    record_bits(led, FrameType.P, [100], qp=28)
    assert led.gop_total == 1532
    record_bits(led, FrameType.I, [10], qp=28)
    assert (led.bc_acc_key, led.bc_acc_inter) == (10, 0)
    assert led.gop_history[0] == {"key_bits": 1100, "inter_bits": 432, "qp_per_keyframe": [28, 28]}
    assert led.total_bits == 1542


def test_padding_counts():
    led = BitLedger()
    assert record_bits(led, FrameType.I, [5, 6], padding_bits=5, qp=4) == 16
    assert led.bc_current_cu == 6


def test_setpoint_moves_toward_target():
    cfg = coupled()
    rc = RateControl(cfg)
    led = BitLedger()
    rc.next_keyframe_qp(led, 0, 16)
    record_bits(led, FrameType.I, [4 * 8000], qp=28)  # 4x over budget
    assert rc.next_keyframe_qp(led, 0, 16) > 28
    rc2 = RateControl(cfg)
    led2 = BitLedger()
    rc2.next_keyframe_qp(led2, 0, 16)
    record_bits(led2, FrameType.I, [2000], qp=28)  # 4x under budget
    assert rc2.next_keyframe_qp(led2, 0, 16) < 28

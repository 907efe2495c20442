import pytest

from lockstepsim.faults import (
    Always,
    DropOutput,
    ExtraDelay,
    FaultEffects,
    FaultSpec,
    OnFrame,
    OutputBitFlip,
    StuckOutput,
    WeightBitFlip,
    WithProbability,
    apply_fault,
    flip_output_bits,
    flip_weight_bits,
    trigger_fires,
    validate_fault,
)
from lockstepsim.fixedpoint import FixedPointTensor
from lockstepsim.replica import gen_weights
from lockstepsim.rng import Rng


def test_output_bit_flip_xor_semantics():
    effects = FaultEffects()
    spec = FaultSpec(OutputBitFlip(element_index=0, bit=0))
    assert apply_fault(spec, effects, frame_id=0, rng=Rng(0)) is True
    out = flip_output_bits(FixedPointTensor((2,), (256, -128)), effects.output_flips)
    assert out.data == (257, -128)


def test_extra_delay_accumulates():
    effects = FaultEffects()
    apply_fault(FaultSpec(ExtraDelay(500)), effects, 0, Rng(0))
    apply_fault(FaultSpec(ExtraDelay(250)), effects, 0, Rng(0))
    assert effects.extra_delay_ns == 750


def test_drop_and_stuck_flags():
    effects = FaultEffects()
    apply_fault(FaultSpec(DropOutput()), effects, 0, Rng(0))
    apply_fault(FaultSpec(StuckOutput()), effects, 0, Rng(0))
    assert effects.drop and effects.stuck
    assert effects.any_applied


def test_probability_zero_never_fires():
    trig = WithProbability(0.0)
    rng = Rng(3)
    assert not any(trigger_fires(trig, f, rng) for f in range(1000))


def test_probability_one_always_fires():
    trig = WithProbability(1.0)
    rng = Rng(3)
    assert all(trigger_fires(trig, f, rng) for f in range(1000))


def test_on_frame_trigger():
    trig = OnFrame(7)
    rng = Rng(0)
    assert trigger_fires(trig, 7, rng)
    assert not trigger_fires(trig, 8, rng)


def test_untriggered_fault_not_applied():
    effects = FaultEffects()
    spec = FaultSpec(OutputBitFlip(0, 0), OnFrame(3))
    assert apply_fault(spec, effects, frame_id=2, rng=Rng(0)) is False
    assert not effects.any_applied


def test_weight_flip_changes_one_bit():
    ws = gen_weights(5, [3, 2])
    flipped = flip_weight_bits(ws, [(0, 1, 4)])
    assert flipped.digest() != ws.digest()
    orig = ws.layers[0].weights.data
    new = flipped.layers[0].weights.data
    diffs = [(i, a ^ b) for i, (a, b) in enumerate(zip(orig, new)) if a != b]
    assert len(diffs) == 1
    assert diffs[0][0] == 1
    assert (diffs[0][1] & 0xFFFF) == 1 << 4
    # bias untouched
    assert flipped.layers[0].bias == ws.layers[0].bias


def test_validate_fault_load_time_errors():
    arch = [4, 3, 2]
    ok = FaultSpec(WeightBitFlip(layer=1, element_index=5, bit=15), Always())
    assert validate_fault(ok, arch, 10) == []

    errs = validate_fault(FaultSpec(WeightBitFlip(2, 0, 0)), arch, 10, "f")
    assert any("f.kind.layer" in e for e in errs)
    errs = validate_fault(FaultSpec(WeightBitFlip(0, 12, 0)), arch, 10, "f")
    assert any("f.kind.element_index" in e for e in errs)
    errs = validate_fault(FaultSpec(OutputBitFlip(2, 0)), arch, 10, "f")
    assert any("f.kind.element_index" in e for e in errs)
    errs = validate_fault(FaultSpec(OutputBitFlip(0, 16)), arch, 10, "f")
    assert any("f.kind.bit" in e for e in errs)
    errs = validate_fault(FaultSpec(OutputBitFlip(0, 0), OnFrame(10)), arch, 10, "f")
    assert any("f.trigger.frame_id" in e for e in errs)
    errs = validate_fault(FaultSpec(OutputBitFlip(0, 0), WithProbability(1.5)), arch, 10, "f")
    assert any("f.trigger.p" in e for e in errs)


def test_probabilistic_trigger_rate_roughly_matches():
    trig = WithProbability(0.25)
    rng = Rng(99)
    fired = sum(trigger_fires(trig, f, rng) for f in range(20000))
    assert abs(fired / 20000 - 0.25) < 0.02

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lockstepsim.errors import ConfigError, DimensionError
from lockstepsim.fixedpoint import FixedPointTensor
from lockstepsim.replica import (
    EXECUTE,
    FETCH,
    LINEAR,
    LOAD,
    RELU,
    STORE,
    WEIGHT_CLAMP,
    EngineConfig,
    LayerSpec,
    WeightSet,
    gen_frame,
    gen_weights,
    infer,
    layer_costs,
)
from oracles import infer_reference

ENGINE = EngineConfig()


def single_layer(weight_rows, bias, activation=LINEAR):
    out_w = len(weight_rows)
    in_w = len(weight_rows[0])
    flat = tuple(v for row in weight_rows for v in row)
    return WeightSet(
        (
            LayerSpec(
                weights=FixedPointTensor((out_w, in_w), flat),
                bias=FixedPointTensor((out_w,), tuple(bias)),
                activation=activation,
            ),
        )
    )


def test_gen_weights_deterministic():
    a = gen_weights(11, [3, 5, 2])
    b = gen_weights(11, [3, 5, 2])
    assert a == b
    assert a.digest() == b.digest()


def test_gen_weights_seeds_differ():
    assert gen_weights(1, [2, 2]).digest() != gen_weights(2, [2, 2]).digest()


def test_gen_weights_validates_arch():
    with pytest.raises(ConfigError):
        gen_weights(1, [2])
    with pytest.raises(ConfigError):
        gen_weights(1, [])
    with pytest.raises(ConfigError):
        gen_weights(1, [2, 0])
    with pytest.raises(ConfigError):
        gen_weights(1, [2, 2000])


def test_gen_weights_range_and_activations():
    ws = gen_weights(3, [4, 6, 5, 2])
    for layer in ws.layers:
        for v in layer.weights.data + layer.bias.data:
            assert -WEIGHT_CLAMP <= v <= WEIGHT_CLAMP
    assert [l.activation for l in ws.layers] == [RELU, RELU, LINEAR]


def test_gen_frame_deterministic_and_bounded():
    a = gen_frame(5, 3, (4,))
    b = gen_frame(5, 3, (4,))
    assert a == b
    assert gen_frame(5, 4, (4,)) != a
    assert all(-256 <= v <= 256 for v in a.data)


def test_infer_identity():
    ws = single_layer([[256, 0], [0, 256]], [0, 0])
    out, _, _ = infer(ws, FixedPointTensor((2,), (256, -128)), ENGINE)
    assert out.data == (256, -128)


def test_infer_half_sum_relu():
    # 0.5*1.0 + 0.5*1.0 == 1.0 exactly after the rounding shift
    ws = single_layer([[128, 128]], [0], activation=RELU)
    out, _, _ = infer(ws, FixedPointTensor((2,), (256, 256)), ENGINE)
    assert out.data == (256,)


def test_round_half_to_even():
    # acc = 128 -> 0.5 rounds to even 0; acc = 384 -> 1.5 rounds to even 2
    ws = single_layer([[1]], [0])
    out, _, _ = infer(ws, FixedPointTensor((1,), (128,)), ENGINE)
    assert out.data == (0,)
    ws = single_layer([[3]], [0])
    out, _, _ = infer(ws, FixedPointTensor((1,), (128,)), ENGINE)
    assert out.data == (2,)
    # negative side: acc = -128 -> -0.5 rounds to 0; acc = -384 -> -1.5 to -2
    ws = single_layer([[-1]], [0])
    out, _, _ = infer(ws, FixedPointTensor((1,), (128,)), ENGINE)
    assert out.data == (0,)
    ws = single_layer([[-3]], [0])
    out, _, _ = infer(ws, FixedPointTensor((1,), (128,)), ENGINE)
    assert out.data == (-2,)


def test_relu_clamps_negatives():
    ws = single_layer([[-256]], [0], activation=RELU)
    out, _, _ = infer(ws, FixedPointTensor((1,), (256,)), ENGINE)
    assert out.data == (0,)


def test_saturation_no_wrap():
    ws = single_layer([[32767, 32767]], [32767])
    out, _, _ = infer(ws, FixedPointTensor((2,), (32767, 32767)), ENGINE)
    assert out.data == (32767,)
    ws = single_layer([[-32768, -32768]], [-32768])
    out, _, _ = infer(ws, FixedPointTensor((2,), (32767, 32767)), ENGINE)
    assert out.data == (-32768,)


def test_accumulator_bound_for_supported_sizes():
    # per-MAC product bound 2**30, bias term bound 2**23, max width 1024
    assert 1024 * 2**30 + 2**23 < 2**63


def test_infer_shape_mismatch():
    ws = single_layer([[256, 0]], [0])
    with pytest.raises(DimensionError):
        infer(ws, FixedPointTensor((3,), (1, 2, 3)), ENGINE)


def test_infer_bit_identical_across_calls():
    ws = gen_weights(21, [6, 5, 3])
    frame = gen_frame(21, 0, (6,))
    r1 = infer(ws, frame, ENGINE)
    r2 = infer(ws, frame, ENGINE)
    assert r1 == r2


def test_cycle_accounting_and_trace_layout():
    engine = EngineConfig(cycles_per_mac=2, cycles_per_load=3, cycles_per_store=5,
                          pipeline_startup_cycles=7)
    ws = single_layer([[256, 0]], [0])
    macs, loads, stores = layer_costs(ws.layers[0])
    assert (macs, loads, stores) == (2, 2 + 2 + 1, 1)
    out, cycles, trace = infer(ws, FixedPointTensor((2,), (10, 20)), engine)
    assert cycles == 7 + macs * 2 + loads * 3 + stores * 5
    assert [e.kind for e in trace] == [FETCH, LOAD, EXECUTE, STORE]
    assert trace[0].cycle == 7
    assert trace[1].cycle == 7
    assert trace[2].cycle == 7 + loads * 3
    assert trace[3].cycle == 7 + loads * 3 + macs * 2
    # execute and store carry the produced tensor's digest
    assert trace[2].payload_digest == trace[3].payload_digest


def test_trace_cycles_non_decreasing_multi_layer():
    ws = gen_weights(4, [3, 4, 2])
    out, cycles, trace = infer(ws, gen_frame(4, 0, (3,)), ENGINE)
    assert [e.kind for e in trace] == [FETCH, LOAD, EXECUTE, STORE] * 2
    assert all(a.cycle <= b.cycle for a, b in zip(trace, trace[1:]))
    assert trace[-1].cycle <= cycles


def test_weight_set_validation():
    good = gen_weights(1, [2, 3, 2])
    with pytest.raises(DimensionError):
        WeightSet((good.layers[1], good.layers[1]))  # 2-wide feeding 3-wide
    with pytest.raises(DimensionError):
        WeightSet(())


@given(st.data())
@settings(max_examples=60, deadline=None)
def test_infer_matches_bigint_reference(data):
    in_w = data.draw(st.integers(1, 5))
    hidden = data.draw(st.integers(1, 5))
    out_w = data.draw(st.integers(1, 4))
    elems = st.integers(-32768, 32767)
    layers = []
    for (a, b, act) in ((in_w, hidden, RELU), (hidden, out_w, LINEAR)):
        w = data.draw(st.lists(elems, min_size=a * b, max_size=a * b))
        bias = data.draw(st.lists(elems, min_size=b, max_size=b))
        layers.append(
            LayerSpec(
                weights=FixedPointTensor((b, a), tuple(w)),
                bias=FixedPointTensor((b,), tuple(bias)),
                activation=act,
            )
        )
    ws = WeightSet(tuple(layers))
    x = data.draw(st.lists(elems, min_size=in_w, max_size=in_w))
    tensor = FixedPointTensor((in_w,), tuple(x))
    out, _, _ = infer(ws, tensor, ENGINE)
    assert list(out.data) == infer_reference(ws, tensor)

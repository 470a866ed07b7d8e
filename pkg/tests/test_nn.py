import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from smartpam.errors import ChannelMismatch, FeatureCountMismatch, InvalidModel, WindowTooShort
from smartpam.fixtures import gen_fixture
from smartpam.nn import (
    Activation,
    ConvLayerSpec,
    DenseSpec,
    ModelSpec,
    conv1d_forward,
    dense_forward,
    layer_lengths,
    model_forward,
    model_size_bytes,
    output_length,
    param_count,
    softmax,
)

from oracles import brute_output_length, naive_forward, random_model


def identity_layer():
    return ConvLayerSpec(1, 1, 1, weights=[[[1.0]]], activation=Activation.NONE)


class TestOutputLength:
    def test_identity(self):
        assert output_length(10, identity_layer()) == 10

    def test_dilated(self):
        layer = ConvLayerSpec(1, 1, 3, stride=1, dilation=3)
        assert brute_output_length(1024, 3, 3, 1) == 1018
        assert output_length(1024, layer) == 1018

    def test_small_stack_chain(self):
        model = gen_fixture("small", weight_mode="zero")
        assert layer_lengths(1024, model.conv_layers) == [1024, 1018, 338, 332, 109, 103, 33]
        n = 1024
        for layer in model.conv_layers:
            n = brute_output_length(n, layer.kernel, layer.dilation, layer.stride)
        assert n == 33

    def test_large_stack_final_length(self):
        assert gen_fixture("large", weight_mode="zero").final_length == 97

    def test_too_short(self):
        with pytest.raises(WindowTooShort, match="window too short for layer"):
            output_length(6, ConvLayerSpec(1, 1, 3, dilation=3))

    @given(
        n=st.integers(1, 400),
        k=st.integers(1, 6),
        d=st.integers(1, 6),
        s=st.integers(1, 5),
    )
    def test_matches_enumeration(self, n, k, d, s):
        layer = ConvLayerSpec(1, 1, k, stride=s, dilation=d)
        if n < layer.extent:
            with pytest.raises(WindowTooShort):
                output_length(n, layer)
        else:
            assert output_length(n, layer) == brute_output_length(n, k, d, s)


class TestConv:
    def test_zero_input_gives_bias(self):
        layer = ConvLayerSpec(2, 3, 3, stride=2, dilation=2, weights=np.ones((3, 2, 3)),
                              bias=[0.5, -1.0, 2.0], activation=Activation.NONE)
        out = conv1d_forward(np.zeros((2, 20)), layer)
        assert out.shape == (3, output_length(20, layer))
        for c, b in enumerate([0.5, -1.0, 2.0]):
            assert np.all(out[c] == np.float32(b))

    def test_difference_filter(self):
        layer = ConvLayerSpec(1, 1, 3, weights=[[[1, 0, -1]]], activation=Activation.NONE)
        np.testing.assert_array_equal(conv1d_forward([1, 2, 3, 4, 5], layer), [[-2, -2, -2]])

    def test_identity(self):
        x = np.random.default_rng(1).normal(size=(1, 17)).astype(np.float32)
        np.testing.assert_array_equal(conv1d_forward(x, identity_layer()), x)

    def test_relu(self):
        layer = ConvLayerSpec(1, 1, 1, weights=[[[1.0]]], activation=Activation.RELU)
        np.testing.assert_array_equal(conv1d_forward([-1, 2, -3], layer), [[0, 2, 0]])

    def test_channel_mismatch(self):
        with pytest.raises(ChannelMismatch, match="channel mismatch"):
            conv1d_forward(np.zeros((2, 10)), ConvLayerSpec(1, 1, 3))

    def test_weight_shape_checked(self):
        with pytest.raises(InvalidModel):
            ConvLayerSpec(1, 2, 3, weights=np.zeros(5))


class TestDense:
    def test_bias_only(self):
        d = DenseSpec(3, 4, bias=[1, 2, 3, 4])
        np.testing.assert_array_equal(dense_forward([9, 9, 9], d), [1, 2, 3, 4])

    def test_identity(self):
        d = DenseSpec(3, 3, weights=np.eye(3))
        np.testing.assert_array_equal(dense_forward([1.5, -2, 7], d), [1.5, -2, 7])

    def test_hand_computed(self):
        d = DenseSpec(2, 2, weights=[[1, 2], [3, 4]], bias=[0, 1])
        np.testing.assert_array_equal(dense_forward([1, 1], d), [3, 8])

    def test_length_mismatch(self):
        with pytest.raises(FeatureCountMismatch, match="feature-count mismatch"):
            dense_forward([1, 2, 3], DenseSpec(2, 2))


class TestSoftmax:
    def test_uniform(self):
        np.testing.assert_allclose(softmax([0, 0, 0, 0]), [0.25] * 4)

    @pytest.mark.parametrize("c", [-1e4, -3.5, 0.0, 12.0, 1e4])
    def test_shift_invariance(self, c):
        np.testing.assert_allclose(softmax([c] * 4), [0.25] * 4)

    def test_peak(self):
        e2 = math.exp(2.0)
        expected = [e2 / (e2 + 3), 1 / (e2 + 3), 1 / (e2 + 3), 1 / (e2 + 3)]
        np.testing.assert_allclose(softmax([2, 0, 0, 0]), expected, rtol=0, atol=1e-12)
        np.testing.assert_allclose(expected, [0.7113, 0.0962, 0.0962, 0.0962], atol=1e-4)

    def test_overflow_safe(self):
        p = softmax([1000.0, 999.0])
        assert np.all(np.isfinite(p))

    @given(st.lists(st.floats(-50, 50, allow_nan=False), min_size=1, max_size=32))
    def test_properties(self, v):
        p = softmax(v)
        assert np.all(p > 0) and np.all(p <= 1)
        assert abs(p.sum() - 1.0) <= 1e-6
        order = sorted(v, reverse=True)
        if len(v) == 1 or order[0] - order[1] > 1e-9:
            assert int(np.argmax(p)) == int(np.argmax(v))


class TestModelForward:
    def test_zero_model_is_uniform(self):
        model = gen_fixture("small", weight_mode="zero")
        probs, label = model_forward(np.random.default_rng(0).normal(size=1024), model)
        np.testing.assert_allclose(probs, [0.25] * 4)
        assert label == "male"

    def test_deterministic(self):
        model = gen_fixture("small", seed=3)
        x = np.random.default_rng(3).normal(size=1024)
        a, la = model_forward(x, model)
        b, lb = model_forward(x, model)
        assert a.tobytes() == b.tobytes() and la == lb

    def test_matches_naive_oracle_on_small_fixture(self):
        model = gen_fixture("small", seed=11)
        x = np.random.default_rng(11).normal(size=1024)
        probs, label = model_forward(x, model)
        ref, ref_label = naive_forward(x, model)
        np.testing.assert_allclose(probs, ref, rtol=0, atol=1e-6)
        assert label == ref_label

    def test_oracle_equivalence_random_models(self):
        rng = np.random.default_rng(2024)
        for _ in range(100):
            while True:
                model = random_model(rng, int(rng.integers(1, 5)), int(rng.integers(1, 9)),
                                     max_channels=8, max_kernel=4, max_dilation=3, max_stride=2)
                if model.window_samples <= 64:
                    break
            x = rng.normal(size=model.window_samples)
            probs, label = model_forward(x, model)
            ref, ref_label = naive_forward(x, model)
            np.testing.assert_allclose(probs, ref, rtol=0, atol=1e-6)
            assert label == ref_label
            lengths = layer_lengths(model.window_samples, model.conv_layers)
            act = np.asarray(x, dtype=np.float32)[np.newaxis]
            for layer, n in zip(model.conv_layers, lengths[1:]):
                act = conv1d_forward(act, layer)
                assert act.shape[1] == n

    def test_wrong_window_length(self):
        with pytest.raises(WindowTooShort):
            model_forward(np.zeros(1000), gen_fixture("small", weight_mode="zero"))

    def test_tie_breaks_to_lowest_index(self):
        model = gen_fixture("small", weight_mode="zero")
        model.dense.bias = np.array([0, 1, 1, 0], dtype=np.float32)
        assert model_forward(np.zeros(1024), model)[1] == "female"


class TestModelSpec:
    def test_channel_chain_checked(self):
        with pytest.raises(InvalidModel):
            ModelSpec([ConvLayerSpec(1, 2, 1), ConvLayerSpec(3, 1, 1)], DenseSpec(10, 4), 10)

    def test_dense_features_checked(self):
        with pytest.raises(InvalidModel):
            ModelSpec([ConvLayerSpec(1, 2, 1)], DenseSpec(10, 4), 10)

    def test_window_too_small(self):
        with pytest.raises(WindowTooShort):
            ModelSpec([ConvLayerSpec(1, 1, 5)], DenseSpec(1, 4), 4)

    def test_reassigned_parameters_stay_float32(self):
        layer = ConvLayerSpec(1, 2, 3)
        layer.weights = np.ones(6)
        layer.bias = [0.5, 0.25]
        assert layer.weights.dtype == np.float32 and layer.weights.shape == (2, 1, 3)
        assert conv1d_forward(np.ones(5), layer).dtype == np.float32
        dense = DenseSpec(3, 2)
        dense.weights = np.zeros((2, 3), dtype=np.float64)
        assert dense.weights.dtype == np.float32

    def test_reassigned_parameters_shape_checked(self):
        layer = ConvLayerSpec(1, 2, 3)
        with pytest.raises(InvalidModel):
            layer.weights = np.ones(7)


class TestSizes:
    def test_small(self):
        counts = param_count(gen_fixture("small", weight_mode="zero"))
        assert (counts.conv, counts.dense, counts.total) == (276, 532, 808)
        assert model_size_bytes(gen_fixture("small", weight_mode="zero")) == 3232

    def test_large(self):
        model = gen_fixture("large", weight_mode="zero")
        assert param_count(model).total == 14900
        assert model_size_bytes(model) == 59600

    def test_single_unit_layer(self):
        assert identity_layer().param_count == 2

    def test_empty_stack(self):
        model = ModelSpec([], DenseSpec(1, 1), 1, class_labels=("x",))
        assert model_size_bytes(model) == 8

    def test_table_ranges(self):
        assert 3000 <= model_size_bytes(gen_fixture("small")) <= 3600
        assert 56000 <= model_size_bytes(gen_fixture("large")) <= 68000

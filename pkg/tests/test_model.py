import math

import numpy as np
import pytest

from labelgraph.embeddings import LabelEmbeddings, random_label_embeddings
from labelgraph.errors import ValidationError
from labelgraph.losses import LossSpec
from labelgraph.model import (
    ModelConfig,
    attention_weights,
    decoder_forward,
    encode,
    forward_backward,
    init_model_params,
    message_pass,
    predict_probabilities,
)


def small_config(**overrides):
    base = dict(
        label_dim=8,
        num_layers=2,
        num_heads=2,
        encoder_hidden=16,
        feedforward_hidden=16,
    )
    base.update(overrides)
    return ModelConfig(**base)


def make_model(num_labels=6, num_features=7, seed=1, **overrides):
    rng = np.random.default_rng(seed)
    config = small_config(**overrides)
    emb = random_label_embeddings(num_labels, config.label_dim, seed)
    emb.current += 0.2 * rng.standard_normal(emb.current.shape)
    params = init_model_params(config, num_features, emb, rng)
    return config, emb, params


class TestConfig:
    def test_head_divisibility(self):
        with pytest.raises(ValidationError, match="divisible"):
            ModelConfig(label_dim=10, num_heads=3)

    def test_sizes_positive(self):
        with pytest.raises(ValidationError):
            ModelConfig(num_layers=0)


class TestEncode:
    def test_zero_input_zero_bias_gives_zero(self):
        config, emb, params = make_model()
        params.arrays["encoder/b1"][:] = 0
        params.arrays["encoder/b2"][:] = 0
        z = encode(np.zeros(7), params)
        np.testing.assert_array_equal(z, np.zeros(8))

    def test_deterministic(self):
        config, emb, params = make_model()
        x = np.random.default_rng(0).random(7)
        np.testing.assert_array_equal(encode(x, params), encode(x, params))

    def test_first_layer_preactivation_is_linear(self):
        config, emb, params = make_model(seed=2)
        rng = np.random.default_rng(3)
        # positive weights and inputs keep every relu active, so doubling
        # the input doubles the hidden layer exactly
        params.arrays["encoder/w1"] = np.abs(params.arrays["encoder/w1"])
        params.arrays["encoder/b1"][:] = 0
        params.arrays["encoder/b2"][:] = 0
        x = rng.random(7)
        w2 = params.arrays["encoder/w2"]
        z1 = encode(x, params)
        z2 = encode(2 * x, params)
        np.testing.assert_allclose(z2 + params.arrays["encoder/b2"],
                                   2 * z1, rtol=1e-12)

    def test_sparse_row_accepted(self, tiny_dataset):
        config, emb, params = make_model(num_features=4)
        row = tiny_dataset.features[0]
        z = encode(row, params)
        assert z.shape == (8,)
        np.testing.assert_array_equal(z, encode(row.toarray().ravel(), params))


class TestAttentionWeights:
    def test_identical_nodes_give_uniform_rows(self):
        nodes = np.tile([1.0, 2.0, 3.0, 4.0], (5, 1))
        rng = np.random.default_rng(0)
        alpha = attention_weights(
            nodes, rng.standard_normal((4, 4)), rng.standard_normal((4, 4)), 2
        )
        np.testing.assert_allclose(alpha, 1.0 / 5.0, atol=1e-12)

    def test_rows_stochastic(self):
        rng = np.random.default_rng(1)
        alpha = attention_weights(
            rng.standard_normal((6, 8)),
            rng.standard_normal((8, 8)),
            rng.standard_normal((8, 8)),
            2,
        )
        assert alpha.shape == (2, 6, 6)
        np.testing.assert_allclose(alpha.sum(axis=-1), 1.0, atol=1e-9)
        assert alpha.min() >= 0.0

    def test_direct_softmax_value(self):
        # scores arranged to be [[0, ln 3], [0, 0]] for the single head
        query_map = np.eye(2)
        key_map = np.array([[0.0, 0.0], [math.sqrt(2) * math.log(3.0), 0.0]])
        alpha = attention_weights(np.eye(2), query_map, key_map, 1)
        np.testing.assert_allclose(alpha[0, 0], [0.25, 0.75], rtol=1e-12)
        np.testing.assert_allclose(alpha[0, 1], [0.5, 0.5], rtol=1e-12)

    def test_row_shift_invariance(self):
        # adding a constant to every raw score in a row leaves it unchanged;
        # realized by shifting the query projection of one node
        rng = np.random.default_rng(2)
        nodes = rng.standard_normal((4, 4))
        wq = rng.standard_normal((4, 4))
        wu = rng.standard_normal((4, 4))
        alpha = attention_weights(nodes, wq, wu, 1)
        scores = (nodes @ wq) @ (nodes @ wu).T / 2.0
        shifted = scores + rng.standard_normal((4, 1))  # per-row constant
        e = np.exp(shifted - shifted.max(axis=-1, keepdims=True))
        np.testing.assert_allclose(e / e.sum(-1, keepdims=True), alpha[0], rtol=1e-9)


class TestMessagePass:
    def test_zero_value_map_is_pure_residual(self):
        rng = np.random.default_rng(3)
        nodes = rng.standard_normal((5, 8))
        alpha = attention_weights(
            nodes, rng.standard_normal((8, 8)), rng.standard_normal((8, 8)), 2
        )
        out = message_pass(nodes, alpha, np.zeros((8, 8)), rng.standard_normal((8, 8)), 2)
        np.testing.assert_array_equal(out, nodes)

    def test_single_node(self):
        rng = np.random.default_rng(4)
        v = rng.standard_normal((1, 4))
        value_map = rng.standard_normal((4, 4))
        alpha = np.ones((1, 1, 1))
        out = message_pass(v, alpha, value_map, np.eye(4), 1)
        np.testing.assert_allclose(out, v + v @ value_map, rtol=1e-12)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(5)
        nodes = rng.standard_normal((6, 8))
        wq, wu, wv, mix = (rng.standard_normal((8, 8)) for _ in range(4))
        alpha = attention_weights(nodes, wq, wu, 2)
        out = message_pass(nodes, alpha, wv, mix, 2)
        perm = rng.permutation(6)
        alpha_p = attention_weights(nodes[perm], wq, wu, 2)
        out_p = message_pass(nodes[perm], alpha_p, wv, mix, 2)
        np.testing.assert_allclose(out_p, out[perm], rtol=1e-9, atol=1e-12)


class TestDecoderForward:
    def test_probabilities_strictly_inside_unit_interval(self):
        config, emb, params = make_model()
        z = np.random.default_rng(0).standard_normal(8)
        probs = decoder_forward(z, emb, params, config)
        assert probs.shape == (6,)
        assert np.all(probs > 0.0) and np.all(probs < 1.0)

    def test_zero_readout_gives_half(self):
        config, emb, params = make_model()
        params.arrays["readout/weight"][:] = 0.0
        probs = decoder_forward(np.zeros(8), emb, params, config)
        np.testing.assert_array_equal(probs, np.full(6, 0.5))

    def test_label_permutation_is_bit_exact(self):
        config, emb, params = make_model()
        rng = np.random.default_rng(7)
        z = rng.standard_normal(8)
        base = decoder_forward(z, emb, params, config)
        for _ in range(20):
            perm = rng.permutation(6)
            emb_p = LabelEmbeddings(emb.current[perm].copy(), emb.anchors[perm].copy())
            params_p = init_model_params(config, 7, emb_p, 0)
            for name, arr in params.arrays.items():
                params_p.arrays[name] = arr.copy()
            params_p.arrays["readout/weight"] = params.arrays["readout/weight"][perm].copy()
            permuted = decoder_forward(z, emb_p, params_p, config)
            assert np.array_equal(permuted, base[perm])

    def test_sublayer_count_is_twice_depth(self):
        for layers in (1, 2, 3):
            config, emb, params = make_model(num_layers=layers)
            counters = {}
            decoder_forward(np.zeros(8), emb, params, config, counters=counters)
            total = counters["attention_sublayers"] + counters["feedforward_sublayers"]
            assert total == 2 * layers

    def test_attention_rows_sum_to_one_at_every_layer(self):
        config, emb, params = make_model(num_layers=3)
        counters = {}
        decoder_forward(np.ones(8), emb, params, config, counters=counters)
        assert len(counters["attention_weights"]) == 3
        for alpha in counters["attention_weights"]:
            np.testing.assert_allclose(alpha.sum(axis=-1), 1.0, atol=1e-9)

    def test_z_every_block_flag_changes_output(self):
        config, emb, params = make_model(num_layers=2)
        restricted = small_config(num_layers=2, z_every_block=False)
        params_r = init_model_params(restricted, 7, emb, 1)
        z = np.full(8, 0.7)
        a = decoder_forward(z, emb, params, config)
        b = decoder_forward(z, emb, params_r, restricted)
        assert a.shape == b.shape
        assert "block1/z_map" in params.arrays
        assert "block1/z_map" not in params_r.arrays


class TestForwardBackward:
    def test_gradients_cover_every_trainable_array(self):
        config, emb, params = make_model()
        rng = np.random.default_rng(8)
        x = rng.standard_normal((3, 7))
        y = (rng.random((3, 6)) < 0.4).astype(float)
        spec = LossSpec(gamma_pos=1, gamma_neg=2, shift_m=0.05, context_weight=0.1)
        loss, grads = forward_backward(x, y, emb, params, config, spec)
        assert math.isfinite(loss)
        assert set(grads) == {name for name, _ in params.trainable()}
        for name, arr in params.trainable():
            assert grads[name].shape == arr.shape

    def test_deterministic(self):
        config, emb, params = make_model()
        rng = np.random.default_rng(9)
        x = rng.standard_normal((2, 7))
        y = (rng.random((2, 6)) < 0.4).astype(float)
        spec = LossSpec(context_weight=0.1)
        l1, g1 = forward_backward(x, y, emb, params, config, spec)
        l2, g2 = forward_backward(x, y, emb, params, config, spec)
        assert l1 == l2
        assert all(np.array_equal(g1[k], g2[k]) for k in g1)

    def test_context_weight_scaling_of_embedding_gradient(self):
        config, emb, params = make_model()
        rng = np.random.default_rng(10)
        x = rng.standard_normal((2, 7))
        y = (rng.random((2, 6)) < 0.4).astype(float)

        def emb_grad(weight):
            spec = LossSpec(gamma_pos=1, gamma_neg=2, shift_m=0.05,
                            context_weight=weight)
            return forward_backward(x, y, emb, params, config, spec)[1][
                "label_embeddings"
            ]

        g0, g1, g2 = emb_grad(0.0), emb_grad(0.1), emb_grad(0.2)
        np.testing.assert_allclose(g2 - g0, 2 * (g1 - g0), rtol=1e-9, atol=1e-12)
        diff = emb.current - emb.anchors
        np.testing.assert_allclose(g1 - g0, 0.1 * 2.0 * diff, rtol=1e-9, atol=1e-12)

    def test_empty_batch_rejected(self):
        config, emb, params = make_model()
        with pytest.raises(ValidationError, match="non-empty"):
            forward_backward(
                np.zeros((0, 7)), np.zeros((0, 6)), emb, params, config, LossSpec()
            )

    def test_batch_shape_mismatch(self):
        config, emb, params = make_model()
        with pytest.raises(ValidationError, match="label batch"):
            forward_backward(
                np.zeros((2, 7)), np.zeros((2, 5)), emb, params, config, LossSpec()
            )


def test_predict_probabilities_matches_single_sample_forward():
    config, emb, params = make_model()
    rng = np.random.default_rng(11)
    x = rng.standard_normal((5, 7))
    batched = predict_probabilities(x, emb, params, config, batch_size=2)
    for i in range(5):
        single = decoder_forward(encode(x[i], params), emb, params, config)
        np.testing.assert_allclose(batched[i], single, rtol=1e-12, atol=1e-15)

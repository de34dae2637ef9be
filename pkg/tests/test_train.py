import numpy as np
import pytest

from conftest import make_structured_dataset
from labelgraph.embeddings import random_label_embeddings
from labelgraph.errors import NumericalError, ValidationError
from labelgraph.losses import LossSpec
from labelgraph.metrics import binarize, evaluate_predictions
from labelgraph.model import ModelConfig, init_model_params, predict_probabilities
from labelgraph.train import (
    AdamState,
    TrainConfig,
    adam_step,
    grad_check,
    train,
    write_history_csv,
)


def tiny_model(seed=0):
    config = ModelConfig(
        label_dim=8, num_layers=1, num_heads=2, encoder_hidden=8,
        feedforward_hidden=8,
    )
    emb = random_label_embeddings(3, 8, seed)
    params = init_model_params(config, 5, emb, seed)
    return config, params


def zero_grads(params):
    return {name: np.zeros_like(arr) for name, arr in params.trainable()}


class TestAdamStep:
    def test_zero_gradients_no_decay_leave_params_unchanged(self):
        _, params = tiny_model()
        before = {k: v.copy() for k, v in params.trainable()}
        config = TrainConfig(weight_decay=0.0)
        adam_step(params, zero_grads(params), AdamState(params), config)
        for name, arr in params.trainable():
            np.testing.assert_array_equal(arr, before[name])

    def test_first_step_magnitude_is_learning_rate(self):
        _, params = tiny_model()
        config = TrainConfig(learning_rate=1e-3, weight_decay=0.0)
        grads = zero_grads(params)
        grads["readout/weight"] += 0.37  # any nonzero constant gradient
        before = params.arrays["readout/weight"].copy()
        adam_step(params, grads, AdamState(params), config)
        step = before - params.arrays["readout/weight"]
        # after bias correction the first update is lr * g / (|g| + eps')
        np.testing.assert_allclose(step, 1e-3, rtol=1e-4)

    def test_weight_decay_pulls_toward_zero(self):
        _, params = tiny_model()
        config = TrainConfig(weight_decay=0.1, learning_rate=1e-3)
        before = params.arrays["readout/weight"].copy()
        adam_step(params, zero_grads(params), AdamState(params), config)
        after = params.arrays["readout/weight"]
        moved = np.abs(after) < np.abs(before)
        assert moved[before != 0].all()

    def test_decay_skips_norms_and_embeddings(self):
        _, params = tiny_model()
        config = TrainConfig(weight_decay=0.1)
        gain_before = params.arrays["block0/attn_norm_gain"].copy()
        emb_before = params.emb.current.copy()
        adam_step(params, zero_grads(params), AdamState(params), config)
        np.testing.assert_array_equal(params.arrays["block0/attn_norm_gain"], gain_before)
        np.testing.assert_array_equal(params.emb.current, emb_before)

    def test_deterministic_across_runs(self):
        runs = []
        for _ in range(2):
            _, params = tiny_model(seed=5)
            state = AdamState(params)
            config = TrainConfig(learning_rate=1e-2)
            rng = np.random.default_rng(0)
            for _ in range(5):
                grads = {
                    name: rng.standard_normal(arr.shape)
                    for name, arr in params.trainable()
                }
                adam_step(params, grads, state, config)
            runs.append({k: v.copy() for k, v in params.trainable()})
        for name in runs[0]:
            np.testing.assert_array_equal(runs[0][name], runs[1][name])

    def test_nonfinite_gradient_is_error(self):
        _, params = tiny_model()
        grads = zero_grads(params)
        grads["encoder/w1"][0, 0] = np.nan
        with pytest.raises(NumericalError, match="encoder/w1"):
            adam_step(params, grads, AdamState(params), TrainConfig())


def quick_train_config(**overrides):
    base = dict(
        epochs=5,
        batch_size=16,
        learning_rate=5e-3,
        weight_decay=0.0,
        gamma_pos=0.0,
        gamma_neg=0.0,
        shift_m=0.0,
        context_weight=0.0,
        seed=0,
    )
    base.update(overrides)
    return TrainConfig(**base)


SMALL_MODEL = dict(
    label_dim=8, num_layers=1, num_heads=2, encoder_hidden=16, feedforward_hidden=16
)


class TestTrainLoop:
    def test_loss_decreases_on_learnable_data(self):
        ds = make_structured_dataset(50, 5, 12, seed=0)
        emb = random_label_embeddings(5, 8, 0)
        config = ModelConfig(**SMALL_MODEL)
        _, history = train(ds, None, config, quick_train_config(epochs=20), emb)
        losses = [row["train_loss"] for row in history]
        assert np.mean(losses[-5:]) < np.mean(losses[:5])

    def test_bit_reproducible(self):
        ds = make_structured_dataset(30, 4, 10, seed=1)
        runs = []
        for _ in range(2):
            emb = random_label_embeddings(4, 8, 3)
            params, _ = train(
                ds, None, ModelConfig(**SMALL_MODEL), quick_train_config(epochs=3), emb
            )
            runs.append(params)
        for name, arr in runs[0].trainable():
            np.testing.assert_array_equal(arr, dict(runs[1].trainable())[name])

    def test_large_context_weight_keeps_embeddings_near_anchors(self):
        ds = make_structured_dataset(40, 4, 10, seed=2)
        config = ModelConfig(**SMALL_MODEL)
        distances = {}
        for weight in (0.0, 1e3):
            emb = random_label_embeddings(4, 8, 5)
            params, _ = train(
                ds, None, config,
                quick_train_config(epochs=8, context_weight=weight), emb,
            )
            distances[weight] = params.emb.anchor_distance()
        assert distances[1e3] < distances[0.0]

    def test_no_validation_returns_final_epoch_params(self):
        ds = make_structured_dataset(40, 4, 10, seed=3)
        held = make_structured_dataset(20, 4, 10, seed=3)
        config = ModelConfig(**SMALL_MODEL)
        tcfg = quick_train_config(epochs=4)
        params_a, _ = train(ds, None, config, tcfg, random_label_embeddings(4, 8, 0))
        _, history_b = train(ds, held, config, tcfg, random_label_embeddings(4, 8, 0))
        probs = predict_probabilities(held.features, params_a.emb, params_a, config)
        report = evaluate_predictions(held.labels, binarize(probs, 0.5))
        assert report.ebf1 == pytest.approx(history_b[-1]["val_ebF1"], abs=1e-12)

    def test_best_epoch_selection(self):
        ds = make_structured_dataset(60, 4, 10, seed=4)
        val = make_structured_dataset(30, 4, 10, seed=4)
        config = ModelConfig(**SMALL_MODEL)
        tcfg = quick_train_config(epochs=6, select_on="maF1")
        params, history = train(ds, val, config, tcfg, random_label_embeddings(4, 8, 1))
        best = max(row["val_maF1"] for row in history)
        probs = predict_probabilities(val.features, params.emb, params, config)
        report = evaluate_predictions(val.labels, binarize(probs, 0.5))
        assert report.maf1 == pytest.approx(best, abs=1e-12)

    def test_mismatched_val_set_rejected(self):
        ds = make_structured_dataset(20, 4, 10, seed=5)
        bad_val = make_structured_dataset(10, 5, 10, seed=5)
        with pytest.raises(ValidationError, match="share L and S"):
            train(ds, bad_val, ModelConfig(**SMALL_MODEL), quick_train_config(),
                  random_label_embeddings(4, 8, 0))

    def test_caller_embeddings_untouched(self):
        ds = make_structured_dataset(20, 4, 10, seed=6)
        emb = random_label_embeddings(4, 8, 0)
        before = emb.current.copy()
        train(ds, None, ModelConfig(**SMALL_MODEL), quick_train_config(epochs=2), emb)
        np.testing.assert_array_equal(emb.current, before)

    def test_history_csv(self, tmp_path):
        ds = make_structured_dataset(20, 4, 10, seed=7)
        _, history = train(ds, None, ModelConfig(**SMALL_MODEL),
                           quick_train_config(epochs=2),
                           random_label_embeddings(4, 8, 0))
        path = tmp_path / "history.csv"
        write_history_csv(history, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "epoch,train_loss,val_ebF1,val_miF1,val_maF1"
        assert len(lines) == 3


class TestGradCheck:
    def test_small_config_passes(self):
        config = ModelConfig(label_dim=8, num_layers=2, num_heads=2,
                             encoder_hidden=16, feedforward_hidden=16)
        spec = LossSpec(gamma_pos=1, gamma_neg=2, shift_m=0.05, context_weight=0.1)
        report = grad_check(config, spec, seed=0)
        assert report.passed
        assert max(report.errors.values()) < 1e-4

    def test_report_covers_each_trainable_array_once(self):
        config = ModelConfig(label_dim=4, num_layers=1, num_heads=1,
                             encoder_hidden=4, feedforward_hidden=4)
        report = grad_check(config, LossSpec(), seed=1, num_labels=3, num_features=3)
        emb = random_label_embeddings(3, 4, 1)
        params = init_model_params(config, 3, emb, 1)
        expected = [name for name, _ in params.trainable()]
        assert sorted(report.errors) == sorted(expected)
        assert len(report.lines()) == len(expected)

    def test_corrupted_gradient_is_detected(self):
        config = ModelConfig(label_dim=4, num_layers=1, num_heads=1,
                             encoder_hidden=4, feedforward_hidden=4)
        report = grad_check(config, LossSpec(), seed=2, num_labels=3,
                            num_features=3, corrupt="readout/weight")
        assert not report.passed
        assert report.errors["readout/weight"] > 1e-2


def test_train_config_validation():
    with pytest.raises(ValidationError):
        TrainConfig(epochs=0)
    with pytest.raises(ValidationError):
        TrainConfig(adam_beta1=1.0)
    with pytest.raises(ValidationError):
        TrainConfig(select_on="accuracy")

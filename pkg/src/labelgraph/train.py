"""Mini-batch Adam training with validation-based model selection, plus a
finite-difference gradient verification mode.

Training is bit-reproducible: parameter initialization, batch shuffling,
and every update are driven by the config seed, and batches are consumed
in a fixed order.
"""

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import numerical_gradient, relative_error
from .embeddings import random_label_embeddings
from .errors import NumericalError, ValidationError
from .losses import LossSpec
from .metrics import binarize, evaluate_predictions
from .model import (
    evaluate_loss,
    forward_backward,
    init_model_params,
    predict_probabilities,
)

SELECTABLE_METRICS = ("ebF1", "miF1", "maF1")


@dataclass
class TrainConfig:
    """Optimization settings plus the loss hyperparameters they forward."""

    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 2e-4
    weight_decay: float = 1e-5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    gamma_pos: float = 1.0
    gamma_neg: float = 2.0
    shift_m: float = 0.05
    context_weight: float = 0.1
    clamp_eps: float = 1e-7
    select_on: str = "ebF1"
    threshold: float = 0.5

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValidationError("epochs and batch_size must be >= 1")
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise ValidationError("learning_rate > 0 and weight_decay >= 0 required")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValidationError("Adam betas must lie in (0, 1)")
        if self.select_on not in SELECTABLE_METRICS:
            raise ValidationError(
                f"select_on must be one of {SELECTABLE_METRICS}, got {self.select_on!r}"
            )

    def loss_spec(self):
        return LossSpec(
            gamma_pos=self.gamma_pos,
            gamma_neg=self.gamma_neg,
            shift_m=self.shift_m,
            context_weight=self.context_weight,
            clamp_eps=self.clamp_eps,
        )


class AdamState:
    """First/second moment accumulators and the shared step counter."""

    def __init__(self, params):
        self.step = 0
        self.m = {name: np.zeros_like(arr) for name, arr in params.trainable()}
        self.v = {name: np.zeros_like(arr) for name, arr in params.trainable()}


def adam_step(params, grads, state, config):
    """One in-place bias-corrected Adam update.

    Weight decay enters as an additive ``decay * param`` term in the
    gradient for the arrays ``params.decayed`` admits (everything except
    normalization gains/biases and the label embeddings).
    """
    state.step += 1
    b1, b2 = config.adam_beta1, config.adam_beta2
    correction1 = 1.0 - b1**state.step
    correction2 = 1.0 - b2**state.step
    for name, arr in params.trainable():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for {name}")
        if config.weight_decay and params.decayed(name):
            g = g + config.weight_decay * arr
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        arr -= config.learning_rate * (m / correction1) / (
            np.sqrt(v / correction2) + config.adam_eps
        )


def train(train_set, val_set, model_config, train_config, emb):
    """Optimize the full model; return the best parameters and history.

    ``emb`` is copied, so the caller's embeddings are left untouched. When
    a validation set is given, the parameters from the epoch with the best
    ``select_on`` score (at the configured threshold) are returned;
    otherwise the final-epoch parameters are.
    """
    if val_set is not None and (
        val_set.num_labels != train_set.num_labels
        or val_set.num_features != train_set.num_features
    ):
        raise ValidationError("train and validation sets must share L and S")

    seed_seq = np.random.SeedSequence(train_config.seed)
    init_seed, shuffle_seed = seed_seq.spawn(2)
    params = init_model_params(
        model_config, train_set.num_features, emb.copy(), init_seed
    )
    state = AdamState(params)
    shuffle_rng = np.random.default_rng(shuffle_seed)
    loss_spec = train_config.loss_spec()

    n = train_set.num_samples
    history = []
    best_params = None
    best_score = -math.inf
    for epoch in range(1, train_config.epochs + 1):
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, train_config.batch_size):
            rows = order[start : start + train_config.batch_size]
            x = train_set.features[rows]
            y = train_set.labels[rows]
            try:
                loss, grads = forward_backward(
                    x, y, params.emb, params, model_config, loss_spec
                )
                adam_step(params, grads, state, train_config)
            except NumericalError as err:
                raise NumericalError(
                    f"epoch {epoch}, batch starting at sample {start}: {err}"
                ) from err
            epoch_loss += loss * len(rows)

        record = {
            "epoch": epoch,
            "train_loss": epoch_loss / n,
            "val_ebF1": math.nan,
            "val_miF1": math.nan,
            "val_maF1": math.nan,
        }
        if val_set is not None and val_set.num_samples > 0:
            probs = predict_probabilities(
                val_set.features, params.emb, params, model_config
            )
            report = evaluate_predictions(
                val_set.labels, binarize(probs, train_config.threshold)
            )
            record["val_ebF1"] = report.ebf1
            record["val_miF1"] = report.mif1
            record["val_maF1"] = report.maf1
            score = report.score(train_config.select_on)
            if score > best_score:
                best_score = score
                best_params = params.copy()
        history.append(record)

    if best_params is None:
        best_params = params.copy()
    return best_params, history


def write_history_csv(history, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write("epoch,train_loss,val_ebF1,val_miF1,val_maF1\n")
        for row in history:
            f.write(
                f"{row['epoch']},{row['train_loss']!r},{row['val_ebF1']!r},"
                f"{row['val_miF1']!r},{row['val_maF1']!r}\n"
            )


@dataclass
class GradCheckReport:
    """Per-array max relative error between analytic and numeric gradients."""

    errors: dict
    tolerance: float

    @property
    def passed(self):
        return all(e < self.tolerance for e in self.errors.values())

    def lines(self):
        width = max(len(name) for name in self.errors)
        out = []
        for name, err in self.errors.items():
            status = "ok" if err < self.tolerance else "FAIL"
            out.append(f"{name:<{width}}  {err:12.3e}  {status}")
        return out


def grad_check(
    model_config,
    loss_spec,
    seed,
    num_labels=5,
    num_features=6,
    batch_size=4,
    step=1e-4,
    tolerance=1e-4,
    error_floor=1e-3,
    corrupt=None,
):
    """Compare every analytic gradient against central finite differences
    on a random batch.

    Exhaustive over parameter entries, so keep the configuration small.
    ``corrupt`` names one array whose analytic gradient is deliberately
    offset, as a negative control that the comparison can fail.
    """
    rng = np.random.default_rng(seed)
    emb = random_label_embeddings(num_labels, model_config.label_dim, seed)
    emb.current += 0.1 * rng.standard_normal(emb.current.shape)
    params = init_model_params(model_config, num_features, emb, rng)
    x = rng.standard_normal((batch_size, num_features))
    y = (rng.random((batch_size, num_labels)) < 0.4).astype(np.float64)

    _, analytic = forward_backward(x, y, emb, params, model_config, loss_spec)
    if corrupt is not None:
        analytic[corrupt] = analytic[corrupt] + 1.0

    def value():
        return evaluate_loss(x, y, emb, params, model_config, loss_spec)

    errors = {}
    for name, arr in params.trainable():
        numeric = numerical_gradient(value, arr, step=step)
        errors[name] = relative_error(analytic[name], numeric, floor=error_floor)
    return GradCheckReport(errors=errors, tolerance=tolerance)

"""Classification losses: binary cross entropy, its asymmetric variant with
per-class focusing and probability shifting, and the total training
objective (asymmetric loss plus the anchor regularizer).

All functions take probabilities, not logits, and provide closed-form
gradients with respect to those probabilities. Probabilities are clamped to
``[clamp_eps, 1 - clamp_eps]`` before any log; outside that band the
(sub)gradient is zero, consistent with the clamped value being constant.
"""

from dataclasses import dataclass

import numpy as np

from .embeddings import context_regularizer
from .errors import ValidationError


@dataclass
class LossSpec:
    """Loss hyperparameters.

    ``gamma_pos``/``gamma_neg`` are the focusing exponents for positive and
    negative labels, ``shift_m`` is the probability shift that zeroes out
    easy negatives, and ``context_weight`` scales the anchor regularizer in
    the total objective.
    """

    gamma_pos: float = 0.0
    gamma_neg: float = 0.0
    shift_m: float = 0.0
    context_weight: float = 0.0
    clamp_eps: float = 1e-7

    def __post_init__(self):
        if self.gamma_pos < 0 or self.gamma_neg < 0:
            raise ValidationError("focusing exponents must be nonnegative")
        if not 0.0 <= self.shift_m < 1.0:
            raise ValidationError(f"shift_m must be in [0, 1), got {self.shift_m}")
        if self.context_weight < 0:
            raise ValidationError("context_weight must be nonnegative")
        if not 0.0 < self.clamp_eps <= 1e-3:
            raise ValidationError("clamp_eps must be in (0, 1e-3]")


def _check_pair(y, yhat):
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape:
        raise ValidationError(f"shape mismatch: y {y.shape} vs yhat {yhat.shape}")
    return y, yhat


def bce(y, yhat, clamp_eps=1e-7):
    """Mean binary cross entropy over the label axis.

    1-D inputs give a scalar; 2-D inputs give one value per row.
    """
    y, yhat = _check_pair(y, yhat)
    p = np.clip(yhat, clamp_eps, 1.0 - clamp_eps)
    per_label = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    out = per_label.mean(axis=-1)
    return float(out) if out.ndim == 0 else out


def asl(y, yhat, spec):
    """Asymmetric loss with focusing exponents and probability shifting.

    The positive term is ``-(1 - p)^gamma_pos * log p``. The negative term
    first shifts the probability to ``q = max(p - shift_m, 0)`` and then
    applies ``-q^gamma_neg * log(1 - q)``; a negative label with p below the
    shift therefore contributes exactly zero. With all three parameters at
    zero this reduces to :func:`bce`.
    """
    y, yhat = _check_pair(y, yhat)
    p = np.clip(yhat, spec.clamp_eps, 1.0 - spec.clamp_eps)
    q = np.maximum(p - spec.shift_m, 0.0)
    pos = y * np.power(1.0 - p, spec.gamma_pos) * np.log(p)
    neg = (1.0 - y) * np.power(q, spec.gamma_neg) * np.log1p(-q)
    out = -(pos + neg).mean(axis=-1)
    return float(out) if out.ndim == 0 else out


def asl_probability_gradient(y, yhat, spec):
    """Exact d(asl)/d(yhat), elementwise, including the 1/L mean factor.

    At the shift kink (p == shift_m) and outside the clamp band the
    subgradient zero is used.
    """
    y, yhat = _check_pair(y, yhat)
    eps = spec.clamp_eps
    p = np.clip(yhat, eps, 1.0 - eps)
    inside = (yhat > eps) & (yhat < 1.0 - eps)

    gp = spec.gamma_pos
    focus = np.power(1.0 - p, gp)
    dpos = focus / p
    if gp != 0.0:
        dpos = dpos - gp * np.power(1.0 - p, gp - 1.0) * np.log(p)
    dpos = y * dpos

    q = p - spec.shift_m
    active = q > 0.0
    q_safe = np.where(active, q, 0.5)
    gn = spec.gamma_neg
    dneg = np.power(q_safe, gn) / (1.0 - q_safe)
    if gn != 0.0:
        dneg = dneg - gn * np.power(q_safe, gn - 1.0) * np.log1p(-q_safe)
    dneg = np.where(active, (1.0 - y) * dneg, 0.0)

    num_labels = y.shape[-1]
    return np.where(inside, (dneg - dpos) / num_labels, 0.0)


@dataclass
class TotalLoss:
    """Batch objective value with its exact gradients."""

    value: float
    probability_gradient: np.ndarray
    embedding_gradient: np.ndarray


def total_loss(y, yhat, emb, spec):
    """Mean asymmetric loss over the batch plus the weighted regularizer.

    Returns the value, d(value)/d(yhat) per sample, and the
    ``context_weight``-scaled regularizer gradient for ``emb.current``.
    """
    y, yhat = _check_pair(y, yhat)
    if y.ndim != 2 or y.shape[0] < 1:
        raise ValidationError("expected a non-empty batch of label rows")
    batch = y.shape[0]
    reg_value, reg_grad = context_regularizer(emb)
    value = float(np.mean(asl(y, yhat, spec))) + spec.context_weight * reg_value
    prob_grad = asl_probability_gradient(y, yhat, spec) / batch
    return TotalLoss(value, prob_grad, spec.context_weight * reg_grad)

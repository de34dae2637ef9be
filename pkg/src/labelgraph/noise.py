"""Seeded label-noise injectors.

Three corruption types over an N x L binary label matrix:

* ``uniform`` — every cell flips independently with the given rate
  (error occurrence independent of the true value);
* ``positive`` — only 1-cells flip to 0, each with the given rate
  (error probability depends on the true value);
* ``single_positive`` — every row keeps exactly one of its positives,
  chosen uniformly; empty rows pass through.

``combined`` draws one of the three types per row with probability 1/3
each, with a per-row rate drawn from [0, 0.10] for uniform flips and
[0, 0.50] for positive flips.

Randomness comes from a counter-based Philox generator keyed by
``(seed, row)``, so a row's outcome does not depend on how many rows exist,
on their order, or on which rows are processed in parallel.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .validation import check_label_matrix

KINDS = ("uniform", "positive", "single_positive", "combined")

COMBINED_UNIFORM_MAX_RATE = 0.10
COMBINED_POSITIVE_MAX_RATE = 0.50


@dataclass
class NoiseSpec:
    """One corruption procedure: kind, rate where applicable, and seed."""

    kind: str
    rate: float = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(
                f"kind must be one of {KINDS}, got {self.kind!r}"
            )
        if self.kind in ("uniform", "positive"):
            if self.rate is None:
                raise ValidationError(f"{self.kind} noise requires a rate")
            _check_rate(self.rate)
        elif self.rate is not None:
            _check_rate(self.rate)  # tolerated but unused


def _check_rate(rate):
    if not 0.0 <= rate <= 1.0:
        raise ValidationError(f"rate must be in [0, 1], got {rate}")


def _row_rng(seed, row):
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(row,))
    return np.random.Generator(np.random.Philox(seq))


def inject_uniform(labels, rate, seed):
    """Flip every cell independently with probability ``rate``."""
    _check_rate(rate)
    labels = check_label_matrix(labels)
    out = labels.copy()
    num_labels = labels.shape[1]
    for i in range(labels.shape[0]):
        flip = _row_rng(seed, i).random(num_labels) < rate
        out[i] = np.where(flip, 1 - labels[i], labels[i])
    return out


def inject_positive(labels, rate, seed):
    """Flip each 1-cell to 0 with probability ``rate``; 0-cells untouched."""
    _check_rate(rate)
    labels = check_label_matrix(labels)
    out = labels.copy()
    num_labels = labels.shape[1]
    for i in range(labels.shape[0]):
        flip = _row_rng(seed, i).random(num_labels) < rate
        out[i] = np.where(flip & (labels[i] == 1), 0, labels[i])
    return out


def inject_single_positive(labels, seed):
    """Keep exactly one positive per row, chosen uniformly among them."""
    labels = check_label_matrix(labels)
    out = labels.copy()
    for i in range(labels.shape[0]):
        _truncate_row(out[i], _row_rng(seed, i))
    return out


def _truncate_row(row, rng):
    positives = np.flatnonzero(row)
    if len(positives) > 1:
        keep = positives[rng.integers(len(positives))]
        row[:] = 0
        row[keep] = 1


def inject_combined(labels, seed, corrupt_all=True, return_assignment=False):
    """Per-row mixture of the three noise types.

    With ``corrupt_all`` (default) every row is corrupted and the type is
    uniform over the three; otherwise each row is first gated with
    probability 1/3 of being corrupted at all. When ``return_assignment``
    is set, also returns an int array with the type applied per row
    (1, 2, or 3; 0 for rows left alone by the gate).
    """
    labels = check_label_matrix(labels)
    out = labels.copy()
    num_labels = labels.shape[1]
    assignment = np.zeros(labels.shape[0], dtype=np.int64)
    for i in range(labels.shape[0]):
        rng = _row_rng(seed, i)
        if not corrupt_all and rng.random() >= 1.0 / 3.0:
            continue
        kind = int(rng.integers(3))
        assignment[i] = kind + 1
        if kind == 0:
            rate = rng.uniform(0.0, COMBINED_UNIFORM_MAX_RATE)
            flip = rng.random(num_labels) < rate
            out[i] = np.where(flip, 1 - labels[i], labels[i])
        elif kind == 1:
            rate = rng.uniform(0.0, COMBINED_POSITIVE_MAX_RATE)
            flip = rng.random(num_labels) < rate
            out[i] = np.where(flip & (labels[i] == 1), 0, labels[i])
        else:
            _truncate_row(out[i], rng)
    if return_assignment:
        return out, assignment
    return out


def apply_noise(labels, spec):
    """Dispatch on :class:`NoiseSpec`."""
    if spec.kind == "uniform":
        return inject_uniform(labels, spec.rate, spec.seed)
    if spec.kind == "positive":
        return inject_positive(labels, spec.rate, spec.seed)
    if spec.kind == "single_positive":
        return inject_single_positive(labels, spec.seed)
    return inject_combined(labels, spec.seed)

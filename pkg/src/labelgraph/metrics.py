"""Exact multi-label evaluation metrics.

Three F1 flavors over binary matrices Y (truth) and Yhat (prediction):

* example-based: per-sample F1, averaged over samples;
* micro: one F1 from globally pooled tp/fp/fn counts;
* macro: per-label F1, averaged over labels.

Zero-denominator conventions (the formulas are 0/0 there): a sample with
no true and no predicted positives counts as a perfect 1 in ebF1; a label
that never occurs in truth or prediction contributes 0 to maF1; miF1 is 1
only in the fully-empty-agreement case. These are documented choices, not
derivable from the formulas.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .errors import ValidationError
from .validation import (
    check_label_matrix,
    check_probability_matrix,
    check_same_shape,
    check_threshold,
)


def binarize(probabilities, threshold=0.5):
    """Threshold probabilities into {0,1}; ties at the threshold become 1."""
    P = check_probability_matrix(probabilities)
    t = check_threshold(threshold)
    return (P >= t).astype(np.int8)


def _checked_pair(Y, Yhat):
    Y = check_label_matrix(Y)
    Yhat = check_label_matrix(Yhat)
    check_same_shape(Y, Yhat, "label matrices")
    return Y.astype(np.int64), Yhat.astype(np.int64)


def label_counts(Y, Yhat):
    """Per-label (tp, fp, fn) counts, each an int array of length L."""
    Y, Yhat = _checked_pair(Y, Yhat)
    tp = (Y * Yhat).sum(axis=0)
    fp = ((1 - Y) * Yhat).sum(axis=0)
    fn = (Y * (1 - Yhat)).sum(axis=0)
    return tp, fp, fn


def ebf1(Y, Yhat):
    """Example-based F1: mean over samples of 2|y & yhat| / (|y| + |yhat|)."""
    Y, Yhat = _checked_pair(Y, Yhat)
    num = 2.0 * (Y * Yhat).sum(axis=1)
    den = Y.sum(axis=1) + Yhat.sum(axis=1)
    per_sample = np.where(den > 0, num / np.where(den > 0, den, 1), 1.0)
    return float(per_sample.mean())


def mif1(Y, Yhat):
    """Micro F1 from pooled counts over all N*L cells."""
    tp, fp, fn = label_counts(Y, Yhat)
    den = 2 * tp.sum() + fp.sum() + fn.sum()
    if den == 0:
        return 1.0
    return float(2.0 * tp.sum() / den)


def per_label_f1(Y, Yhat):
    """F1 per label; labels absent from both truth and prediction get 0."""
    tp, fp, fn = label_counts(Y, Yhat)
    den = 2 * tp + fp + fn
    return np.where(den > 0, 2.0 * tp / np.where(den > 0, den, 1), 0.0)


def maf1(Y, Yhat):
    """Macro F1: mean of the per-label F1 vector."""
    return float(per_label_f1(Y, Yhat).mean())


@dataclass
class MetricsReport:
    """All three scores plus the per-label breakdown behind maF1."""

    ebf1: float
    mif1: float
    maf1: float
    f1_per_label: np.ndarray
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray

    def summary_line(self):
        return (
            f"ebF1={self.ebf1:.6f} miF1={self.mif1:.6f} maF1={self.maf1:.6f}"
        )

    def score(self, name):
        key = name.lower().replace("_", "")
        if key not in ("ebf1", "mif1", "maf1"):
            raise ValidationError(f"unknown metric {name!r}")
        return getattr(self, key)


def evaluate_predictions(Y, Yhat):
    """Compute the full report for a truth/prediction matrix pair."""
    tp, fp, fn = label_counts(Y, Yhat)
    return MetricsReport(
        ebf1=ebf1(Y, Yhat),
        mif1=mif1(Y, Yhat),
        maf1=maf1(Y, Yhat),
        f1_per_label=per_label_f1(Y, Yhat),
        tp=tp,
        fp=fp,
        fn=fn,
    )


def top_cooccurrence_distance(emb, labels, k=100):
    """Mean embedding distance of the k most co-occurring label pairs,
    normalized by the mean distance over all unordered pairs.

    Pair counts come from the label matrix; ties in count break toward the
    lexicographically smaller pair. If fewer than k pairs ever co-occur,
    all co-occurring pairs are used with a warning. A ratio below 1 means
    frequently co-occurring labels sit closer together than average.
    """
    labels = check_label_matrix(labels, n_labels=emb.num_labels)
    num_labels = emb.num_labels
    max_pairs = num_labels * (num_labels - 1) // 2
    if not 1 <= k <= max_pairs:
        raise ValidationError(
            f"k must be in [1, {max_pairs}] for {num_labels} labels, got {k}"
        )

    counts = labels.T.astype(np.int64) @ labels.astype(np.int64)
    upper_i, upper_j = np.triu_indices(num_labels, k=1)
    pair_counts = counts[upper_i, upper_j]

    eligible = pair_counts > 0
    if eligible.sum() == 0:
        warnings.warn("no label pair ever co-occurs; returning 0")
        return 0.0
    if eligible.sum() < k:
        warnings.warn(
            f"only {int(eligible.sum())} label pairs co-occur; "
            f"using all of them instead of k={k}"
        )
        k = int(eligible.sum())

    order = np.lexsort((upper_j, upper_i, -pair_counts))
    top = order[:k]

    diffs = emb.current[upper_i[top]] - emb.current[upper_j[top]]
    top_mean = float(np.linalg.norm(diffs, axis=1).mean())
    all_mean = float(pdist(emb.current).mean())
    if all_mean == 0.0:
        warnings.warn("all label embeddings coincide; returning 0")
        return 0.0
    return top_mean / all_mean

"""Encoder-to-decoder network over a complete label graph.

A two-layer feedforward encoder maps a sparse feature row to a latent
vector ``z``. The decoder starts one node per label at its label embedding
and runs ``num_layers`` blocks; each block injects ``z`` into every node,
then applies multi-head scaled dot-product self-attention over all label
pairs (self-loops included) with a residual, then a residual feedforward
sublayer, with layer normalization after each of the three steps. A shared
readout row per label followed by a sigmoid yields the label probability.

Inside :func:`decoder_forward` and :func:`forward_backward` the labels are
processed in a content-canonical order (lexicographic by embedding, anchor,
and readout rows) and the results mapped back. Reductions over the label
axis therefore see the same operand order no matter how the caller numbers
the labels, which makes relabeling equivariance hold bit-exactly instead of
only up to rounding.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import Tensor
from .errors import NumericalError, ValidationError
from .losses import asl, asl_probability_gradient


@dataclass
class ModelConfig:
    """Architecture sizes. ``label_dim`` must equal the embedding width and
    be divisible by ``num_heads``."""

    label_dim: int = 64
    num_layers: int = 4
    num_heads: int = 2
    encoder_hidden: int = 256
    feedforward_hidden: int = 128
    z_every_block: bool = True

    def __post_init__(self):
        if min(self.label_dim, self.num_layers, self.num_heads,
               self.encoder_hidden, self.feedforward_hidden) < 1:
            raise ValidationError("all model sizes must be >= 1")
        if self.label_dim % self.num_heads != 0:
            raise ValidationError(
                f"label_dim {self.label_dim} not divisible by "
                f"num_heads {self.num_heads}"
            )

    def z_blocks(self):
        """Indices of the blocks that receive the latent update."""
        return range(self.num_layers) if self.z_every_block else range(1)


class ModelParams:
    """Named parameter arrays plus the jointly-trained label embeddings.

    ``arrays`` maps stable names ("encoder/w1", "block0/attn_query", ...)
    to float64 ndarrays; the embedding matrix travels under the name
    "label_embeddings" in gradient and optimizer state dicts.
    """

    def __init__(self, arrays, emb, num_features):
        self.arrays = arrays
        self.emb = emb
        self.num_features = num_features

    @property
    def num_labels(self):
        return self.emb.num_labels

    def trainable(self):
        """Yield every (name, array) pair that receives gradients."""
        yield from self.arrays.items()
        yield "label_embeddings", self.emb.current

    def decayed(self, name):
        """Weight decay skips normalization parameters and embeddings."""
        return not (
            name == "label_embeddings"
            or name.endswith("norm_gain")
            or name.endswith("norm_bias")
        )

    def copy(self):
        return ModelParams(
            {k: v.copy() for k, v in self.arrays.items()},
            self.emb.copy(),
            self.num_features,
        )


def _glorot(rng, fan_in, fan_out, shape):
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def init_model_params(config, num_features, emb, seed):
    """Seeded parameter initialization; embedding width fixes ``label_dim``."""
    d = config.label_dim
    if emb.dim != d:
        raise ValidationError(
            f"label_dim {d} must equal embedding dim {emb.dim}"
        )
    rng = np.random.default_rng(seed)
    e_hid, f_hid = config.encoder_hidden, config.feedforward_hidden
    arrays = {
        "encoder/w1": _glorot(rng, num_features, e_hid, (num_features, e_hid)),
        "encoder/b1": np.zeros(e_hid),
        "encoder/w2": _glorot(rng, e_hid, d, (e_hid, d)),
        "encoder/b2": np.zeros(d),
    }
    z_blocks = set(config.z_blocks())
    for t in range(config.num_layers):
        p = f"block{t}/"
        if t in z_blocks:
            arrays[p + "z_map"] = _glorot(rng, d, d, (d, d))
            arrays[p + "z_norm_gain"] = np.ones(d)
            arrays[p + "z_norm_bias"] = np.zeros(d)
        for part in ("attn_query", "attn_key", "attn_value", "attn_mix"):
            arrays[p + part] = _glorot(rng, d, d, (d, d))
        arrays[p + "attn_norm_gain"] = np.ones(d)
        arrays[p + "attn_norm_bias"] = np.zeros(d)
        arrays[p + "ff_w1"] = _glorot(rng, d, f_hid, (d, f_hid))
        arrays[p + "ff_b1"] = np.zeros(f_hid)
        arrays[p + "ff_w2"] = _glorot(rng, f_hid, d, (f_hid, d))
        arrays[p + "ff_b2"] = np.zeros(d)
        arrays[p + "ff_norm_gain"] = np.ones(d)
        arrays[p + "ff_norm_bias"] = np.zeros(d)
    arrays["readout/weight"] = _glorot(rng, d, 1, (emb.num_labels, d))
    return ModelParams(arrays, emb, num_features)


# ---------------------------------------------------------------------------
# public single-sample operations


def encode(features, params):
    """Latent vector for one sparse feature row: w2 @ relu(w1 @ x + b1) + b2.

    A single row (1-D dense, or sparse/dense with one row) yields a (d,)
    vector; a batch of rows yields (B, d).
    """
    x = _dense_rows(features, params.num_features)
    a = params.arrays
    hidden = np.maximum(x @ a["encoder/w1"] + a["encoder/b1"], 0.0)
    z = hidden @ a["encoder/w2"] + a["encoder/b2"]
    return z[0] if x.shape[0] == 1 else z


def attention_weights(nodes, query_map, key_map, num_heads=1):
    """Per-head row-stochastic attention over all node pairs.

    Raw scores are scaled dot products of per-head query/key projections,
    normalized per row with a max-shifted softmax. Returns (H, L, L).
    """
    nodes = np.asarray(nodes, dtype=np.float64)
    L, d = nodes.shape
    dh = d // num_heads
    q = _split_heads(nodes @ query_map, num_heads)
    k = _split_heads(nodes @ key_map, num_heads)
    scores = (q @ k.swapaxes(-1, -2)) / math.sqrt(dh)
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def message_pass(nodes, alpha, value_map, mix_map, num_heads=1):
    """Residual attention messages: nodes + mix(concat_h(alpha_h @ V_h))."""
    nodes = np.asarray(nodes, dtype=np.float64)
    L, d = nodes.shape
    values = _split_heads(nodes @ value_map, num_heads)
    msg = alpha @ values
    merged = msg.transpose(1, 0, 2).reshape(L, d)
    return nodes + merged @ mix_map


def _split_heads(x, num_heads):
    L, d = x.shape
    return x.reshape(L, num_heads, d // num_heads).transpose(1, 0, 2)


def decoder_forward(z, emb, params, config, counters=None):
    """Label probabilities for a single latent vector. Returns shape (L,)."""
    z = np.asarray(z, dtype=np.float64).reshape(1, -1)
    perm = _canonical_label_order(emb, params)
    leaves = _make_leaves(params, emb, perm, requires_grad=False)
    probs = _decoder_graph(Tensor(z), leaves, config, counters)
    out = np.empty(emb.num_labels)
    out[perm] = probs.data[0]
    return out


def predict_probabilities(features, emb, params, config, batch_size=256):
    """Batched forward pass over a feature matrix. Returns (N, L)."""
    X = _dense_input(features)
    n = X.shape[0]
    perm = _canonical_label_order(emb, params)
    leaves = _make_leaves(params, emb, perm, requires_grad=False)
    out = np.empty((n, emb.num_labels))
    for start in range(0, n, batch_size):
        stop = min(start + batch_size, n)
        x = _dense_rows(X[start:stop], params.num_features)
        z = _encoder_graph(Tensor(x), leaves)
        probs = _decoder_graph(z, leaves, config)
        out[start:stop][:, perm] = probs.data
    return out


def forward_backward(features, labels, emb, params, config, loss_spec,
                     counters=None):
    """Total loss on a batch and its exact gradient for every trainable array.

    The objective is the batch-mean asymmetric loss plus the weighted
    anchor regularizer. Returns ``(value, grads)`` where ``grads`` has one
    entry per name in ``params.trainable()``.
    """
    x = _dense_rows(features, params.num_features)
    labels = np.asarray(labels, dtype=np.float64)
    if x.shape[0] < 1:
        raise ValidationError("batch must be non-empty")
    if labels.shape != (x.shape[0], emb.num_labels):
        raise ValidationError(
            f"label batch shape {labels.shape} does not match "
            f"({x.shape[0]}, {emb.num_labels})"
        )

    perm = _canonical_label_order(emb, params)
    leaves = _make_leaves(params, emb, perm, requires_grad=True)
    z = _encoder_graph(Tensor(x), leaves)
    probs = _decoder_graph(z, leaves, config, counters)
    loss = _objective(probs, labels[:, perm], emb.anchors[perm], leaves, loss_spec)

    if not np.isfinite(loss.data):
        raise NumericalError(
            "non-finite loss; first non-finite array: "
            + _first_nonfinite(params, probs.data)
        )
    ad.backward(loss)

    grads = {}
    for name, leaf in leaves.items():
        g = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
        if name in ("readout/weight", "label_embeddings"):
            unpermuted = np.empty_like(g)
            unpermuted[perm] = g
            g = unpermuted
        grads[name] = g
    return float(loss.data), grads


def evaluate_loss(features, labels, emb, params, config, loss_spec):
    """Objective value only, no gradients; reads the current parameter
    arrays so in-place perturbations are visible (finite differences)."""
    x = _dense_rows(features, params.num_features)
    labels = np.asarray(labels, dtype=np.float64)
    perm = _canonical_label_order(emb, params)
    leaves = _make_leaves(params, emb, perm, requires_grad=False)
    z = _encoder_graph(Tensor(x), leaves)
    probs = _decoder_graph(z, leaves, config)
    loss = _objective(probs, labels[:, perm], emb.anchors[perm], leaves, loss_spec)
    return float(loss.data)


# ---------------------------------------------------------------------------
# graph construction


def _canonical_label_order(emb, params):
    keys = np.concatenate(
        [emb.current, emb.anchors, params.arrays["readout/weight"]], axis=1
    )
    return np.lexsort(keys.T[::-1])


def _make_leaves(params, emb, perm, requires_grad):
    leaves = {}
    for name, arr in params.arrays.items():
        data = arr[perm] if name == "readout/weight" else arr
        leaves[name] = Tensor(data, requires_grad=requires_grad)
    leaves["label_embeddings"] = Tensor(emb.current[perm], requires_grad=requires_grad)
    return leaves


def _encoder_graph(x, leaves):
    hidden = ad.relu(x @ leaves["encoder/w1"] + leaves["encoder/b1"])
    return hidden @ leaves["encoder/w2"] + leaves["encoder/b2"]


def _attention_graph(v, leaves, prefix, num_heads):
    """Multi-head self-attention with residual on a (B, L, d) tensor."""
    dh = v.shape[-1] // num_heads
    # queries pre-scaled by 1/sqrt(dh): cheaper than scaling the L x L scores
    q = ad.scale(ad.split_heads(v @ leaves[prefix + "attn_query"], num_heads),
                 1.0 / math.sqrt(dh))
    k = ad.split_heads(v @ leaves[prefix + "attn_key"], num_heads)
    w = ad.split_heads(v @ leaves[prefix + "attn_value"], num_heads)
    alpha = ad.softmax(q @ ad.transpose(k, (0, 1, 3, 2)))
    merged = ad.merge_heads(alpha @ w)
    return v + (merged @ leaves[prefix + "attn_mix"]), alpha


def _feedforward_graph(m, leaves, prefix):
    hidden = ad.relu(m @ leaves[prefix + "ff_w1"] + leaves[prefix + "ff_b1"])
    return m + (hidden @ leaves[prefix + "ff_w2"] + leaves[prefix + "ff_b2"])


def _decoder_graph(z, leaves, config, counters=None):
    """Run all decoder blocks on latent batch ``z`` (B, d); returns (B, L)
    probabilities in canonical label order."""
    batch = z.shape[0]
    emb = leaves["label_embeddings"]
    L, d = emb.shape
    z_row = ad.reshape(z, (batch, 1, d))
    v = emb  # broadcast to (B, L, d) by the first residual add
    z_blocks = set(config.z_blocks())
    for t in range(config.num_layers):
        prefix = f"block{t}/"
        if t in z_blocks:
            v = ad.layer_norm(
                v + (z_row @ leaves[prefix + "z_map"]),
                leaves[prefix + "z_norm_gain"],
                leaves[prefix + "z_norm_bias"],
            )
        m, alpha = _attention_graph(v, leaves, prefix, config.num_heads)
        if counters is not None:
            counters["attention_sublayers"] = counters.get("attention_sublayers", 0) + 1
            counters.setdefault("attention_weights", []).append(alpha.data)
        v = ad.layer_norm(
            m, leaves[prefix + "attn_norm_gain"], leaves[prefix + "attn_norm_bias"]
        )
        f = _feedforward_graph(v, leaves, prefix)
        if counters is not None:
            counters["feedforward_sublayers"] = (
                counters.get("feedforward_sublayers", 0) + 1
            )
        v = ad.layer_norm(
            f, leaves[prefix + "ff_norm_gain"], leaves[prefix + "ff_norm_bias"]
        )
    logits = ad.reduce_sum(ad.mul(v, leaves["readout/weight"]), axis=-1)
    return ad.sigmoid(logits)


def _objective(probs, y, anchors, leaves, spec):
    """Terminal graph node: batch-mean asymmetric loss + anchor regularizer.

    The backward rule uses the closed-form probability gradient from the
    losses module; the finite-difference oracle in the tests exercises the
    full composition.
    """
    emb_leaf = leaves["label_embeddings"]
    batch = y.shape[0]
    diff = emb_leaf.data - anchors
    value = float(np.mean(asl(y, probs.data, spec)))
    value += spec.context_weight * float((diff * diff).sum())

    def backward_fn(g):
        gp = g * asl_probability_gradient(y, probs.data, spec) / batch
        ge = g * (2.0 * spec.context_weight) * diff
        return gp, ge

    return Tensor(np.float64(value), (probs, emb_leaf), backward_fn)


# ---------------------------------------------------------------------------
# input handling


def _dense_input(features):
    if sp.issparse(features):
        return features
    return np.asarray(features, dtype=np.float64)


def _dense_rows(features, num_features):
    """Coerce one row or a batch of rows to a dense (B, S) float64 array."""
    if sp.issparse(features):
        x = features.toarray().astype(np.float64)
    else:
        x = np.asarray(features, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(1, -1)
    if x.shape[-1] != num_features:
        raise ValidationError(
            f"feature width {x.shape[-1]} does not match model {num_features}"
        )
    return x


def _first_nonfinite(params, probs):
    for name, arr in params.trainable():
        if not np.all(np.isfinite(arr)):
            return name
    if not np.all(np.isfinite(probs)):
        return "probabilities"
    return "loss"

"""Word-embedding tables, label-embedding construction, and the anchor
regularizer.

Label embeddings start from pretrained word vectors: a label name is split
into word tokens, each token is looked up in the table (out-of-vocabulary
tokens get a seeded normal draw whose per-dimension mean/std come from the
in-vocabulary label tokens of the dataset), and the token vectors are
averaged. The resulting matrix is kept twice: ``current`` is trained,
``anchors`` is frozen, and the regularizer penalizes the squared distance
between them.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError, ValidationError


@dataclass
class WordEmbeddingTable:
    """Read-only map from lowercase token to a P-dimensional vector."""

    dim: int
    entries: dict

    def __post_init__(self):
        for token, vec in self.entries.items():
            if not token or token != token.lower():
                raise ValidationError(f"token {token!r} must be non-empty lowercase")
            if vec.shape != (self.dim,):
                raise ValidationError(
                    f"vector for {token!r} has shape {vec.shape}, expected ({self.dim},)"
                )

    def __len__(self):
        return len(self.entries)

    def __contains__(self, token):
        return token.lower() in self.entries

    def get(self, token):
        return self.entries.get(token.lower())


def parse_word_embeddings(text):
    """Parse GloVe-style text: one ``token v1 ... vP`` line per token.

    P is inferred from the first line. A repeated token overwrites the
    earlier entry with a warning; inconsistent vector lengths and
    non-numeric values are errors with line numbers.
    """
    if isinstance(text, str):
        lines = text.splitlines()
    elif hasattr(text, "read"):
        lines = text.read().splitlines()
    else:
        lines = list(text)

    entries = {}
    dim = None
    for i, line in enumerate(lines):
        lineno = i + 1
        parts = line.split()
        if not parts:
            continue
        token = parts[0].lower()
        if dim is None:
            dim = len(parts) - 1
            if dim < 1:
                raise DataFormatError("first line has no vector values", line=lineno)
        if len(parts) - 1 != dim:
            raise DataFormatError(
                f"expected {dim} values for {token!r}, got {len(parts) - 1}",
                line=lineno,
            )
        try:
            vec = np.array([float(p) for p in parts[1:]], dtype=np.float64)
        except ValueError:
            raise DataFormatError(
                f"non-numeric value in vector for {token!r}", line=lineno
            ) from None
        if token in entries:
            warnings.warn(f"duplicate token {token!r} at line {lineno}; keeping last")
        entries[token] = vec
    if not entries:
        raise DataFormatError("no embeddings found")
    return WordEmbeddingTable(dim=dim, entries=entries)


def read_word_embeddings(path):
    with open(path, encoding="utf-8") as f:
        return parse_word_embeddings(f)


@dataclass
class LabelEmbeddings:
    """Trainable per-label vectors plus their frozen anchors (both L x P)."""

    current: np.ndarray
    anchors: np.ndarray

    def __post_init__(self):
        self.current = np.ascontiguousarray(self.current, dtype=np.float64)
        self.anchors = np.ascontiguousarray(self.anchors, dtype=np.float64)
        if self.current.ndim != 2 or self.current.shape != self.anchors.shape:
            raise ValidationError(
                f"current {self.current.shape} and anchors {self.anchors.shape} "
                "must be equal 2-D shapes"
            )
        self.anchors.setflags(write=False)

    @property
    def num_labels(self):
        return self.current.shape[0]

    @property
    def dim(self):
        return self.current.shape[1]

    def copy(self):
        return LabelEmbeddings(self.current.copy(), self.anchors.copy())

    def anchor_distance(self):
        """Frobenius norm of (current - anchors)."""
        return float(np.linalg.norm(self.current - self.anchors))


def _label_tokens(names):
    return [[t.lower() for t in name.split()] for name in names]


def init_label_embeddings(names, table, seed):
    """Build label embeddings anchored to word vectors.

    Each label name is split on whitespace; in-vocabulary tokens use their
    table vector, out-of-vocabulary tokens get one i.i.d. normal draw per
    dimension with mean/std taken per dimension over the table vectors of
    this dataset's in-vocabulary label tokens. The label embedding is the
    mean over its tokens; ``current`` and ``anchors`` both start there, so
    the regularizer is exactly zero after initialization.
    """
    if not names:
        raise ValidationError("names must be non-empty")
    if len(table) == 0:
        raise ValidationError("word-embedding table is empty")
    tokenized = _label_tokens(names)
    for name, tokens in zip(names, tokenized):
        if not tokens:
            raise ValidationError(f"label name {name!r} has no tokens")

    in_vocab = []
    seen = set()
    for tokens in tokenized:
        for tok in tokens:
            if tok in seen:
                continue
            seen.add(tok)
            if table.get(tok) is not None:
                in_vocab.append(tok)
    oov = [tok for tokens in tokenized for tok in tokens if table.get(tok) is None]
    oov_order = list(dict.fromkeys(oov))

    if oov_order and not in_vocab:
        raise ValidationError(
            "every label token is out of vocabulary; cannot estimate the "
            "normal distribution for unknown tokens"
        )

    vectors = {tok: table.get(tok) for tok in in_vocab}
    if oov_order:
        known = np.stack([vectors[tok] for tok in in_vocab])
        mu = known.mean(axis=0)
        sigma = known.std(axis=0)
        rng = np.random.default_rng(seed)
        for tok in oov_order:
            vectors[tok] = mu + sigma * rng.standard_normal(table.dim)

    anchors = np.empty((len(names), table.dim), dtype=np.float64)
    for l, tokens in enumerate(tokenized):
        anchors[l] = np.mean([vectors[tok] for tok in tokens], axis=0)
    return LabelEmbeddings(current=anchors.copy(), anchors=anchors)


def random_label_embeddings(num_labels, dim, seed, scale=0.1):
    """Seeded random initialization for runs without word vectors.

    ``current`` and ``anchors`` coincide here too, so training with the
    regularizer pulls embeddings back toward their own starting point.
    """
    rng = np.random.default_rng(seed)
    anchors = scale * rng.standard_normal((num_labels, dim))
    return LabelEmbeddings(current=anchors.copy(), anchors=anchors)


def context_regularizer(emb):
    """Squared Frobenius distance between current embeddings and anchors.

    Returns ``(value, gradient)`` where the gradient is with respect to
    ``current`` and equals ``2 * (current - anchors)``.
    """
    diff = emb.current - emb.anchors
    return float((diff * diff).sum()), 2.0 * diff

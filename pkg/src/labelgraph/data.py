"""Canonical multi-label dataset format: parsing, validation, serialization.

File layout (UTF-8 text)::

    # optional comment lines, only before the header
    N L S
    <positive label indices, comma-separated, may be empty>\\t<idx:value pairs, space-separated, may be empty>
    ... exactly N such sample lines ...

Label and feature indices are 0-based. Feature values are decimal floats.
A separate label-names file carries one name per line (L lines).

The writer emits each row's features in ascending index order with
shortest-exact float formatting, so ``parse_dataset(write_dataset(d))``
reproduces ``d`` bit-for-bit.
"""

import io
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DataFormatError


@dataclass
class MultiLabelDataset:
    """N samples of sparse real features with an N x L binary label matrix.

    ``features`` is a CSR matrix with row indices sorted ascending and no
    duplicates; ``labels`` is an int8 {0,1} matrix. ``label_names`` is
    optional and, when present, has exactly ``num_labels`` entries.
    """

    num_samples: int
    num_labels: int
    num_features: int
    features: sp.csr_matrix
    labels: np.ndarray
    label_names: list = field(default=None)

    def __post_init__(self):
        if self.num_samples < 1 or self.num_labels < 1 or self.num_features < 1:
            raise DataFormatError("N, L, S must all be positive")
        if self.features.shape != (self.num_samples, self.num_features):
            raise DataFormatError(
                f"feature matrix shape {self.features.shape} does not match "
                f"header ({self.num_samples}, {self.num_features})"
            )
        if self.labels.shape != (self.num_samples, self.num_labels):
            raise DataFormatError(
                f"label matrix shape {self.labels.shape} does not match "
                f"header ({self.num_samples}, {self.num_labels})"
            )
        if not np.isin(self.labels, (0, 1)).all():
            raise DataFormatError("label matrix entries must be 0 or 1")
        if not np.all(np.isfinite(self.features.data)):
            raise DataFormatError("feature values must be finite")
        if self.label_names is not None:
            _check_label_names(self.label_names, self.num_labels)

    def with_label_names(self, names):
        """Return a copy of the dataset with label names attached."""
        _check_label_names(names, self.num_labels)
        return MultiLabelDataset(
            self.num_samples,
            self.num_labels,
            self.num_features,
            self.features,
            self.labels,
            list(names),
        )

    def feature_row(self, i):
        """Sparse row ``i`` as an ``(indices, values)`` pair."""
        start, stop = self.features.indptr[i], self.features.indptr[i + 1]
        return self.features.indices[start:stop], self.features.data[start:stop]

    def __eq__(self, other):
        if not isinstance(other, MultiLabelDataset):
            return NotImplemented
        return (
            self.num_samples == other.num_samples
            and self.num_labels == other.num_labels
            and self.num_features == other.num_features
            and np.array_equal(self.features.indptr, other.features.indptr)
            and np.array_equal(self.features.indices, other.features.indices)
            and np.array_equal(self.features.data, other.features.data)
            and np.array_equal(self.labels, other.labels)
            and self.label_names == other.label_names
        )


def _check_label_names(names, num_labels):
    if len(names) != num_labels:
        raise DataFormatError(
            f"expected {num_labels} label names, got {len(names)}"
        )
    for i, name in enumerate(names):
        if not isinstance(name, str) or not name.strip():
            raise DataFormatError(f"label name {i} is empty")


def _as_lines(text):
    if isinstance(text, str):
        return text.split("\n")
    if hasattr(text, "read"):
        return text.read().split("\n")
    return list(text)


def parse_dataset(text):
    """Parse the canonical format from a string or file-like object.

    Raises :class:`DataFormatError` with a 1-based line number for any
    malformed header, out-of-range or duplicate index, or bad token.
    Sample order is preserved.
    """
    lines = _as_lines(text)
    pos = 0
    while pos < len(lines) and lines[pos].lstrip().startswith("#"):
        pos += 1
    if pos >= len(lines) or not lines[pos].strip():
        raise DataFormatError("missing header line", line=pos + 1)

    header_line = pos + 1
    parts = lines[pos].split()
    if len(parts) != 3:
        raise DataFormatError(
            f"header must be 'N L S', got {lines[pos]!r}", line=header_line
        )
    try:
        n, l, s = (int(p) for p in parts)
    except ValueError:
        raise DataFormatError(
            f"header must contain three integers, got {lines[pos]!r}",
            line=header_line,
        ) from None
    if n < 1 or l < 1 or s < 1:
        raise DataFormatError("N, L, S must all be positive", line=header_line)
    pos += 1

    labels = np.zeros((n, l), dtype=np.int8)
    indptr = np.zeros(n + 1, dtype=np.int64)
    all_indices = []
    all_values = []

    for i in range(n):
        lineno = pos + i + 1
        if pos + i >= len(lines):
            raise DataFormatError(
                f"expected {n} sample lines, file ends after {i}", line=lineno
            )
        raw = lines[pos + i].rstrip("\r")
        if raw == "" and pos + i == len(lines) - 1:
            raise DataFormatError(
                f"expected {n} sample lines, file ends after {i}", line=lineno
            )
        if "\t" not in raw:
            raise DataFormatError(
                "sample line must contain a TAB between labels and features",
                line=lineno,
            )
        label_field, feature_field = raw.split("\t", 1)
        _parse_label_field(label_field, labels[i], l, lineno)
        idx, vals = _parse_feature_field(feature_field, s, lineno)
        all_indices.append(idx)
        all_values.append(vals)
        indptr[i + 1] = indptr[i] + len(idx)

    for extra in range(pos + n, len(lines)):
        if lines[extra].strip():
            raise DataFormatError(
                f"unexpected content after {n} sample lines", line=extra + 1
            )

    indices = np.concatenate(all_indices) if all_indices else np.zeros(0, np.int32)
    values = np.concatenate(all_values) if all_values else np.zeros(0, np.float64)
    features = sp.csr_matrix((values, indices, indptr), shape=(n, s))
    return MultiLabelDataset(n, l, s, features, labels)


def _parse_label_field(field_text, row, num_labels, lineno):
    if not field_text:
        return
    seen = set()
    for token in field_text.split(","):
        try:
            idx = int(token)
        except ValueError:
            raise DataFormatError(
                f"label index {token!r} is not an integer", line=lineno
            ) from None
        if not 0 <= idx < num_labels:
            raise DataFormatError(
                f"label index {idx} out of range [0, {num_labels})", line=lineno
            )
        if idx in seen:
            raise DataFormatError(f"duplicate label index {idx}", line=lineno)
        seen.add(idx)
        row[idx] = 1


def _parse_feature_field(field_text, num_features, lineno):
    tokens = field_text.split()
    indices = np.empty(len(tokens), dtype=np.int32)
    values = np.empty(len(tokens), dtype=np.float64)
    seen = set()
    for k, token in enumerate(tokens):
        idx_text, sep, val_text = token.partition(":")
        if not sep:
            raise DataFormatError(
                f"feature entry {token!r} is not 'index:value'", line=lineno
            )
        try:
            idx = int(idx_text)
        except ValueError:
            raise DataFormatError(
                f"feature index {idx_text!r} is not an integer", line=lineno
            ) from None
        if not 0 <= idx < num_features:
            raise DataFormatError(
                f"feature index {idx} out of range [0, {num_features})", line=lineno
            )
        if idx in seen:
            raise DataFormatError(f"duplicate feature index {idx}", line=lineno)
        seen.add(idx)
        try:
            val = float(val_text)
        except ValueError:
            raise DataFormatError(
                f"feature value {val_text!r} is not a number", line=lineno
            ) from None
        if not np.isfinite(val):
            raise DataFormatError(
                f"feature value {val_text!r} is not finite", line=lineno
            )
        indices[k] = idx
        values[k] = val
    order = np.argsort(indices, kind="stable")
    return indices[order], values[order]


def write_dataset(dataset):
    """Serialize to the canonical format.

    Floats are rendered with ``repr``, which emits the shortest string that
    parses back to the identical double, so round trips are exact.
    """
    out = io.StringIO()
    out.write(f"{dataset.num_samples} {dataset.num_labels} {dataset.num_features}\n")
    for i in range(dataset.num_samples):
        positives = np.flatnonzero(dataset.labels[i])
        idx, vals = dataset.feature_row(i)
        out.write(",".join(str(p) for p in positives))
        out.write("\t")
        out.write(" ".join(f"{j}:{float(v)!r}" for j, v in zip(idx, vals)))
        out.write("\n")
    return out.getvalue()


def parse_label_names(text):
    """Parse a label-names file: one non-empty name per line, trimmed."""
    lines = _as_lines(text)
    if lines and lines[-1] == "":
        lines = lines[:-1]
    names = []
    for i, line in enumerate(lines):
        name = line.strip()
        if not name:
            raise DataFormatError("label name is empty", line=i + 1)
        names.append(name)
    return names


def read_dataset(path, label_names_path=None):
    """Load a dataset file, optionally attaching names from a second file."""
    with open(path, encoding="utf-8") as f:
        dataset = parse_dataset(f)
    if label_names_path is not None:
        with open(label_names_path, encoding="utf-8") as f:
            names = parse_label_names(f)
        dataset = dataset.with_label_names(names)
    return dataset


def write_dataset_file(dataset, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(write_dataset(dataset))

import numpy as np
import pytest
import scipy.sparse as sp

from labelgraph.data import MultiLabelDataset
from labelgraph.embeddings import WordEmbeddingTable


@pytest.fixture
def tiny_dataset():
    """Three samples, two labels, four features; small enough to eyeball."""
    features = sp.csr_matrix(
        np.array(
            [
                [0.5, 0.0, 1.0, 0.0],
                [0.0, 2.0, 0.0, 0.0],
                [1.0, 0.0, 0.0, 3.0],
            ]
        )
    )
    labels = np.array([[1, 0], [0, 1], [1, 1]], dtype=np.int8)
    return MultiLabelDataset(3, 2, 4, features, labels)


@pytest.fixture
def word_table():
    return WordEmbeddingTable(
        dim=2,
        entries={
            "sea": np.array([1.0, 0.0]),
            "lion": np.array([0.0, 1.0]),
            "cat": np.array([0.1, 0.2]),
            "dog": np.array([0.3, 0.4]),
        },
    )


def make_structured_dataset(n, num_labels, num_features, seed, num_topics=6):
    """Synthetic data with learnable feature->label structure.

    A handful of latent topics each activate a subset of features and a
    subset of labels; every sample mixes two topics. A model that picks up
    the feature-topic correspondence can predict labels well above chance.
    """
    rng = np.random.default_rng(seed)
    topic_features = rng.random((num_topics, num_features)) < 0.25
    topic_labels = rng.random((num_topics, num_labels)) < 0.35
    X = np.zeros((n, num_features))
    Y = np.zeros((n, num_labels), dtype=np.int8)
    for i in range(n):
        topics = rng.choice(num_topics, size=2, replace=False)
        for t in topics:
            X[i] += topic_features[t] * rng.uniform(0.5, 1.5)
            Y[i] |= topic_labels[t].astype(np.int8)
    X += 0.05 * rng.standard_normal((n, num_features))
    return MultiLabelDataset(n, num_labels, num_features, sp.csr_matrix(X), Y)

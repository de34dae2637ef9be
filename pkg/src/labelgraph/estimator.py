"""Scikit-learn style estimator wrapping the full pipeline.

``LabelGraphClassifier`` follows the sklearn contract: hyperparameters are
constructor arguments stored verbatim (so ``get_params``/``set_params``/
``clone`` work), fitted state lives in trailing-underscore attributes, and
``fit``/``predict``/``predict_proba`` accept dense arrays or scipy sparse
matrices. The multi-label target is an (n_samples, n_labels) binary matrix.
"""

from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .data import MultiLabelDataset
from .embeddings import init_label_embeddings, random_label_embeddings
from .errors import ValidationError
from .metrics import binarize, ebf1, evaluate_predictions
from .model import ModelConfig, predict_probabilities
from .train import TrainConfig, train
from .validation import check_feature_matrix, check_label_matrix


class LabelGraphClassifier(BaseEstimator, ClassifierMixin):
    """Multi-label classifier with a message-passing decoder over labels.

    Parameters mirror :class:`ModelConfig`, :class:`TrainConfig`, and the
    loss settings. ``word_vectors`` (a
    :class:`~labelgraph.embeddings.WordEmbeddingTable`) together with
    ``label_names`` anchors the label embeddings to word embeddings; without
    them a seeded random initialization is used. ``label_dim=None`` takes
    the width from the word vectors (default 64 when there are none).
    """

    def __init__(
        self,
        label_dim=None,
        num_layers=4,
        num_heads=2,
        encoder_hidden=256,
        feedforward_hidden=128,
        z_every_block=True,
        gamma_pos=1.0,
        gamma_neg=2.0,
        shift_m=0.05,
        context_weight=0.1,
        clamp_eps=1e-7,
        epochs=50,
        batch_size=32,
        learning_rate=2e-4,
        weight_decay=1e-5,
        adam_beta1=0.9,
        adam_beta2=0.999,
        adam_eps=1e-8,
        select_on="ebF1",
        threshold=0.5,
        label_names=None,
        word_vectors=None,
        seed=0,
    ):
        self.label_dim = label_dim
        self.num_layers = num_layers
        self.num_heads = num_heads
        self.encoder_hidden = encoder_hidden
        self.feedforward_hidden = feedforward_hidden
        self.z_every_block = z_every_block
        self.gamma_pos = gamma_pos
        self.gamma_neg = gamma_neg
        self.shift_m = shift_m
        self.context_weight = context_weight
        self.clamp_eps = clamp_eps
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.adam_beta1 = adam_beta1
        self.adam_beta2 = adam_beta2
        self.adam_eps = adam_eps
        self.select_on = select_on
        self.threshold = threshold
        self.label_names = label_names
        self.word_vectors = word_vectors
        self.seed = seed

    def _resolved_label_dim(self):
        if self.label_dim is not None:
            return self.label_dim
        if self.word_vectors is not None:
            return self.word_vectors.dim
        return 64

    def _model_config(self):
        return ModelConfig(
            label_dim=self._resolved_label_dim(),
            num_layers=self.num_layers,
            num_heads=self.num_heads,
            encoder_hidden=self.encoder_hidden,
            feedforward_hidden=self.feedforward_hidden,
            z_every_block=self.z_every_block,
        )

    def _train_config(self):
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            adam_beta1=self.adam_beta1,
            adam_beta2=self.adam_beta2,
            adam_eps=self.adam_eps,
            seed=self.seed,
            gamma_pos=self.gamma_pos,
            gamma_neg=self.gamma_neg,
            shift_m=self.shift_m,
            context_weight=self.context_weight,
            clamp_eps=self.clamp_eps,
            select_on=self.select_on,
            threshold=self.threshold,
        )

    def _initial_embeddings(self, n_labels):
        if self.word_vectors is not None:
            if self.label_names is None:
                raise ValidationError(
                    "word_vectors requires label_names to build anchors"
                )
            if len(self.label_names) != n_labels:
                raise ValidationError(
                    f"{len(self.label_names)} label names for {n_labels} labels"
                )
            return init_label_embeddings(
                self.label_names, self.word_vectors, self.seed
            )
        return random_label_embeddings(n_labels, self._resolved_label_dim(), self.seed)

    def fit(self, X, Y, eval_set=None):
        """Train on feature matrix X and binary label matrix Y.

        ``eval_set`` is an optional ``(X_val, Y_val)`` pair used for
        best-epoch selection on the ``select_on`` metric.
        """
        X = check_feature_matrix(X)
        Y = check_label_matrix(Y, n_samples=X.shape[0])
        train_set = MultiLabelDataset(
            X.shape[0], Y.shape[1], X.shape[1], X, Y
        )
        val_set = None
        if eval_set is not None:
            X_val = check_feature_matrix(eval_set[0], n_features=X.shape[1])
            Y_val = check_label_matrix(
                eval_set[1], n_labels=Y.shape[1], n_samples=X_val.shape[0]
            )
            val_set = MultiLabelDataset(
                X_val.shape[0], Y_val.shape[1], X_val.shape[1], X_val, Y_val
            )

        emb = self._initial_embeddings(Y.shape[1])
        self.model_config_ = self._model_config()
        self.params_, self.history_ = train(
            train_set, val_set, self.model_config_, self._train_config(), emb
        )
        self.n_features_in_ = X.shape[1]
        self.n_labels_ = Y.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError(
                "this LabelGraphClassifier instance is not fitted yet"
            )

    def predict_proba(self, X):
        """Per-label probabilities, shape (n_samples, n_labels)."""
        self._check_fitted()
        X = check_feature_matrix(X, n_features=self.n_features_in_)
        return predict_probabilities(
            X, self.params_.emb, self.params_, self.model_config_
        )

    def predict(self, X):
        """Binary label matrix at the configured threshold."""
        return binarize(self.predict_proba(X), self.threshold)

    def score(self, X, Y):
        """Example-based F1 (the natural per-sample score for this task)."""
        Y = check_label_matrix(Y)
        return ebf1(Y, self.predict(X))

    def evaluate(self, X, Y):
        """Full metrics report on a labeled set."""
        Y = check_label_matrix(Y)
        return evaluate_predictions(Y, self.predict(X))

"""Noise-aware multi-label classification over a label graph.

The public surface: dataset and embedding file handling, the classifier
(both the sklearn-style estimator and the functional training API), label
noise injectors, and exact evaluation metrics.
"""

from .data import (
    MultiLabelDataset,
    parse_dataset,
    parse_label_names,
    read_dataset,
    write_dataset,
    write_dataset_file,
)
from .embeddings import (
    LabelEmbeddings,
    WordEmbeddingTable,
    context_regularizer,
    init_label_embeddings,
    parse_word_embeddings,
    random_label_embeddings,
    read_word_embeddings,
)
from .errors import (
    ConfigError,
    DataFormatError,
    LabelGraphError,
    NumericalError,
    ValidationError,
)
from .estimator import LabelGraphClassifier
from .losses import LossSpec, asl, asl_probability_gradient, bce, total_loss
from .metrics import (
    MetricsReport,
    binarize,
    ebf1,
    evaluate_predictions,
    maf1,
    mif1,
    top_cooccurrence_distance,
)
from .model import (
    ModelConfig,
    ModelParams,
    attention_weights,
    decoder_forward,
    encode,
    forward_backward,
    init_model_params,
    message_pass,
    predict_probabilities,
)
from .noise import (
    NoiseSpec,
    apply_noise,
    inject_combined,
    inject_positive,
    inject_single_positive,
    inject_uniform,
)
from .train import TrainConfig, adam_step, AdamState, grad_check, train
from .checkpoint import load_checkpoint, save_checkpoint

__version__ = "0.1.0"

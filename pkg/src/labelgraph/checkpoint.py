"""Versioned model checkpoints.

A checkpoint is a numpy ``.npz`` archive holding every named parameter
array, both embedding matrices, the architecture config as JSON, and
optional label names. Arrays are stored raw, so save/load round-trips are
bit-exact.
"""

import json
from dataclasses import asdict

import numpy as np

from .embeddings import LabelEmbeddings
from .errors import DataFormatError
from .model import ModelConfig, ModelParams

FORMAT_VERSION = 1
_PARAM_PREFIX = "param::"


def save_checkpoint(path, params, model_config, label_names=None):
    payload = {
        "format_version": np.int64(FORMAT_VERSION),
        "model_config": json.dumps(asdict(model_config)),
        "num_features": np.int64(params.num_features),
        "label_names": json.dumps(label_names),
        "emb_current": params.emb.current,
        "emb_anchors": params.emb.anchors,
    }
    for name, arr in params.arrays.items():
        payload[_PARAM_PREFIX + name] = arr
    # write through a handle so numpy does not append ".npz" to the path
    with open(path, "wb") as f:
        np.savez(f, **payload)


def load_checkpoint(path):
    """Returns ``(params, model_config, label_names)``."""
    with np.load(path, allow_pickle=False) as archive:
        if "format_version" not in archive:
            raise DataFormatError(f"{path} is not a model checkpoint")
        version = int(archive["format_version"])
        if version != FORMAT_VERSION:
            raise DataFormatError(
                f"checkpoint format {version} not supported "
                f"(this build reads format {FORMAT_VERSION})"
            )
        config = ModelConfig(**json.loads(str(archive["model_config"])))
        label_names = json.loads(str(archive["label_names"]))
        emb = LabelEmbeddings(
            current=archive["emb_current"], anchors=archive["emb_anchors"]
        )
        arrays = {
            key[len(_PARAM_PREFIX):]: archive[key]
            for key in archive.files
            if key.startswith(_PARAM_PREFIX)
        }
        num_features = int(archive["num_features"])
    params = ModelParams(arrays, emb, num_features)
    return params, config, label_names

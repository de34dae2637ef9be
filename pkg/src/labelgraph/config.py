"""Line-based ``key = value`` run configuration with typed keys.

Unknown keys are rejected so typos fail loudly. Values on the command line
(``--set key=value``) override the file. Only keys a command actually
needs are required; the rest fall back to the dataclass defaults.
"""

from .errors import ConfigError


def _parse_bool(text):
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_PATH_KEYS = (
    "train_data",
    "val_data",
    "label_names",
    "word_embeddings",
    "checkpoint",
    "history",
)

SCHEMA = {
    **{key: str for key in _PATH_KEYS},
    "label_dim": int,
    "num_layers": int,
    "num_heads": int,
    "encoder_hidden": int,
    "feedforward_hidden": int,
    "z_every_block": _parse_bool,
    "epochs": int,
    "batch_size": int,
    "learning_rate": float,
    "weight_decay": float,
    "adam_beta1": float,
    "adam_beta2": float,
    "adam_eps": float,
    "seed": int,
    "gamma_pos": float,
    "gamma_neg": float,
    "shift_m": float,
    "context_weight": float,
    "clamp_eps": float,
    "select_on": str,
    "threshold": float,
    "num_labels": int,
    "num_features": int,
}

MODEL_KEYS = (
    "label_dim",
    "num_layers",
    "num_heads",
    "encoder_hidden",
    "feedforward_hidden",
    "z_every_block",
)

TRAIN_KEYS = (
    "epochs",
    "batch_size",
    "learning_rate",
    "weight_decay",
    "adam_beta1",
    "adam_beta2",
    "adam_eps",
    "seed",
    "gamma_pos",
    "gamma_neg",
    "shift_m",
    "context_weight",
    "clamp_eps",
    "select_on",
    "threshold",
)


def _set_entry(config, key, raw, where):
    if key not in SCHEMA:
        raise ConfigError(f"{where}: unknown key {key!r}")
    try:
        config[key] = SCHEMA[key](raw.strip())
    except ValueError as err:
        raise ConfigError(f"{where}: bad value for {key!r}: {err}") from None


def parse_config_text(text, where="config"):
    config = {}
    for i, line in enumerate(text.splitlines()):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{where} line {i + 1}: expected 'key = value'")
        key, _, raw = stripped.partition("=")
        _set_entry(config, key.strip(), raw, f"{where} line {i + 1}")
    return config


def load_config(path=None, overrides=()):
    """Read a config file (optional) and apply ``key=value`` overrides."""
    config = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as f:
                config = parse_config_text(f.read(), where=path)
        except OSError as err:
            raise ConfigError(f"cannot read config {path}: {err}") from None
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        key, _, raw = item.partition("=")
        _set_entry(config, key.strip(), raw, f"override {item!r}")
    return config


def subset(config, keys):
    """The present entries among ``keys``, for dataclass construction."""
    return {key: config[key] for key in keys if key in config}

"""Command-line interface.

Subcommands: ``inject-noise``, ``train``, ``evaluate``, ``embed-dist``,
``grad-check``. Exit codes: 0 success, 1 usage or configuration error,
2 data error, 3 numerical failure.
"""

import argparse
import sys

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import MODEL_KEYS, TRAIN_KEYS, load_config, subset
from .data import MultiLabelDataset, parse_label_names, read_dataset, write_dataset_file
from .embeddings import init_label_embeddings, random_label_embeddings, read_word_embeddings
from .errors import ConfigError, DataFormatError, NumericalError, ValidationError
from .losses import LossSpec
from .metrics import binarize, evaluate_predictions, top_cooccurrence_distance
from .model import ModelConfig, predict_probabilities
from .noise import NoiseSpec, apply_noise
from .train import TrainConfig, grad_check, train, write_history_csv


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    parser = _Parser(
        prog="labelgraph",
        description="Noise-aware multi-label classification toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    noise = sub.add_parser("inject-noise", help="corrupt a dataset's labels")
    noise.add_argument("input", help="dataset file to corrupt")
    noise.add_argument("output", help="where to write the corrupted dataset")
    noise.add_argument(
        "--kind",
        required=True,
        choices=("uniform", "positive", "single-positive", "combined"),
    )
    noise.add_argument("--rate", type=float, default=None)
    noise.add_argument("--seed", type=int, default=0)

    tr = sub.add_parser("train", help="train a model from a config file")
    tr.add_argument("--config", required=True)
    tr.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config entry",
    )

    ev = sub.add_parser("evaluate", help="score a checkpoint on a dataset")
    ev.add_argument("--model", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--threshold", type=float, default=0.5)
    ev.add_argument("--per-label", default=None, help="also write a per-label CSV")

    ed = sub.add_parser(
        "embed-dist",
        help="normalized embedding distance of the most co-occurring label pairs",
    )
    ed.add_argument("--model", required=True)
    ed.add_argument("--data", required=True, help="training dataset for pair counts")
    ed.add_argument("-k", type=int, default=100)

    gc = sub.add_parser("grad-check", help="verify analytic gradients")
    gc.add_argument("--config", default=None)
    gc.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE"
    )
    return parser


def cmd_inject_noise(args):
    kind = args.kind.replace("-", "_")
    if kind in ("uniform", "positive") and args.rate is None:
        raise ConfigError(f"--rate is required for --kind {args.kind}")
    dataset = read_dataset(args.input)
    spec = NoiseSpec(kind=kind, rate=args.rate, seed=args.seed)
    corrupted = apply_noise(dataset.labels, spec)
    out = MultiLabelDataset(
        dataset.num_samples,
        dataset.num_labels,
        dataset.num_features,
        dataset.features,
        corrupted,
    )
    write_dataset_file(out, args.output)
    touched = int((corrupted != dataset.labels).any(axis=1).sum())
    print(
        f"wrote {args.output}: {touched}/{dataset.num_samples} rows touched, "
        f"positives {int(dataset.labels.sum())} -> {int(corrupted.sum())}"
    )
    return 0


def _build_embeddings(cfg, num_labels, seed):
    """Anchored embeddings when word vectors are configured, random otherwise.

    Returns ``(emb, label_names)``.
    """
    context_weight = cfg.get("context_weight", TrainConfig.context_weight)
    has_words = "word_embeddings" in cfg
    has_names = "label_names" in cfg
    if context_weight > 0 and not (has_words and has_names):
        raise ConfigError(
            "context_weight > 0 anchors label embeddings to word embeddings: "
            "set both 'word_embeddings' and 'label_names' in the config "
            "(or set context_weight = 0)"
        )
    names = None
    if has_names:
        with open(cfg["label_names"], encoding="utf-8") as f:
            names = parse_label_names(f)
        if len(names) != num_labels:
            raise DataFormatError(
                f"{len(names)} label names for {num_labels} labels"
            )
    if has_words:
        if names is None:
            raise ConfigError("word_embeddings requires label_names")
        table = read_word_embeddings(cfg["word_embeddings"])
        if "label_dim" in cfg and cfg["label_dim"] != table.dim:
            raise ConfigError(
                f"label_dim {cfg['label_dim']} != word embedding dim {table.dim}"
            )
        return init_label_embeddings(names, table, seed), names
    dim = cfg.get("label_dim", ModelConfig.label_dim)
    return random_label_embeddings(num_labels, dim, seed), names


def cmd_train(args):
    cfg = load_config(args.config, args.overrides)
    for required in ("train_data", "checkpoint"):
        if required not in cfg:
            raise ConfigError(f"config must set {required!r}")

    train_set = read_dataset(cfg["train_data"])
    val_set = read_dataset(cfg["val_data"]) if "val_data" in cfg else None

    train_config = TrainConfig(**subset(cfg, TRAIN_KEYS))
    emb, names = _build_embeddings(cfg, train_set.num_labels, train_config.seed)
    model_kwargs = subset(cfg, MODEL_KEYS)
    model_kwargs["label_dim"] = emb.dim
    model_config = ModelConfig(**model_kwargs)

    params, history = train(train_set, val_set, model_config, train_config, emb)
    save_checkpoint(cfg["checkpoint"], params, model_config, names)
    if "history" in cfg:
        write_history_csv(history, cfg["history"])
    last = history[-1]
    print(
        f"trained {len(history)} epochs, final train loss {last['train_loss']:.6f}, "
        f"checkpoint -> {cfg['checkpoint']}"
    )
    return 0


def cmd_evaluate(args):
    params, model_config, names = load_checkpoint(args.model)
    dataset = read_dataset(args.data)
    if dataset.num_labels != params.num_labels:
        raise ValidationError(
            f"dataset has {dataset.num_labels} labels, model {params.num_labels}"
        )
    probs = predict_probabilities(
        dataset.features, params.emb, params, model_config
    )
    report = evaluate_predictions(dataset.labels, binarize(probs, args.threshold))
    print(report.summary_line())
    if args.per_label:
        with open(args.per_label, "w", encoding="utf-8") as f:
            f.write("label_index,name,tp,fp,fn,f1\n")
            for l in range(params.num_labels):
                name = names[l] if names else ""
                f.write(
                    f"{l},{name},{report.tp[l]},{report.fp[l]},"
                    f"{report.fn[l]},{report.f1_per_label[l]!r}\n"
                )
    return 0


def cmd_embed_dist(args):
    params, _, _ = load_checkpoint(args.model)
    dataset = read_dataset(args.data)
    ratio = top_cooccurrence_distance(params.emb, dataset.labels, k=args.k)
    print(f"normalized_top_pair_distance={ratio:.6f}")
    return 0


def cmd_grad_check(args):
    cfg = load_config(args.config, args.overrides)
    model_config = ModelConfig(
        label_dim=cfg.get("label_dim", 8),
        num_layers=cfg.get("num_layers", 2),
        num_heads=cfg.get("num_heads", 2),
        encoder_hidden=cfg.get("encoder_hidden", 16),
        feedforward_hidden=cfg.get("feedforward_hidden", 16),
        z_every_block=cfg.get("z_every_block", True),
    )
    loss_spec = LossSpec(
        gamma_pos=cfg.get("gamma_pos", 1.0),
        gamma_neg=cfg.get("gamma_neg", 2.0),
        shift_m=cfg.get("shift_m", 0.05),
        context_weight=cfg.get("context_weight", 0.1),
        clamp_eps=cfg.get("clamp_eps", 1e-7),
    )
    report = grad_check(
        model_config,
        loss_spec,
        seed=cfg.get("seed", 0),
        num_labels=cfg.get("num_labels", 5),
        num_features=cfg.get("num_features", 6),
        batch_size=cfg.get("batch_size", 4),
    )
    for line in report.lines():
        print(line)
    if not report.passed:
        print("gradient check FAILED")
        return 3
    print(f"gradient check passed (all arrays < {report.tolerance:g} rel err)")
    return 0


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {
            "inject-noise": cmd_inject_noise,
            "train": cmd_train,
            "evaluate": cmd_evaluate,
            "embed-dist": cmd_embed_dist,
            "grad-check": cmd_grad_check,
        }[args.command]
        return handler(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (DataFormatError, ValidationError, OSError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return 2
    except NumericalError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

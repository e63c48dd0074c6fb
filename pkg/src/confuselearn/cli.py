"""Command-line front end: dataset synthesis, psi estimation, training,
evaluation, and confusing-probability diagnostics.

Every command takes ``--config <ini-file>`` plus ``--set section.key=value``
overrides and ``--seed``. Exit codes: 0 success, 2 config error,
3 numerical abort, 4 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .data import Dataset
from .metrics import auroc, per_class_accuracy
from .psi import estimate_psi, load_psi, save_psi
from .synth import (
    corrupt_cluster_vote,
    corrupt_pairflip,
    corrupt_weak_model,
    noise_report,
    synth_gaussian_dataset,
)
from .trainer import (
    NumericalAbortError,
    TrainConfig,
    TrainState,
    load_eta_dump,
    save_eta_dump,
    train,
    train_clean_mix,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


class ConfigError(Exception):
    pass


# ----------------------------------------------------------------- config

_TRAIN_KEYS = {
    "mode", "eta_init", "alpha1", "alpha2", "epsilon", "epochs", "batch_size",
    "eta_update_start_epoch", "eta_update_every_epochs", "eta_gradient_mode",
    "eta_updates_enabled", "oversample", "seed", "hidden_sizes", "activation",
    "momentum", "weight_decay", "lr_schedule", "psi_epochs",
}

_ALLOWED_KEYS = {
    "synth": {
        "dataset": {
            "classes", "per_class_train", "per_class_val", "per_class_test",
            "dim", "separation", "seed",
        },
        "noise": {
            "protocol", "target_rate", "rate_tolerance", "hidden_sizes",
            "epochs", "learning_rate", "batch_size", "max_epochs", "k",
            "pairs", "rate", "seed",
        },
        "output": {"dir"},
    },
    "estimate-psi": {
        "data": {"train"},
        "train": _TRAIN_KEYS,
        "output": {"psi"},
    },
    "train": {
        "data": {"train", "val", "test", "psi", "clean"},
        "train": _TRAIN_KEYS,
        "output": {"dir"},
    },
    "eval": {
        "eval": {"checkpoint", "dataset", "out"},
    },
    "eta-report": {
        "report": {"eta", "dataset", "dir", "top_k"},
    },
}


def load_config(path, sets, command):
    parser = configparser.ConfigParser()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser.read(path)
    for assignment in sets or []:
        if "=" not in assignment or "." not in assignment.split("=", 1)[0]:
            raise ConfigError(f"--set expects section.key=value, got {assignment!r}")
        target, value = assignment.split("=", 1)
        section, key = target.split(".", 1)
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section.strip(), key.strip(), value.strip())
    allowed = _ALLOWED_KEYS[command]
    for section in parser.sections():
        if section not in allowed:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in allowed[section]:
                raise ConfigError(f"unknown config key [{section}] {key}")
    return parser


def _get(parser, section, key, default=None, convert=str):
    if parser.has_option(section, key):
        raw = parser.get(section, key)
        try:
            return convert(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for [{section}] {key}: {raw!r}") from exc
    return default


def _bool(raw):
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def _int_tuple(raw):
    return tuple(int(v) for v in raw.split(",") if v.strip())


def _schedule(raw):
    steps = []
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        epoch, divisor = part.split(":")
        steps.append((int(epoch), float(divisor)))
    return tuple(steps)


def _pairs(raw):
    pairs = []
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        source, target = part.split(">")
        pairs.append((int(source), int(target)))
    return pairs


def _train_config(parser, seed_override=None):
    seed = _get(parser, "train", "seed", 0, int)
    if seed_override is not None:
        seed = seed_override
    psi_epochs = _get(parser, "train", "psi_epochs", None, int)
    try:
        return TrainConfig(
            eta_init=_get(parser, "train", "eta_init", 0.01, float),
            alpha1=_get(parser, "train", "alpha1", 0.2, float),
            alpha2=_get(parser, "train", "alpha2", 0.01, float),
            epsilon=_get(parser, "train", "epsilon", 1e-4, float),
            epochs=_get(parser, "train", "epochs", 60, int),
            batch_size=_get(parser, "train", "batch_size", 32, int),
            eta_update_start_epoch=_get(
                parser, "train", "eta_update_start_epoch", 15, int
            ),
            eta_update_every_epochs=_get(
                parser, "train", "eta_update_every_epochs", 1, int
            ),
            eta_gradient_mode=_get(parser, "train", "eta_gradient_mode", "paper"),
            eta_updates_enabled=_get(
                parser, "train", "eta_updates_enabled", True, _bool
            ),
            oversample=_get(parser, "train", "oversample", False, _bool),
            seed=seed,
            hidden_sizes=_get(parser, "train", "hidden_sizes", (64, 64), _int_tuple),
            activation=_get(parser, "train", "activation", "softplus"),
            momentum=_get(parser, "train", "momentum", 0.9, float),
            weight_decay=_get(parser, "train", "weight_decay", 1e-4, float),
            lr_schedule=_get(parser, "train", "lr_schedule", (), _schedule),
            psi_epochs=psi_epochs,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _dump_resolved(path, sections):
    """Echo the fully resolved configuration so a run can be reproduced from it."""
    out = configparser.ConfigParser()
    for section, values in sections.items():
        out.add_section(section)
        for key, value in values.items():
            if value is None:
                continue
            out.set(section, key, _format_value(value))
    with open(path, "w") as fh:
        out.write(fh)


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        if value and isinstance(value[0], (tuple, list)):
            return ",".join(f"{int(e)}:{g!r}" for e, g in value)
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _config_sections_from_train(config, mode):
    values = {
        "mode": mode,
        "eta_init": config.eta_init,
        "alpha1": config.alpha1,
        "alpha2": config.alpha2,
        "epsilon": config.epsilon,
        "epochs": config.epochs,
        "batch_size": config.batch_size,
        "eta_update_start_epoch": config.eta_update_start_epoch,
        "eta_update_every_epochs": config.eta_update_every_epochs,
        "eta_gradient_mode": config.eta_gradient_mode,
        "eta_updates_enabled": config.eta_updates_enabled,
        "oversample": config.oversample,
        "seed": config.seed,
        "hidden_sizes": config.hidden_sizes,
        "activation": config.activation,
        "momentum": config.momentum,
        "weight_decay": config.weight_decay,
        "psi_epochs": config.psi_epochs,
    }
    if config.lr_schedule:
        values["lr_schedule"] = config.lr_schedule
    return values


# --------------------------------------------------------------- commands


def cmd_synth(args):
    parser = load_config(args.config, args.set, "synth")
    seed = args.seed if args.seed is not None else _get(
        parser, "dataset", "seed", 0, int
    )
    classes = _get(parser, "dataset", "classes", 4, int)
    dim = _get(parser, "dataset", "dim", 2, int)
    separation = _get(parser, "dataset", "separation", 4.0, float)
    per_class = {
        "train": _get(parser, "dataset", "per_class_train", 250, int),
        "val": _get(parser, "dataset", "per_class_val", 100, int),
        "test": _get(parser, "dataset", "per_class_test", 250, int),
    }
    out_dir = Path(_get(parser, "output", "dir", "data"))
    out_dir.mkdir(parents=True, exist_ok=True)

    splits = {}
    for offset, split in enumerate(("train", "val", "test")):
        splits[split] = synth_gaussian_dataset(
            classes, per_class[split], dim, separation,
            seed=[seed, offset], split=split,
        )

    protocol = _get(parser, "noise", "protocol", "none")
    noise_seed = _get(parser, "noise", "seed", seed, int)
    train_ds = splits["train"]
    if protocol == "none":
        pass
    elif protocol == "weak-model":
        train_ds = corrupt_weak_model(
            train_ds,
            hidden_sizes=_get(parser, "noise", "hidden_sizes", (4,), _int_tuple),
            epochs=_get(parser, "noise", "epochs", 2, int),
            learning_rate=_get(parser, "noise", "learning_rate", 0.01, float),
            batch_size=_get(parser, "noise", "batch_size", 32, int),
            seed=noise_seed,
            target_rate=_get(parser, "noise", "target_rate", None, float),
            rate_tolerance=_get(parser, "noise", "rate_tolerance", 0.05, float),
            max_epochs=_get(parser, "noise", "max_epochs", 40, int),
        )
    elif protocol == "cluster-vote":
        train_ds = corrupt_cluster_vote(
            train_ds, k=_get(parser, "noise", "k", 20, int), seed=noise_seed
        )
    elif protocol == "pair-flip":
        pairs = _get(parser, "noise", "pairs", None, _pairs)
        if pairs is None:
            raise ConfigError("pair-flip protocol needs [noise] pairs")
        train_ds = corrupt_pairflip(
            train_ds, pairs, _get(parser, "noise", "rate", 0.3, float),
            seed=noise_seed,
        )
    else:
        raise ConfigError(f"unknown noise protocol {protocol!r}")
    splits["train"] = train_ds

    for split, ds in splits.items():
        ds.save(out_dir / split)
    report = noise_report(train_ds)
    with open(out_dir / "noise_report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _dump_resolved(out_dir / "config.resolved", {
        "dataset": {
            "classes": classes, "dim": dim, "separation": separation,
            "seed": seed,
            "per_class_train": per_class["train"],
            "per_class_val": per_class["val"],
            "per_class_test": per_class["test"],
        },
        "noise": {
            "protocol": protocol,
            "seed": noise_seed,
            **{k: v for k, v in (train_ds.noise_spec or {}).items()
               if k not in ("protocol", "seed")},
        },
        "output": {"dir": str(out_dir)},
    })
    print(f"wrote {out_dir} (train noise rate {report['noise_rate']:.4f})")
    return EXIT_OK


def cmd_estimate_psi(args):
    parser = load_config(args.config, args.set, "estimate-psi")
    train_path = _get(parser, "data", "train")
    if train_path is None:
        raise ConfigError("missing [data] train")
    out_path = _get(parser, "output", "psi", "psi.csv")
    config = _train_config(parser, args.seed)
    dataset = Dataset.load(train_path)
    psi = estimate_psi(dataset, config)
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    save_psi(psi, out_path)
    print(f"wrote {out_path} (mean psi {float(np.mean(psi)):.4f})")
    return EXIT_OK


def cmd_train(args):
    parser = load_config(args.config, args.set, "train")
    train_path = _get(parser, "data", "train")
    if train_path is None:
        raise ConfigError("missing [data] train")
    mode = _get(parser, "train", "mode", "method")
    if mode not in ("method", "naive", "clean-mix"):
        raise ConfigError(f"unknown mode {mode!r}")
    config = _train_config(parser, args.seed)
    run_dir = Path(_get(parser, "output", "dir", "runs/run"))
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "checkpoints").mkdir(exist_ok=True)
    (run_dir / "plots").mkdir(exist_ok=True)

    dataset = Dataset.load(train_path)
    eval_sets = {}
    for name in ("val", "test"):
        path = _get(parser, "data", name)
        if path is not None:
            eval_sets[name] = Dataset.load(path)

    psi_path = _get(parser, "data", "psi")
    if psi_path is not None and Path(psi_path).exists():
        psi = load_psi(psi_path)
        if len(psi) != len(dataset):
            raise ConfigError("psi file length does not match the training set")
    else:
        psi = estimate_psi(dataset, config)
        save_psi(psi, run_dir / "psi.csv")

    data_values = {"train": train_path}
    for name in ("val", "test"):
        if name in eval_sets:
            data_values[name] = _get(parser, "data", name)
    if psi_path is not None:
        data_values["psi"] = psi_path

    if mode == "clean-mix":
        clean_path = _get(parser, "data", "clean")
        if clean_path is None:
            raise ConfigError("clean-mix mode needs [data] clean")
        clean = Dataset.load(clean_path)
        data_values["clean"] = clean_path
        state = train_clean_mix(
            dataset, clean, psi, config,
            eval_sets=eval_sets,
            metrics_path=run_dir / "metrics.jsonl",
            run_dir=run_dir,
        )
        eta_slots = len(dataset)
    else:
        state = train(
            dataset, psi, config,
            mode="naive" if mode == "naive" else "method",
            eval_sets=eval_sets,
            metrics_path=run_dir / "metrics.jsonl",
            run_dir=run_dir,
        )
        eta_slots = len(dataset)

    state.save(run_dir / "checkpoints" / "final.json")
    save_eta_dump(state, dataset, run_dir / "eta.csv", slot_count=eta_slots)
    _dump_resolved(run_dir / "config.resolved", {
        "data": data_values,
        "train": _config_sections_from_train(config, mode),
        "output": {"dir": str(run_dir)},
    })
    final = state.history[-1] if state.history else {}
    summary = ", ".join(
        f"{k}={final[k]:.4f}" for k in ("train_acc_vs_noisy", "val_acc", "test_acc")
        if k in final
    )
    print(f"run complete: {run_dir} ({summary})")
    return EXIT_OK


def cmd_eval(args):
    parser = load_config(args.config, args.set, "eval")
    checkpoint_path = _get(parser, "eval", "checkpoint")
    dataset_path = _get(parser, "eval", "dataset")
    if checkpoint_path is None or dataset_path is None:
        raise ConfigError("eval needs [eval] checkpoint and dataset")
    state = TrainState.load(checkpoint_path)
    dataset = Dataset.load(dataset_path)
    if dataset.dim != state.model.input_dim:
        raise ConfigError(
            f"dataset dimension {dataset.dim} does not match "
            f"model input {state.model.input_dim}"
        )
    predicted = state.model.forward(dataset.features).argmax(axis=1)
    report = {
        "instances": len(dataset),
        "noisy_label_accuracy": float(np.mean(predicted == dataset.noisy_labels)),
        "per_class_vs_noisy": per_class_accuracy(
            predicted, dataset.noisy_labels, dataset.class_count
        ),
    }
    if dataset.clean_labels is not None:
        report["clean_label_accuracy"] = float(
            np.mean(predicted == dataset.clean_labels)
        )
        report["per_class_vs_clean"] = per_class_accuracy(
            predicted, dataset.clean_labels, dataset.class_count
        )
    out = json.dumps(report, indent=2, sort_keys=True)
    print(out)
    out_path = _get(parser, "eval", "out")
    if out_path is not None:
        with open(out_path, "w") as fh:
            fh.write(out + "\n")
    return EXIT_OK


def _write_histogram(path, values, bins):
    counts, edges = np.histogram(values, bins=bins, range=(0.0, 1.0))
    centers = (edges[:-1] + edges[1:]) / 2.0
    with open(path, "w") as fh:
        fh.write("# gnuplot data: column 1 = eta bin center, column 2 = count\n")
        for center, count in zip(centers, counts):
            fh.write(f"{float(center)!r} {int(count)}\n")


def cmd_eta_report(args):
    parser = load_config(args.config, args.set, "eta-report")
    eta_path = _get(parser, "report", "eta")
    dataset_path = _get(parser, "report", "dataset")
    if eta_path is None or dataset_path is None:
        raise ConfigError("eta-report needs [report] eta and dataset")
    top_k = _get(parser, "report", "top_k", 20, int)
    out_dir = Path(_get(parser, "report", "dir", "eta_report"))
    out_dir.mkdir(parents=True, exist_ok=True)
    dump = load_eta_dump(eta_path)
    dataset = Dataset.load(dataset_path)
    eta = dump["eta"]
    order = np.argsort(-eta, kind="stable")
    report = {
        "instances": len(eta),
        "mean_eta": float(eta.mean()),
        "top_k_indices": [int(i) for i in order[:top_k]],
    }
    if dataset.clean_labels is not None:
        corrupted = dataset.noisy_labels != dataset.clean_labels
        report["mean_eta_clean"] = float(eta[~corrupted].mean())
        report["mean_eta_corrupted"] = (
            float(eta[corrupted].mean()) if corrupted.any() else None
        )
        if corrupted.any() and not corrupted.all():
            report["eta_auroc"] = auroc(eta, corrupted)
        _write_histogram(out_dir / "eta_hist_clean.dat", eta[~corrupted], bins=20)
        _write_histogram(out_dir / "eta_hist_corrupted.dat", eta[corrupted], bins=20)
    else:
        warnings.warn("clean labels absent; AUROC omitted", stacklevel=2)
        _write_histogram(out_dir / "eta_hist_all.dat", eta, bins=20)
    with open(out_dir / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


# ------------------------------------------------------------------- main


def build_parser():
    parser = argparse.ArgumentParser(
        prog="confuselearn",
        description="Noise-robust training with learned confusing probabilities",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    handlers = {
        "synth": cmd_synth,
        "estimate-psi": cmd_estimate_psi,
        "train": cmd_train,
        "eval": cmd_eval,
        "eta-report": cmd_eta_report,
    }
    for name, handler in handlers.items():
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True)
        cmd.add_argument("--set", action="append", default=[],
                         metavar="SECTION.KEY=VALUE")
        cmd.add_argument("--seed", type=int, default=None)
        cmd.set_defaults(handler=handler)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalAbortError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        if exc.snapshot_path is not None:
            print(f"snapshot: {exc.snapshot_path}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

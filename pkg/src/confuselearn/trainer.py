"""Mini-batch alternating optimization of the classifier and confusing probabilities.

Each iteration fetches a mini-batch, re-estimates the true-label posterior
(predicting step), optionally takes one projected-gradient-ascent step on
the per-instance confusing probabilities, and then updates the classifier
with the posteriors as soft targets (updating step). Runs are bitwise
reproducible from (config, dataset, psi, seed).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset
from .metrics import auroc
from .mlp import OptimizerConfig, SoftmaxMLP
from .posterior import (
    eta_gradient_exact,
    eta_gradient_paper,
    lower_bound,
    project_eta,
    true_label_posterior,
)
from .validation import one_hot

TRAIN_CHECKPOINT_FORMAT = "confuselearn-train-v1"


class NumericalAbortError(RuntimeError):
    """Training produced non-finite parameters; a diagnostic snapshot was written."""

    def __init__(self, message, snapshot_path=None):
        super().__init__(message)
        self.snapshot_path = snapshot_path


@dataclass(frozen=True)
class TrainConfig:
    """All hyperparameters of the alternating-optimization run.

    ``alpha1`` is the learning rate for the confusing probabilities and
    ``alpha2`` the one for classifier weights. Confusing probabilities are
    updated in every batch of epochs satisfying the start/cadence rule.
    """

    eta_init: float = 0.01
    alpha1: float = 1.0
    alpha2: float = 3e-4
    epsilon: float = 1e-4
    epochs: int = 60
    batch_size: int = 32
    eta_update_start_epoch: int = 3
    eta_update_every_epochs: int = 1
    eta_gradient_mode: str = "paper"  # "paper" or "exact"
    eta_updates_enabled: bool = True
    oversample: bool = False
    seed: int = 0
    hidden_sizes: tuple[int, ...] = (64, 64)
    activation: str = "softplus"
    momentum: float = 0.9
    weight_decay: float = 1e-4
    lr_schedule: tuple[tuple[int, float], ...] = ((40, 10.0),)
    psi_epochs: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.eta_init <= 1.0:
            raise ValueError("eta_init must lie in [0, 1]")
        if self.alpha1 <= 0 or self.alpha2 <= 0:
            raise ValueError("learning rates must be > 0")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.eta_update_every_epochs < 1:
            raise ValueError("eta update cadence must be >= 1")
        if self.eta_gradient_mode not in ("paper", "exact"):
            raise ValueError("eta_gradient_mode must be 'paper' or 'exact'")
        object.__setattr__(self, "hidden_sizes", tuple(self.hidden_sizes))
        object.__setattr__(
            self, "lr_schedule", tuple((int(e), float(d)) for e, d in self.lr_schedule)
        )
        self.optimizer()  # validate schedule/momentum/decay eagerly

    def optimizer(self):
        return OptimizerConfig(
            learning_rate=self.alpha2,
            momentum=self.momentum,
            weight_decay=self.weight_decay,
            schedule=self.lr_schedule,
        )


def cifar_reference_config():
    """Schedule used for the full-scale CIFAR runs (not desk-scale defaults)."""
    return TrainConfig(
        eta_init=0.01,
        alpha1=0.7,
        alpha2=0.05,
        epochs=160,
        batch_size=256,
        eta_update_start_epoch=35,
        eta_update_every_epochs=5,
        momentum=0.9,
        weight_decay=1e-4,
        lr_schedule=((40, 10.0), (80, 10.0), (120, 10.0)),
    )


@dataclass
class TrainState:
    """Final model plus per-instance noise state and the metric history."""

    model: SoftmaxMLP
    eta: np.ndarray
    psi: np.ndarray
    epoch: int
    history: list = field(default_factory=list)
    config: TrainConfig | None = None
    rng_state: dict | None = None

    def save(self, path):
        payload = {
            "format": TRAIN_CHECKPOINT_FORMAT,
            "model": self.model.to_dict(),
            "eta": [float(v) for v in self.eta],
            "psi": [float(v) for v in self.psi],
            "epoch": self.epoch,
            "rng_state": self.rng_state,
        }
        with open(Path(path), "w") as fh:
            json.dump(payload, fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(Path(path)) as fh:
            payload = json.load(fh)
        if payload.get("format") != TRAIN_CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint format {payload.get('format')!r}")
        return cls(
            model=SoftmaxMLP.from_dict(payload["model"]),
            eta=np.asarray(payload["eta"], dtype=np.float64),
            psi=np.asarray(payload["psi"], dtype=np.float64),
            epoch=payload["epoch"],
            rng_state=payload.get("rng_state"),
        )


def oversample_minority(dataset, seed=0):
    """Duplicate minority noisy-label classes up to the majority class count.

    Returns (dataset, slot_map): ``slot_map[i]`` is the index of row i's
    original instance, so duplicates share one confusing-probability slot.
    """
    rng = np.random.default_rng(seed)
    counts = np.bincount(dataset.noisy_labels, minlength=dataset.class_count)
    target = counts.max()
    extra = []
    for j in range(dataset.class_count):
        deficit = int(target - counts[j])
        if deficit <= 0 or counts[j] == 0:
            continue
        members = np.flatnonzero(dataset.noisy_labels == j)
        extra.append(rng.choice(members, size=deficit, replace=True))
    slot_map = np.arange(len(dataset))
    if extra:
        slot_map = np.concatenate([slot_map, *extra])
    oversampled = Dataset(
        features=dataset.features[slot_map],
        noisy_labels=dataset.noisy_labels[slot_map],
        class_count=dataset.class_count,
        clean_labels=(
            dataset.clean_labels[slot_map] if dataset.clean_labels is not None else None
        ),
        trusted_clean_mask=(
            dataset.trusted_clean_mask[slot_map]
            if dataset.trusted_clean_mask is not None
            else None
        ),
        split=dataset.split,
        noise_spec=dataset.noise_spec,
    )
    return oversampled, slot_map


def _eta_step(eta, q, noisy, psi, config):
    if config.eta_gradient_mode == "exact":
        grad = eta_gradient_exact(q, noisy, eta, psi)
    else:
        grad = eta_gradient_paper(q, noisy, eta, psi, epsilon=config.epsilon)
    return project_eta(eta + config.alpha1 * grad)


def _epoch_metrics(model, dataset, eta, psi, slot_map, config, epoch, mode,
                   eval_sets, clean_mask):
    record = {"epoch": epoch, "alpha1": config.alpha1,
              "alpha2_effective": config.optimizer().rate_at(epoch)}
    probs = model.forward(dataset.features)
    predicted = probs.argmax(axis=1)
    record["train_acc_vs_noisy"] = float(
        np.mean(predicted == dataset.noisy_labels)
    )
    for name, ds in (eval_sets or {}).items():
        if ds is None:
            continue
        labels = ds.clean_labels if ds.clean_labels is not None else ds.noisy_labels
        record[f"{name}_acc"] = float(
            np.mean(model.forward(ds.features).argmax(axis=1) == labels)
        )
    if mode == "method":
        row_eta = eta[slot_map]
        row_psi = psi[slot_map]
        q = true_label_posterior(probs, dataset.noisy_labels, row_eta, row_psi)
        record["lower_bound"] = lower_bound(
            q, probs, dataset.noisy_labels, row_eta, row_psi
        )
        if dataset.clean_labels is not None:
            corrupted = dataset.noisy_labels != dataset.clean_labels
            if clean_mask is not None:
                # clean-mix: diagnostics cover the noisy pool only
                corrupted = corrupted[~clean_mask[slot_map]]
                row_eta = row_eta[~clean_mask[slot_map]]
            if corrupted.any() and not corrupted.all():
                record["mean_eta_clean"] = float(row_eta[~corrupted].mean())
                record["mean_eta_corrupted"] = float(row_eta[corrupted].mean())
                record["eta_auroc"] = auroc(row_eta, corrupted)
    return record


def _run(dataset, psi, config, *, mode, slot_map, pinned, rng, eval_sets=None,
         metrics_path=None, run_dir=None, batch_iter=None):
    """Shared inner loop for plain, naive, and clean-mix training."""
    n_rows = len(dataset)
    n_slots = len(psi)
    model = SoftmaxMLP(
        dataset.dim,
        dataset.class_count,
        hidden_sizes=config.hidden_sizes,
        activation=config.activation,
        seed=config.seed,
    )
    opt = config.optimizer()
    eta = np.full(n_slots, config.eta_init, dtype=np.float64)
    if pinned is not None:
        eta[pinned] = 0.0
    onehot_noisy = one_hot(dataset.noisy_labels, dataset.class_count)
    history = []
    metrics_fh = open(metrics_path, "w") if metrics_path else None
    try:
        for epoch in range(config.epochs):
            update_eta = (
                mode == "method"
                and config.eta_updates_enabled
                and epoch >= config.eta_update_start_epoch
                and (epoch - config.eta_update_start_epoch)
                % config.eta_update_every_epochs
                == 0
            )
            if batch_iter is not None:
                batches = batch_iter(rng)
            else:
                perm = rng.permutation(n_rows)
                batches = (
                    perm[start : start + config.batch_size]
                    for start in range(0, n_rows, config.batch_size)
                )
            for idx in batches:
                slots = slot_map[idx]
                h = model.forward(dataset.features[idx])
                if mode == "naive":
                    q = onehot_noisy[idx]
                else:
                    q = true_label_posterior(
                        h, dataset.noisy_labels[idx], eta[slots], psi[slots]
                    )
                if update_eta:
                    free = (
                        np.ones(len(idx), dtype=bool)
                        if pinned is None
                        else ~pinned[slots]
                    )
                    if free.any():
                        stepped = _eta_step(
                            eta[slots][free],
                            q[free],
                            dataset.noisy_labels[idx][free],
                            psi[slots][free],
                            config,
                        )
                        eta[slots[free]] = stepped
                grads = model.soft_target_gradient(dataset.features[idx], q)
                model.apply_update(grads, opt, epoch)
                if not model.parameters_finite():
                    snapshot = None
                    if run_dir is not None:
                        snapshot = Path(run_dir) / "abort_snapshot.json"
                        TrainState(
                            model=model, eta=eta, psi=psi, epoch=epoch
                        ).save(snapshot)
                    raise NumericalAbortError(
                        f"non-finite parameters at epoch {epoch}",
                        snapshot_path=snapshot,
                    )
            record = _epoch_metrics(
                model, dataset, eta, psi, slot_map, config, epoch, mode,
                eval_sets, pinned,
            )
            history.append(record)
            if metrics_fh is not None:
                metrics_fh.write(json.dumps(record, sort_keys=True) + "\n")
    finally:
        if metrics_fh is not None:
            metrics_fh.close()
    return TrainState(
        model=model,
        eta=eta,
        psi=psi,
        epoch=config.epochs,
        history=history,
        config=config,
        rng_state=rng.bit_generator.state,
    )


def train(dataset, psi, config, *, mode="method", eval_sets=None,
          metrics_path=None, run_dir=None):
    """Run the alternating-optimization algorithm on a noisy-labeled dataset.

    ``mode="naive"`` trains on one-hot noisy labels through the identical
    loop (same RNG consumption), which is also the eta_init=0,
    updates-disabled limit of the method.
    """
    psi = np.asarray(psi, dtype=np.float64)
    if len(psi) != len(dataset):
        raise ValueError("psi must have one entry per training instance")
    rng = np.random.default_rng(config.seed)
    if config.oversample:
        dataset_rows, slot_map = oversample_minority(dataset, seed=config.seed)
    else:
        dataset_rows, slot_map = dataset, np.arange(len(dataset))
    return _run(
        dataset_rows,
        psi,
        config,
        mode=mode,
        slot_map=slot_map,
        pinned=None,
        rng=rng,
        eval_sets=eval_sets,
        metrics_path=metrics_path,
        run_dir=run_dir,
    )


def train_clean_mix(noisy, clean, psi, config, *, eval_sets=None,
                    metrics_path=None, run_dir=None):
    """Alternating optimization with a trusted clean pool mixed into every batch.

    Each mini-batch takes batch_size//2 instances from the noisy pool and
    the same number from the clean pool. Clean instances keep their labels
    verbatim: their confusing probabilities are pinned to 0 and excluded
    from updates.
    """
    if clean.clean_labels is None and clean.trusted_clean_mask is None:
        raise ValueError("clean pool must carry trusted labels")
    if clean.class_count != noisy.class_count or clean.dim != noisy.dim:
        raise ValueError("noisy and clean pools must share shape and classes")
    psi = np.asarray(psi, dtype=np.float64)
    if len(psi) != len(noisy):
        raise ValueError("psi must have one entry per noisy-pool instance")
    half = config.batch_size // 2
    if half < 1:
        raise ValueError("batch_size must be >= 2 for clean-mix")
    n_noisy, n_clean = len(noisy), len(clean)
    combined = Dataset(
        features=np.concatenate([noisy.features, clean.features]),
        noisy_labels=np.concatenate([noisy.noisy_labels, clean.noisy_labels]),
        class_count=noisy.class_count,
        clean_labels=(
            np.concatenate([noisy.clean_labels, clean.noisy_labels])
            if noisy.clean_labels is not None
            else None
        ),
        split=noisy.split,
        noise_spec=noisy.noise_spec,
    )
    # psi for clean instances is irrelevant at eta=0; use 1 as a placeholder
    full_psi = np.concatenate([psi, np.ones(n_clean)])
    pinned = np.zeros(n_noisy + n_clean, dtype=bool)
    pinned[n_noisy:] = True
    replace_clean = n_clean < half
    if replace_clean:
        warnings.warn(
            "clean pool smaller than half a batch; sampling clean instances "
            "with replacement",
            stacklevel=2,
        )
    steps = -(-n_noisy // half)

    def batch_iter(rng):
        noisy_perm = rng.permutation(n_noisy)
        if replace_clean:
            clean_stream = rng.choice(n_clean, size=steps * half, replace=True)
        else:
            reps = -(-(steps * half) // n_clean)
            clean_stream = np.concatenate(
                [rng.permutation(n_clean) for _ in range(reps)]
            )[: steps * half]
        for s in range(steps):
            noisy_part = noisy_perm[s * half : (s + 1) * half]
            clean_part = clean_stream[s * half : (s + 1) * half] + n_noisy
            yield np.concatenate([noisy_part, clean_part])

    rng = np.random.default_rng(config.seed)
    return _run(
        combined,
        full_psi,
        config,
        mode="method",
        slot_map=np.arange(n_noisy + n_clean),
        pinned=pinned,
        rng=rng,
        eval_sets=eval_sets,
        metrics_path=metrics_path,
        run_dir=run_dir,
        batch_iter=batch_iter,
    )


def save_eta_dump(state, dataset, path, slot_count=None):
    """Write the per-instance CSV: index, eta_final, psi, noisy_label[, clean_label]."""
    n = slot_count if slot_count is not None else len(state.eta)
    has_clean = dataset.clean_labels is not None
    with open(Path(path), "w") as fh:
        header = "index,eta_final,psi,noisy_label"
        if has_clean:
            header += ",clean_label"
        fh.write(header + "\n")
        for i in range(n):
            row = (
                f"{i},{float(state.eta[i])!r},{float(state.psi[i])!r},"
                f"{int(dataset.noisy_labels[i])}"
            )
            if has_clean:
                row += f",{int(dataset.clean_labels[i])}"
            fh.write(row + "\n")


def load_eta_dump(path):
    rows = []
    with open(Path(path)) as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            rows.append(line.strip().split(","))
    out = {
        "index": np.array([int(r[0]) for r in rows]),
        "eta": np.array([float(r[1]) for r in rows]),
        "psi": np.array([float(r[2]) for r in rows]),
        "noisy_label": np.array([int(r[3]) for r in rows]),
    }
    if "clean_label" in header:
        out["clean_label"] = np.array([int(r[4]) for r in rows])
    return out

"""Synthetic clean datasets and the three label-corruption protocols.

Corruption never touches features or clean labels; it only rewrites
``noisy_labels``. All generators are deterministic given their seed.
"""

from __future__ import annotations

import numpy as np

from .data import Dataset
from .mlp import OptimizerConfig, SoftmaxMLP
from .validation import one_hot


class DegenerateWeakModelError(RuntimeError):
    """The weak relabeling model collapsed to predicting a single class."""


def synth_gaussian_dataset(classes, per_class, dim, separation, seed=0, split="train"):
    """Isotropic unit-variance Gaussian blobs with controlled separation.

    Class means sit on a circle (embedded in the first two feature
    dimensions) whose radius makes adjacent means exactly ``separation``
    apart. Noisy labels start out equal to the clean labels.
    """
    if classes < 2:
        raise ValueError("need at least 2 classes")
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    if dim < 2:
        raise ValueError("dim must be >= 2")
    rng = np.random.default_rng(seed)
    radius = separation / (2.0 * np.sin(np.pi / classes))
    means = np.zeros((classes, dim))
    angles = 2.0 * np.pi * np.arange(classes) / classes
    means[:, 0] = radius * np.cos(angles)
    means[:, 1] = radius * np.sin(angles)
    features = np.empty((classes * per_class, dim))
    labels = np.repeat(np.arange(classes), per_class)
    for j in range(classes):
        block = slice(j * per_class, (j + 1) * per_class)
        features[block] = means[j] + rng.standard_normal((per_class, dim))
    return Dataset(
        features=features,
        noisy_labels=labels.copy(),
        class_count=classes,
        clean_labels=labels,
        split=split,
        noise_spec={"protocol": "none"},
    )


# -------------------------------------------------------------- weak model


def _train_weak_steps(clean, hidden_sizes, learning_rate, batch_size, seed):
    """Generator of (step, predicted_labels) while fitting a weak classifier."""
    model = SoftmaxMLP(
        clean.dim, clean.class_count, hidden_sizes=hidden_sizes, seed=seed
    )
    opt = OptimizerConfig(
        learning_rate=learning_rate, momentum=0.9, weight_decay=0.0
    )
    rng = np.random.default_rng(seed)
    targets = one_hot(clean.clean_labels, clean.class_count)
    n = len(clean)
    step = 0
    yield step, model.forward(clean.features).argmax(axis=1)
    while True:
        perm = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = perm[start : start + batch_size]
            grads = model.soft_target_gradient(clean.features[idx], targets[idx])
            model.apply_update(grads, opt, epoch=0)
            step += 1
            yield step, model.forward(clean.features).argmax(axis=1)


def corrupt_weak_model(
    clean,
    hidden_sizes=(4,),
    epochs=2,
    learning_rate=0.01,
    batch_size=32,
    seed=0,
    target_rate=None,
    rate_tolerance=0.05,
    max_epochs=40,
):
    """Relabel a clean dataset with a deliberately weak classifier.

    The weak model is trained on the clean labels and its argmax predictions
    replace the noisy labels, so the noise is instance-dependent (set by the
    weak decision boundary). With ``target_rate`` set, training is monitored
    step by step and the snapshot whose relabeling noise rate is closest to
    the target is kept; the search fails if it cannot get within
    ``rate_tolerance``.
    """
    if clean.clean_labels is None:
        raise ValueError("weak-model corruption needs clean labels")
    n = len(clean)
    steps_per_epoch = -(-n // batch_size)
    stream = _train_weak_steps(clean, hidden_sizes, learning_rate, batch_size, seed)

    if target_rate is None:
        total = epochs * steps_per_epoch
        for step, predicted in stream:
            if step >= total:
                break
        best_predicted, best_step = predicted, step
        achieved = float(np.mean(best_predicted != clean.clean_labels))
    else:
        total = max_epochs * steps_per_epoch
        best_predicted, best_step, best_gap = None, None, np.inf
        for step, predicted in stream:
            rate = float(np.mean(predicted != clean.clean_labels))
            gap = abs(rate - target_rate)
            if gap < best_gap:
                best_predicted, best_step, best_gap = predicted, step, gap
            if step >= total:
                break
        achieved = float(np.mean(best_predicted != clean.clean_labels))
        if best_gap > rate_tolerance:
            raise RuntimeError(
                f"weak-model search missed target rate {target_rate:.3f} "
                f"(best achieved {achieved:.3f})"
            )
    if len(np.unique(best_predicted)) < 2:
        raise DegenerateWeakModelError(
            "weak model relabeled everything to a single class"
        )
    spec = {
        "protocol": "weak-model",
        "hidden_sizes": list(hidden_sizes),
        "learning_rate": learning_rate,
        "batch_size": batch_size,
        "seed": seed,
        "steps_used": int(best_step),
        "target_rate": target_rate,
        "achieved_rate": achieved,
    }
    return clean.with_noisy_labels(best_predicted, noise_spec=spec)


# ------------------------------------------------------------ cluster vote


def _kmeans_plus_plus(X, k, rng):
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = np.sum((X - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = closest.sum()
        if total <= 0:
            centers[i] = X[rng.integers(n)]
            continue
        probs = closest / total
        centers[i] = X[rng.choice(n, p=probs)]
        closest = np.minimum(closest, np.sum((X - centers[i]) ** 2, axis=1))
    return centers


def _lloyd(X, centers, max_iter=100):
    k = centers.shape[0]
    assignments = None
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assignments = d2.argmin(axis=1)
        # re-seed empty clusters at the point farthest from its centroid
        for j in range(k):
            if not np.any(new_assignments == j):
                own = d2[np.arange(len(X)), new_assignments]
                far = int(np.argmax(own))
                centers[j] = X[far]
                new_assignments[far] = j
        if assignments is not None and np.array_equal(new_assignments, assignments):
            break
        assignments = new_assignments
        for j in range(k):
            members = assignments == j
            if members.any():
                centers[j] = X[members].mean(axis=0)
    return assignments


def corrupt_cluster_vote(clean, k, seed=0, max_iter=100):
    """Cluster features with k-means++ and relabel each cluster by majority vote.

    Ties are broken toward the lowest class index, so the output is
    deterministic given the seed. Every instance in a cluster ends up with
    the same noisy label.
    """
    if clean.clean_labels is None:
        raise ValueError("cluster-vote corruption needs clean labels")
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > len(clean):
        raise ValueError("k cannot exceed the number of instances")
    rng = np.random.default_rng(seed)
    centers = _kmeans_plus_plus(clean.features, k, rng)
    assignments = _lloyd(clean.features, centers, max_iter=max_iter)
    noisy = np.empty(len(clean), dtype=np.int64)
    for j in range(k):
        members = assignments == j
        votes = np.bincount(
            clean.clean_labels[members], minlength=clean.class_count
        )
        noisy[members] = int(votes.argmax())
    achieved = float(np.mean(noisy != clean.clean_labels))
    spec = {
        "protocol": "cluster-vote",
        "k": int(k),
        "seed": seed,
        "achieved_rate": achieved,
    }
    return clean.with_noisy_labels(noisy, noise_spec=spec)


# --------------------------------------------------------------- pair flip


def corrupt_pairflip(clean, pairs, rate, seed=0):
    """Class-conditional pair-flip corruption.

    Each instance whose clean class is a flip source is independently
    relabeled to the paired target with probability ``rate``.
    """
    if clean.clean_labels is None:
        raise ValueError("pair-flip corruption needs clean labels")
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate must lie in [0, 1]")
    sources = [s for s, _ in pairs]
    if len(set(sources)) != len(sources):
        raise ValueError("duplicate source classes in flip pairs")
    for s, t in pairs:
        if s == t:
            raise ValueError("flip pairs must reference distinct classes")
        for v in (s, t):
            if not 0 <= v < clean.class_count:
                raise ValueError(f"flip pair class {v} out of range")
    rng = np.random.default_rng(seed)
    noisy = clean.clean_labels.copy()
    draws = rng.random(len(clean))
    for s, t in pairs:
        flip = (clean.clean_labels == s) & (draws < rate)
        noisy[flip] = t
    achieved = float(np.mean(noisy != clean.clean_labels))
    spec = {
        "protocol": "pair-flip",
        "pairs": [[int(s), int(t)] for s, t in pairs],
        "rate": rate,
        "seed": seed,
        "achieved_rate": achieved,
    }
    return clean.with_noisy_labels(noisy, noise_spec=spec)


# ------------------------------------------------------------------ report


def noise_report(dataset):
    """Noise statistics: overall rate, clean->noisy confusion counts, histograms."""
    if dataset.clean_labels is None:
        raise ValueError("noise report needs clean labels")
    c = dataset.class_count
    confusion = np.zeros((c, c), dtype=np.int64)
    np.add.at(confusion, (dataset.clean_labels, dataset.noisy_labels), 1)
    return {
        "instances": len(dataset),
        "class_count": c,
        "noise_rate": dataset.noise_rate(),
        "confusion": confusion.tolist(),
        "noisy_label_histogram": np.bincount(
            dataset.noisy_labels, minlength=c
        ).tolist(),
        "clean_label_histogram": np.bincount(
            dataset.clean_labels, minlength=c
        ).tolist(),
        "noise_spec": dataset.noise_spec,
    }

"""Estimation of per-instance noisy-label probabilities.

A naive classifier (same architecture and hyperparameters as the main run)
is trained directly on the noisy labels; psi_i is its predicted probability
of the observed label, read off with a plain inference-mode forward pass.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np

from .trainer import train

#: lower clamp so psi never hits exactly 0
PSI_FLOOR = 1e-6


def estimate_psi(dataset, config):
    """Train a naive classifier on noisy labels and return the psi vector.

    ``config.psi_epochs``, when set, caps the naive run's length (DNNs fit
    noise late, so a cap approximates stopping before memorization). The
    returned values are clamped into [PSI_FLOOR, 1].
    """
    naive_config = config
    if config.psi_epochs is not None:
        naive_config = replace(config, epochs=config.psi_epochs)
    state = train(dataset, np.ones(len(dataset)), naive_config, mode="naive")
    probs = state.model.forward(dataset.features)
    psi = probs[np.arange(len(dataset)), dataset.noisy_labels]
    return np.clip(psi, PSI_FLOOR, 1.0)


def save_psi(psi, path):
    with open(Path(path), "w") as fh:
        fh.write("index,psi\n")
        for i, value in enumerate(psi):
            fh.write(f"{i},{float(value)!r}\n")


def load_psi(path):
    values = []
    with open(Path(path)) as fh:
        header = fh.readline().strip()
        if header != "index,psi":
            raise ValueError(f"unexpected psi file header {header!r}")
        for line in fh:
            _, value = line.strip().split(",")
            values.append(float(value))
    return np.asarray(values, dtype=np.float64)

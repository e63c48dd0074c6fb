"""Dataset container and CSV/JSON-sidecar serialization."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .validation import check_consistent_length, check_label_indices


@dataclass
class Dataset:
    """Feature matrix with noisy labels and (optionally) hidden clean labels.

    ``clean_labels`` are never visible to training; they exist only so the
    evaluation side can measure true accuracy and noise statistics.
    ``trusted_clean_mask`` flags instances whose noisy label is known-correct
    (the clean pool for clean-mix training).
    """

    features: np.ndarray
    noisy_labels: np.ndarray
    class_count: int
    clean_labels: np.ndarray | None = None
    trusted_clean_mask: np.ndarray | None = None
    split: str = "train"
    noise_spec: dict | None = field(default=None, repr=False)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        self.noisy_labels = check_label_indices(
            self.noisy_labels, self.class_count, "noisy_labels"
        )
        if self.clean_labels is not None:
            self.clean_labels = check_label_indices(
                self.clean_labels, self.class_count, "clean_labels"
            )
        if self.trusted_clean_mask is not None:
            self.trusted_clean_mask = np.asarray(self.trusted_clean_mask, dtype=bool)
            if self.clean_labels is not None:
                flagged = self.trusted_clean_mask
                if np.any(self.noisy_labels[flagged] != self.clean_labels[flagged]):
                    raise ValueError("trusted instances must have noisy == clean label")
        check_consistent_length(
            self.features, self.noisy_labels, self.clean_labels, self.trusted_clean_mask
        )

    def __len__(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    def noise_rate(self):
        if self.clean_labels is None:
            raise ValueError("noise rate needs clean labels")
        return float(np.mean(self.noisy_labels != self.clean_labels))

    def with_noisy_labels(self, noisy_labels, noise_spec=None):
        """Copy with replaced noisy labels; features/clean labels are shared."""
        return replace(
            self,
            noisy_labels=noisy_labels,
            noise_spec=noise_spec if noise_spec is not None else self.noise_spec,
        )

    # ------------------------------------------------------------------ io

    def save(self, path):
        """Write ``<path>.csv`` plus a ``<path>.json`` sidecar."""
        path = Path(path)
        base = path.with_suffix("") if path.suffix == ".csv" else path
        header = [f"f{j}" for j in range(self.dim)] + ["noisy_label"]
        if self.clean_labels is not None:
            header.append("clean_label")
        if self.trusted_clean_mask is not None:
            header.append("trusted")
        with open(base.with_suffix(".csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in range(len(self)):
                row = [repr(float(v)) for v in self.features[i]]
                row.append(int(self.noisy_labels[i]))
                if self.clean_labels is not None:
                    row.append(int(self.clean_labels[i]))
                if self.trusted_clean_mask is not None:
                    row.append(int(self.trusted_clean_mask[i]))
                writer.writerow(row)
        sidecar = {
            "class_count": self.class_count,
            "split": self.split,
            "noise_spec": self.noise_spec,
        }
        with open(base.with_suffix(".json"), "w") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        path = Path(path)
        base = path.with_suffix("") if path.suffix in (".csv", ".json") else path
        with open(base.with_suffix(".json")) as fh:
            sidecar = json.load(fh)
        with open(base.with_suffix(".csv"), newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = list(reader)
        feat_cols = [j for j, name in enumerate(header) if name.startswith("f")]
        noisy_col = header.index("noisy_label")
        clean_col = header.index("clean_label") if "clean_label" in header else None
        trusted_col = header.index("trusted") if "trusted" in header else None
        features = np.array(
            [[float(r[j]) for j in feat_cols] for r in rows], dtype=np.float64
        ).reshape(len(rows), len(feat_cols))
        noisy = np.array([int(r[noisy_col]) for r in rows], dtype=np.int64)
        clean = (
            np.array([int(r[clean_col]) for r in rows], dtype=np.int64)
            if clean_col is not None
            else None
        )
        trusted = (
            np.array([bool(int(r[trusted_col])) for r in rows])
            if trusted_col is not None
            else None
        )
        return cls(
            features=features,
            noisy_labels=noisy,
            class_count=sidecar["class_count"],
            clean_labels=clean,
            trusted_clean_mask=trusted,
            split=sidecar.get("split", "train"),
            noise_spec=sidecar.get("noise_spec"),
        )

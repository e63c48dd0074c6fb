"""Noise-robust classification by learning per-instance confusing probabilities."""

from .data import Dataset
from .estimator import ConfusingInstanceClassifier
from .mlp import OptimizerConfig, SoftmaxMLP
from .posterior import (
    DegeneratePosteriorError,
    LogDomainError,
    eta_gradient_exact,
    eta_gradient_paper,
    eta_objective,
    joint_probability,
    lower_bound,
    noisy_label_conditional,
    project_eta,
    true_label_posterior,
)
from .psi import estimate_psi
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
    oversample_minority,
    train,
    train_clean_mix,
)

__version__ = "0.1.0"

__all__ = [
    "ConfusingInstanceClassifier",
    "Dataset",
    "DegeneratePosteriorError",
    "LogDomainError",
    "NumericalAbortError",
    "OptimizerConfig",
    "SoftmaxMLP",
    "TrainConfig",
    "TrainState",
    "corrupt_cluster_vote",
    "corrupt_pairflip",
    "corrupt_weak_model",
    "estimate_psi",
    "eta_gradient_exact",
    "eta_gradient_paper",
    "eta_objective",
    "joint_probability",
    "lower_bound",
    "noise_report",
    "noisy_label_conditional",
    "oversample_minority",
    "project_eta",
    "synth_gaussian_dataset",
    "train",
    "train_clean_mix",
    "true_label_posterior",
]

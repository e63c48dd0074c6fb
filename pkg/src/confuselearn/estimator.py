"""Scikit-learn style estimator wrapping the full noise-robust pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .data import Dataset
from .psi import estimate_psi
from .trainer import TrainConfig, train
from .validation import as_float_array


class ConfusingInstanceClassifier(BaseEstimator, ClassifierMixin):
    """Noise-robust softmax classifier with learned confusing probabilities.

    ``fit(X, y)`` treats ``y`` as potentially noisy labels: it first
    estimates per-instance noisy-label probabilities with a naive model,
    then runs the alternating-optimization training loop. After fitting,
    ``confusing_probability_`` ranks instances by how likely their label was
    corrupted.

    Parameters mirror :class:`confuselearn.trainer.TrainConfig`.
    """

    def __init__(self, eta_init=0.01, alpha1=1.0, alpha2=3e-4, epsilon=1e-4,
                 epochs=60, batch_size=32, eta_update_start_epoch=3,
                 eta_update_every_epochs=1, eta_gradient_mode="paper",
                 eta_updates_enabled=True, oversample=False, seed=0,
                 hidden_sizes=(64, 64), activation="softplus", momentum=0.9,
                 weight_decay=1e-4, lr_schedule=((40, 10.0),), psi_epochs=None):
        self.eta_init = eta_init
        self.alpha1 = alpha1
        self.alpha2 = alpha2
        self.epsilon = epsilon
        self.epochs = epochs
        self.batch_size = batch_size
        self.eta_update_start_epoch = eta_update_start_epoch
        self.eta_update_every_epochs = eta_update_every_epochs
        self.eta_gradient_mode = eta_gradient_mode
        self.eta_updates_enabled = eta_updates_enabled
        self.oversample = oversample
        self.seed = seed
        self.hidden_sizes = hidden_sizes
        self.activation = activation
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.lr_schedule = lr_schedule
        self.psi_epochs = psi_epochs

    def _config(self):
        return TrainConfig(
            eta_init=self.eta_init,
            alpha1=self.alpha1,
            alpha2=self.alpha2,
            epsilon=self.epsilon,
            epochs=self.epochs,
            batch_size=self.batch_size,
            eta_update_start_epoch=self.eta_update_start_epoch,
            eta_update_every_epochs=self.eta_update_every_epochs,
            eta_gradient_mode=self.eta_gradient_mode,
            eta_updates_enabled=self.eta_updates_enabled,
            oversample=self.oversample,
            seed=self.seed,
            hidden_sizes=tuple(self.hidden_sizes),
            activation=self.activation,
            momentum=self.momentum,
            weight_decay=self.weight_decay,
            lr_schedule=tuple(self.lr_schedule),
            psi_epochs=self.psi_epochs,
        )

    def fit(self, X, y):
        X = as_float_array(X, "X", ndim=2)
        y = np.asarray(y)
        if len(X) != len(y):
            raise ValueError("X and y must have the same length")
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("need at least 2 classes")
        dataset = Dataset(
            features=X, noisy_labels=y_idx, class_count=len(self.classes_)
        )
        config = self._config()
        self.psi_ = estimate_psi(dataset, config)
        state = train(dataset, self.psi_, config)
        self.model_ = state.model
        self.confusing_probability_ = state.eta
        self.history_ = state.history
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        X = as_float_array(X, "X", ndim=2)
        return self.model_.forward(X)

    def predict(self, X):
        return self.classes_[self.predict_proba(X).argmax(axis=1)]

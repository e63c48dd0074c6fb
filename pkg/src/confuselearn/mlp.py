"""Minimal softmax MLP with manual backprop and soft-target ascent updates.

The classifier maximizes sum_i sum_j q_ij * log h_j(x_i) for soft targets q
by mini-batch gradient ascent with momentum, weight decay (penalty on
weights only) and a step learning-rate schedule. The logit-level gradient of
the objective is (q - h) per instance, which is the numerically stable
equivalent of backpropagating q_j / h_j through the softmax.

Everything is numpy float64 with deterministic reduction order, so runs are
bitwise reproducible from (seed, config, data).
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .validation import check_label_distribution

CHECKPOINT_FORMAT = "confuselearn-mlp-v1"

#: probability floor so softmax output is strictly positive even for
#: extreme logit gaps (|logit| <= 500 would otherwise underflow to 0)
PROB_FLOOR = 1e-300


@dataclass(frozen=True)
class OptimizerConfig:
    """Hyperparameters of the gradient-ascent-with-momentum update."""

    learning_rate: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 1e-4
    schedule: tuple[tuple[int, float], ...] = ()  # (epoch, divisor) steps

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        epochs = [e for e, _ in self.schedule]
        if epochs != sorted(set(epochs)):
            raise ValueError("schedule epochs must be strictly increasing")

    def rate_at(self, epoch):
        """Effective learning rate at a (0-based) epoch."""
        rate = self.learning_rate
        for boundary, divisor in self.schedule:
            if epoch >= boundary:
                rate /= divisor
        return rate


def _softplus(z):
    return np.logaddexp(0.0, z)


def _softplus_grad(z):
    # sigmoid(z), computed stably as exp(z - softplus(z))
    return np.exp(z - _softplus(z))


_ACTIVATIONS = {
    "softplus": (_softplus, _softplus_grad),
    "relu": (lambda z: np.maximum(z, 0.0), lambda z: (z > 0.0).astype(np.float64)),
}


class SoftmaxMLP:
    """Fully-connected softmax classifier with explicit parameter state.

    Weight init is symmetric uniform with fan-in scaling from a seeded
    generator; biases start at zero. Momentum buffers live alongside the
    parameters so checkpoints capture the full optimizer state.
    """

    def __init__(self, input_dim, class_count, hidden_sizes=(64, 64),
                 activation="softplus", seed=0):
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.input_dim = int(input_dim)
        self.class_count = int(class_count)
        self.hidden_sizes = tuple(int(h) for h in hidden_sizes)
        self.activation = activation
        widths = (self.input_dim, *self.hidden_sizes, self.class_count)
        rng = np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))
        self.vel_weights = [np.zeros_like(w) for w in self.weights]
        self.vel_biases = [np.zeros_like(b) for b in self.biases]

    # ---------------------------------------------------------------- fwd

    def _forward_cached(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ValueError(
                f"expected features of shape (n, {self.input_dim}), got {X.shape}"
            )
        act, _ = _ACTIVATIONS[self.activation]
        pre = []
        post = [X]
        out = X
        for layer, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = out @ W + b
            pre.append(z)
            if layer < len(self.weights) - 1:
                out = act(z)
                post.append(out)
        logits = pre[-1]
        shifted = logits - logits.max(axis=1, keepdims=True)
        expz = np.exp(shifted)
        probs = expz / expz.sum(axis=1, keepdims=True)
        probs = np.maximum(probs, PROB_FLOOR)
        probs /= probs.sum(axis=1, keepdims=True)
        return probs, pre, post

    def forward(self, X):
        """Class probabilities, shape (n, c); rows sum to 1 and are > 0."""
        probs, _, _ = self._forward_cached(X)
        return probs

    def objective(self, X, Q):
        """Soft-target log-likelihood sum_i sum_j q_ij log h_ij."""
        probs = self.forward(X)
        Q = np.asarray(Q, dtype=np.float64)
        return float(np.sum(np.where(Q > 0, Q * np.log(probs), 0.0)))

    # --------------------------------------------------------------- grad

    def soft_target_gradient(self, X, Q):
        """Ascent direction of the soft-target objective, summed over the batch.

        Returns (weight_grads, bias_grads) shape-matching the parameters.
        """
        Q = check_label_distribution(Q, "Q")
        probs, pre, post = self._forward_cached(X)
        if Q.shape != probs.shape:
            raise ValueError(f"targets shape {Q.shape} != output shape {probs.shape}")
        _, act_grad = _ACTIVATIONS[self.activation]
        delta = Q - probs
        weight_grads = [None] * len(self.weights)
        bias_grads = [None] * len(self.biases)
        for layer in range(len(self.weights) - 1, -1, -1):
            weight_grads[layer] = post[layer].T @ delta
            bias_grads[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.weights[layer].T) * act_grad(pre[layer - 1])
        return weight_grads, bias_grads

    def apply_update(self, gradients, optimizer, epoch):
        """One momentum ascent step; weight decay pulls weights (not biases) to zero."""
        weight_grads, bias_grads = gradients
        rate = optimizer.rate_at(epoch)
        for i, (gw, gb) in enumerate(zip(weight_grads, bias_grads)):
            direction = gw - optimizer.weight_decay * self.weights[i]
            self.vel_weights[i] = optimizer.momentum * self.vel_weights[i] + direction
            self.weights[i] += rate * self.vel_weights[i]
            self.vel_biases[i] = optimizer.momentum * self.vel_biases[i] + gb
            self.biases[i] += rate * self.vel_biases[i]

    def parameters_finite(self):
        return all(
            np.all(np.isfinite(a))
            for a in (*self.weights, *self.biases, *self.vel_weights, *self.vel_biases)
        )

    # ----------------------------------------------------------------- io

    def copy(self):
        clone = SoftmaxMLP.__new__(SoftmaxMLP)
        clone.input_dim = self.input_dim
        clone.class_count = self.class_count
        clone.hidden_sizes = self.hidden_sizes
        clone.activation = self.activation
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        clone.vel_weights = [v.copy() for v in self.vel_weights]
        clone.vel_biases = [v.copy() for v in self.vel_biases]
        return clone

    def checksum_bytes(self):
        """Canonical little-endian bytes of all parameters and buffers."""
        chunks = []
        for a in (*self.weights, *self.biases, *self.vel_weights, *self.vel_biases):
            chunks.append(np.ascontiguousarray(a, dtype="<f8").tobytes())
        return b"".join(chunks)

    def to_dict(self):
        def pack(arrays):
            return [
                {
                    "shape": list(a.shape),
                    "data": base64.b64encode(
                        np.ascontiguousarray(a, dtype="<f8").tobytes()
                    ).decode("ascii"),
                }
                for a in arrays
            ]

        return {
            "format": CHECKPOINT_FORMAT,
            "input_dim": self.input_dim,
            "class_count": self.class_count,
            "hidden_sizes": list(self.hidden_sizes),
            "activation": self.activation,
            "weights": pack(self.weights),
            "biases": pack(self.biases),
            "vel_weights": pack(self.vel_weights),
            "vel_biases": pack(self.vel_biases),
        }

    @classmethod
    def from_dict(cls, payload):
        if payload.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint format {payload.get('format')!r}")

        def unpack(entries):
            return [
                np.frombuffer(
                    base64.b64decode(e["data"]), dtype="<f8"
                ).reshape(e["shape"]).astype(np.float64)
                for e in entries
            ]

        model = cls.__new__(cls)
        model.input_dim = payload["input_dim"]
        model.class_count = payload["class_count"]
        model.hidden_sizes = tuple(payload["hidden_sizes"])
        model.activation = payload["activation"]
        model.weights = unpack(payload["weights"])
        model.biases = unpack(payload["biases"])
        model.vel_weights = unpack(payload["vel_weights"])
        model.vel_biases = unpack(payload["vel_biases"])
        return model

    def save(self, path):
        with open(Path(path), "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(Path(path)) as fh:
            return cls.from_dict(json.load(fh))

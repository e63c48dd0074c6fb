"""Closed-form math of the confusing-instance noise model.

Every instance carries two scalars: a confusing probability ``eta``
(how likely the annotator was confused by this instance) and a noisy-label
probability ``psi`` (how likely the observed label is under a naive model).
The functions here combine them with the classifier output ``h`` to produce
the true-label posterior used as the soft training target, plus the
objective/gradients that drive the projected-gradient-ascent update of
``eta``.

All functions broadcast: ``h``/``q`` have shape (..., c), ``noisy_label``
is an integer index array of shape (...,), and ``eta``/``psi`` are scalars
or arrays of shape (...,). They are pure and thread-safe.
"""

from __future__ import annotations

import numpy as np

from .validation import (
    check_label_distribution,
    check_label_indices,
    check_unit_interval,
    one_hot,
)

__all__ = [
    "DegeneratePosteriorError",
    "LogDomainError",
    "noisy_label_conditional",
    "joint_probability",
    "true_label_posterior",
    "eta_objective",
    "eta_gradient_paper",
    "eta_gradient_exact",
    "project_eta",
    "lower_bound",
]

#: floor applied to log arguments in diagnostics (never in gradients)
LOG_CLAMP = 1e-12

#: default regularizer in the paper-style eta gradient denominator
DEFAULT_EPSILON = 1e-4

_TINY = np.finfo(np.float64).tiny


class DegeneratePosteriorError(FloatingPointError):
    """The posterior normalizer underflowed to zero.

    Signals upstream numerical collapse (e.g. the classifier assigns zero
    mass to the noisy class while eta*psi is zero); callers decide recovery.
    """


class LogDomainError(FloatingPointError):
    """A log/derivative was requested outside its domain."""


def _take_noisy(q, noisy_label):
    idx = np.expand_dims(np.asarray(noisy_label, dtype=np.int64), -1)
    return np.take_along_axis(np.asarray(q, dtype=np.float64), idx, axis=-1)[..., 0]


def noisy_label_conditional(eta, psi, labels_match):
    """P(observed label | true label, instance): (1-eta)*1{match} + eta*psi."""
    eta = check_unit_interval(eta, "eta")
    psi = check_unit_interval(psi, "psi")
    match = np.asarray(labels_match, dtype=np.float64)
    return (1.0 - eta) * match + eta * psi


def _label_weight(noisy_label, eta, psi, class_count):
    # (1-eta)*onehot + eta*psi, broadcast to (..., c)
    y = one_hot(noisy_label, class_count)
    eta = check_unit_interval(eta, "eta")[..., np.newaxis]
    psi = check_unit_interval(psi, "psi")[..., np.newaxis]
    return (1.0 - eta) * y + eta * psi


def joint_probability(h, noisy_label, eta, psi):
    """Joint probability of the observed label and each true class.

    Returns ``[(1-eta)*y + eta*psi] * h`` elementwise over classes, shape
    (..., c). Entries are non-negative and sum to at most 1.
    """
    h = check_label_distribution(h, "h")
    w = _label_weight(noisy_label, eta, psi, h.shape[-1])
    return w * h


def true_label_posterior(h, noisy_label, eta, psi):
    """Posterior over the true class given the observed noisy label.

    Normalizes :func:`joint_probability` over classes. At eta=0 this is
    exactly the one-hot noisy label; at eta=1 it equals ``h``.

    Raises
    ------
    DegeneratePosteriorError
        If the normalizer underflows (<= float64 tiny).
    """
    joint = joint_probability(h, noisy_label, eta, psi)
    normalizer = joint.sum(axis=-1)
    if np.any(normalizer <= _TINY):
        raise DegeneratePosteriorError(
            "posterior normalizer underflowed; classifier mass and "
            "eta*psi are both (numerically) zero on the noisy class"
        )
    return joint / normalizer[..., np.newaxis]


def eta_objective(q, noisy_label, eta, psi, clamp=False):
    """Per-instance term of the eta sub-objective: sum_j q_j log[(1-eta)*y_j + eta*psi].

    With ``clamp=True`` log arguments are floored at ``LOG_CLAMP`` (diagnostic
    use only); otherwise a zero argument under posterior mass raises
    :class:`LogDomainError`.
    """
    q = check_label_distribution(q, "q")
    w = _label_weight(noisy_label, eta, psi, q.shape[-1])
    mass = q > 0.0
    if clamp:
        safe = np.maximum(w, LOG_CLAMP)
    else:
        if np.any(mass & (w <= 0.0)):
            raise LogDomainError(
                "log argument <= 0 for a class carrying posterior mass"
            )
        safe = np.where(mass, w, 1.0)
    return np.sum(np.where(mass, q * np.log(safe), 0.0), axis=-1)


def eta_gradient_paper(q, noisy_label, eta, psi, epsilon=DEFAULT_EPSILON):
    """Printed ascent direction for eta: [1 + (psi*eta - eta - 1)*y]^T q / (eta + eps).

    Equals (1 - q* + q* * eta * (psi-1)) / (eta + epsilon) where q* is the
    posterior mass on the noisy class. This is an epsilon-regularized
    approximation of :func:`eta_gradient_exact`.
    """
    q = check_label_distribution(q, "q")
    eta = np.asarray(eta, dtype=np.float64)
    psi = check_unit_interval(psi, "psi")
    if np.any(eta < 0.0):
        raise ValueError("eta must be >= 0")
    if not epsilon > 0.0:
        raise ValueError("epsilon must be > 0")
    q_star = _take_noisy(q, noisy_label)
    return (1.0 - q_star + q_star * eta * (psi - 1.0)) / (eta + epsilon)


def eta_gradient_exact(q, noisy_label, eta, psi):
    """Exact derivative of :func:`eta_objective` with respect to eta.

    (1 - q*)/eta + q*(psi - 1)/(1 - eta + eta*psi). Diverges at eta=0
    whenever q has mass off the noisy class, which raises
    :class:`LogDomainError`.
    """
    q = check_label_distribution(q, "q")
    eta = check_unit_interval(eta, "eta")
    psi = check_unit_interval(psi, "psi")
    q_star = _take_noisy(q, noisy_label)
    off_mass = 1.0 - q_star
    if np.any((eta == 0.0) & (off_mass > 0.0)):
        raise LogDomainError("derivative is +inf at eta=0 with mass off the noisy class")
    denom = 1.0 - eta + eta * psi
    if np.any(denom <= 0.0):
        raise LogDomainError("noisy-class log argument is not positive")
    first = np.where(eta > 0.0, off_mass / np.where(eta > 0.0, eta, 1.0), 0.0)
    return first + q_star * (psi - 1.0) / denom


def project_eta(eta):
    """Project onto the box [0, 1] (idempotent)."""
    return np.clip(eta, 0.0, 1.0)


def lower_bound(q, h, noisy_label, eta, psi):
    """Jensen lower bound of the noisy-label log-likelihood over a batch.

    Sums q_ij * log(joint_ij) over instances and classes. Log arguments are
    floored at ``LOG_CLAMP`` because this is a diagnostic trend, not a
    training gradient. An empty batch contributes 0.
    """
    q = np.asarray(q, dtype=np.float64)
    if q.size == 0:
        return 0.0
    q = check_label_distribution(q, "q")
    joint = joint_probability(h, noisy_label, eta, psi)
    mass = q > 0.0
    terms = np.where(mass, q * np.log(np.maximum(joint, LOG_CLAMP)), 0.0)
    return float(terms.sum())

"""Scikit-learn estimator API surface of the classifier."""

import numpy as np
import pytest
from sklearn.base import clone

from confuselearn.estimator import ConfusingInstanceClassifier
from confuselearn.synth import corrupt_pairflip, synth_gaussian_dataset


def _small_estimator(**kwargs):
    defaults = dict(epochs=10, hidden_sizes=(8,), lr_schedule=(),
                    eta_update_start_epoch=2, seed=0)
    defaults.update(kwargs)
    return ConfusingInstanceClassifier(**defaults)


def _noisy_task():
    clean = synth_gaussian_dataset(3, 40, 2, 8.0, seed=0)
    noisy = corrupt_pairflip(clean, [(0, 1)], 0.3, seed=0)
    return noisy.features, noisy.noisy_labels, noisy


def test_get_params_round_trip():
    est = _small_estimator(alpha1=0.5)
    params = est.get_params()
    assert params["alpha1"] == 0.5
    assert params["epochs"] == 10
    rebuilt = ConfusingInstanceClassifier(**params)
    assert rebuilt.get_params() == params


def test_clone_preserves_params():
    est = _small_estimator(alpha2=0.001, hidden_sizes=(4, 4))
    cloned = clone(est)
    assert cloned.get_params() == est.get_params()


def test_set_params():
    est = _small_estimator()
    est.set_params(epochs=3, eta_init=0.05)
    assert est.epochs == 3
    assert est.eta_init == 0.05


def test_fit_sets_learned_attributes():
    X, y, noisy = _noisy_task()
    est = _small_estimator().fit(X, y)
    np.testing.assert_array_equal(est.classes_, [0, 1, 2])
    assert est.psi_.shape == (len(X),)
    assert est.confusing_probability_.shape == (len(X),)
    assert np.all(est.confusing_probability_ >= 0.0)
    assert np.all(est.confusing_probability_ <= 1.0)
    assert est.n_features_in_ == 2
    assert len(est.history_) == 10


def test_predict_and_predict_proba():
    X, y, _ = _noisy_task()
    est = _small_estimator(epochs=20).fit(X, y)
    proba = est.predict_proba(X)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-9)
    predicted = est.predict(X)
    np.testing.assert_array_equal(predicted, est.classes_[proba.argmax(axis=1)])
    assert np.mean(predicted == y) > 0.5


def test_predict_maps_back_to_original_label_values():
    X, y, _ = _noisy_task()
    shifted = np.array([10, 20, 30])[y]
    est = _small_estimator().fit(X, shifted)
    np.testing.assert_array_equal(est.classes_, [10, 20, 30])
    assert set(np.unique(est.predict(X))).issubset({10, 20, 30})


def test_fit_validation_errors():
    X, y, _ = _noisy_task()
    with pytest.raises(ValueError):
        _small_estimator().fit(X, y[:-1])
    with pytest.raises(ValueError):
        _small_estimator().fit(X, np.zeros(len(X)))
    with pytest.raises(ValueError):
        _small_estimator().fit(X.ravel(), np.tile([0, 1], len(X))[: X.size])


def test_fit_is_deterministic():
    X, y, _ = _noisy_task()
    a = _small_estimator().fit(X, y)
    b = _small_estimator().fit(X, y)
    assert a.model_.checksum_bytes() == b.model_.checksum_bytes()
    np.testing.assert_array_equal(a.confusing_probability_,
                                  b.confusing_probability_)

"""scikit-learn style wrappers around the recurrent networks.

``X`` is a batch of feature sequences: a 3-D array ``(n, time, width)`` or a
list of 2-D ``(time, width)`` arrays of varying length.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from shakesense.errors import ShapeMismatch
from shakesense.nn.model import forward_batch, init_model, load_model, make_spec, save_model
from shakesense.nn.training import TrainConfig, train
from shakesense.validation import (
    check_random_state_seed,
    check_sequences,
    check_targets,
    n_sequences,
    sequence_width,
)


def _frame_stats(X):
    frames = X.reshape(-1, X.shape[2]) if isinstance(X, np.ndarray) else np.concatenate(X)
    mean = frames.mean(axis=0)
    scale = frames.std(axis=0)
    scale[scale < 1e-12] = 1.0
    return mean, scale


def _apply_scaling(X, mean, scale):
    if isinstance(X, np.ndarray):
        return (X - mean) / scale
    return [(s - mean) / scale for s in X]


def _subset(X, idx):
    return X[idx] if isinstance(X, np.ndarray) else [X[i] for i in idx]


def _predict_raw(model, X, chunk=256):
    if isinstance(X, np.ndarray):
        return np.concatenate([forward_batch(model, X[i : i + chunk]) for i in range(0, len(X), chunk)])
    return np.stack([forward_batch(model, s[np.newaxis])[0] for s in X])


class _RecurrentBase(BaseEstimator):
    _head = None

    def __init__(
        self,
        cell="gru",
        units=(491, 99),
        learning_rate=1e-3,
        batch_size=16,
        patience=2,
        max_epochs=200,
        gradient_clip=5.0,
        monitor="val",
        validation_fraction=0.1,
        standardize=True,
        random_state=0,
    ):
        self.cell = cell
        self.units = units
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.patience = patience
        self.max_epochs = max_epochs
        self.gradient_clip = gradient_clip
        self.monitor = monitor
        self.validation_fraction = validation_fraction
        self.standardize = standardize
        self.random_state = random_state

    def _seeds(self):
        seed = check_random_state_seed(self.random_state)
        init_seed, shuffle_seed, split_seed = np.random.SeedSequence(seed).generate_state(3)
        return int(init_seed), int(shuffle_seed), int(split_seed)

    def _train_config(self, shuffle_seed):
        return TrainConfig(
            batch_size=self.batch_size,
            patience=self.patience,
            max_epochs=self.max_epochs,
            learning_rate=self.learning_rate,
            gradient_clip=self.gradient_clip,
            seed=shuffle_seed,
            monitor=self.monitor,
        )

    def _encode_targets(self, y):
        raise NotImplementedError

    def _fit(self, X, y, eval_set, n_outputs):
        init_seed, shuffle_seed, split_seed = self._seeds()
        if eval_set is None:
            n = n_sequences(X)
            n_val = max(1, int(round(self.validation_fraction * n)))
            if n_val >= n:
                raise ValueError("not enough sequences to hold out a validation set")
            perm = np.random.default_rng(split_seed).permutation(n)
            Xv, yv = _subset(X, perm[:n_val]), y[perm[:n_val]]
            X, y = _subset(X, perm[n_val:]), y[perm[n_val:]]
        else:
            Xv, yv = eval_set

        if self.standardize:
            self.feature_mean_, self.feature_scale_ = _frame_stats(X)
        else:
            width = sequence_width(X)
            self.feature_mean_, self.feature_scale_ = np.zeros(width), np.ones(width)
        Xs = _apply_scaling(X, self.feature_mean_, self.feature_scale_)
        Xvs = _apply_scaling(Xv, self.feature_mean_, self.feature_scale_)

        spec = make_spec(self.cell, tuple(self.units), self._head, n_outputs)
        model = init_model(spec, sequence_width(X), seed=init_seed)
        self.model_, self.history_ = train(model, (Xs, y), (Xvs, yv), self._train_config(shuffle_seed))
        self.n_features_in_ = sequence_width(X)
        return self

    def _raw_outputs(self, X):
        check_is_fitted(self, "model_")
        X = check_sequences(X, width=self.n_features_in_)
        return _predict_raw(self.model_, _apply_scaling(X, self.feature_mean_, self.feature_scale_))

    # persistence ----------------------------------------------------------

    def _extras(self):
        return {"feature_mean": self.feature_mean_, "feature_scale": self.feature_scale_}

    def save(self, path, config_digest=""):
        check_is_fitted(self, "model_")
        extras = self._extras()
        extras["estimator_params"] = np.str_(repr(sorted(self.get_params().items())))
        save_model(self.model_, path, config_digest=config_digest, extras=extras)

    @classmethod
    def load(cls, path):
        """Rebuild a fitted estimator from :meth:`save` output.

        Returns ``(estimator, meta)`` where ``meta`` is the checkpoint header.
        """
        model, meta, extras = load_model(path, with_meta=True)
        expected_head = cls._head
        if model.head != expected_head:
            raise ShapeMismatch(f"checkpoint has a {model.head} head, {cls.__name__} needs {expected_head}")
        est = cls(cell=model.spec[0].kind, units=tuple(s.units for s in model.spec[:-1]))
        est.model_ = model
        est.n_features_in_ = model.input_width
        est.feature_mean_ = extras["feature_mean"]
        est.feature_scale_ = extras["feature_scale"]
        est._restore_extras(extras)
        return est, meta

    def _restore_extras(self, extras):
        pass


class RecurrentClassifier(ClassifierMixin, _RecurrentBase):
    """Stacked recurrent network with a softmax head.

    Defaults follow the full-size classification layout (GRU 491 -> GRU 99 ->
    softmax).  ``fit(X, y, eval_set=(X_val, y_val))`` uses the given set for
    early stopping; without it, ``validation_fraction`` of the training data is
    held out.
    """

    _head = "dense_softmax"

    def fit(self, X, y, eval_set=None):
        X = check_sequences(X)
        y = check_targets(y, n_sequences(X))
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        y_idx = np.searchsorted(self.classes_, y)
        if eval_set is not None:
            Xv = check_sequences(eval_set[0], width=sequence_width(X))
            yv = check_targets(eval_set[1], n_sequences(Xv))
            if not np.all(np.isin(yv, self.classes_)):
                raise ValueError("validation labels contain classes unseen in training")
            eval_set = (Xv, np.searchsorted(self.classes_, yv))
        return self._fit(X, y_idx, eval_set, len(self.classes_))

    def predict_proba(self, X):
        return self._raw_outputs(X)

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]

    def _extras(self):
        return {**super()._extras(), "classes": self.classes_}

    def _restore_extras(self, extras):
        self.classes_ = extras["classes"]


class RecurrentRegressor(RegressorMixin, _RecurrentBase):
    """Stacked recurrent network with a linear head for a scalar target.

    Defaults follow the full-size weight-regression layout (LSTM 376 -> LSTM
    69 -> linear).  Targets are standardized internally when ``standardize``
    is set; predictions are returned in the original units.
    """

    _head = "dense_linear"

    def __init__(
        self,
        cell="lstm",
        units=(376, 69),
        learning_rate=1e-3,
        batch_size=16,
        patience=2,
        max_epochs=200,
        gradient_clip=5.0,
        monitor="val",
        validation_fraction=0.1,
        standardize=True,
        random_state=0,
    ):
        super().__init__(
            cell=cell,
            units=units,
            learning_rate=learning_rate,
            batch_size=batch_size,
            patience=patience,
            max_epochs=max_epochs,
            gradient_clip=gradient_clip,
            monitor=monitor,
            validation_fraction=validation_fraction,
            standardize=standardize,
            random_state=random_state,
        )

    def fit(self, X, y, eval_set=None):
        X = check_sequences(X)
        y = check_targets(y, n_sequences(X), numeric=True)
        if self.standardize:
            self.target_mean_ = float(y.mean())
            self.target_scale_ = float(y.std()) or 1.0
        else:
            self.target_mean_, self.target_scale_ = 0.0, 1.0
        scaled = (y - self.target_mean_) / self.target_scale_
        if eval_set is not None:
            Xv = check_sequences(eval_set[0], width=sequence_width(X))
            yv = check_targets(eval_set[1], n_sequences(Xv), numeric=True)
            eval_set = (Xv, (yv - self.target_mean_) / self.target_scale_)
        return self._fit(X, scaled, eval_set, 1)

    def predict(self, X):
        return self._raw_outputs(X) * self.target_scale_ + self.target_mean_

    def _extras(self):
        return {**super()._extras(), "target_stats": np.array([self.target_mean_, self.target_scale_])}

    def _restore_extras(self, extras):
        self.target_mean_, self.target_scale_ = (float(v) for v in extras["target_stats"])

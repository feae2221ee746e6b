"""Nonlinear readout regressors used by the identifiability metrics.

Default readout: ridge regression on random Fourier features of a Gaussian
kernel, with the bandwidth set by the median heuristic. Deterministic given
the seed, cheap to fit, and strong enough for the smooth maps these metrics
see. A small dense-net readout is available behind the ``kind`` flag.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from . import _rng
from .exceptions import ConstantColumnError, DegenerateSplitError, ShapeError
from .nnet import DenseNetRegressor


class RandomFourierRidge(RegressorMixin, BaseEstimator):
    """Ridge regression on random Fourier features of an RBF kernel."""

    def __init__(self, n_features=512, ridge=1e-3, seed=0, max_pairs=2000):
        self.n_features = n_features
        self.ridge = ridge
        self.seed = seed
        self.max_pairs = max_pairs

    def _standardize(self, X):
        return (X - self.mean_) / self.std_

    def _featurize(self, X):
        return np.sqrt(2.0 / self.n_features) * np.cos(self._standardize(X) @ self.W_ + self.b_)

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64).ravel()
        if X.ndim != 2 or len(X) != len(y):
            raise ShapeError(f"X shape {X.shape} does not match {len(y)} targets")
        self.mean_ = X.mean(axis=0)
        self.std_ = X.std(axis=0)
        self.std_[self.std_ == 0.0] = 1.0
        Xs = self._standardize(X)

        gen = _rng.stream(self.seed, _rng.TAG_FEATURES)
        sub = Xs if len(Xs) <= self.max_pairs else Xs[gen.choice(len(Xs), self.max_pairs, replace=False)]
        d2 = np.sum((sub[:, None, :] - sub[None, :, :]) ** 2, axis=-1)
        positive = d2[d2 > 0.0]
        if positive.size == 0:
            raise ConstantColumnError("all rows identical; cannot set a kernel bandwidth")
        bandwidth = np.sqrt(np.median(positive))

        self.W_ = gen.normal(0.0, 1.0 / bandwidth, size=(X.shape[1], self.n_features))
        self.b_ = gen.uniform(0.0, 2.0 * np.pi, size=self.n_features)
        Z = self._featurize(X)
        self.intercept_ = float(y.mean())
        A = Z.T @ Z + self.ridge * np.eye(self.n_features)
        self.coef_ = np.linalg.solve(A, Z.T @ (y - self.intercept_))
        return self

    def predict(self, X):
        return self._featurize(np.asarray(X, dtype=np.float64)) @ self.coef_ + self.intercept_


def make_readout(kind: str = "rff", seed: int = 0):
    if kind == "rff":
        return RandomFourierRidge(seed=seed)
    if kind == "mlp":
        return DenseNetRegressor(hidden_dims=(64, 64), activation="relu", lr=1e-3,
                                 weight_decay=0.0, epochs=60, batch_size=128, seed=seed)
    raise ShapeError(f"unknown readout kind {kind!r}")


def r2_score(y_true, y_pred) -> float:
    """Held-out R^2 = 1 - SSE/SST; negative values are kept as-is."""
    y_true = np.asarray(y_true, dtype=np.float64).ravel()
    y_pred = np.asarray(y_pred, dtype=np.float64).ravel()
    sst = float(np.sum((y_true - y_true.mean()) ** 2))
    if sst == 0.0:
        raise DegenerateSplitError("held-out target is constant; R^2 undefined")
    return 1.0 - float(np.sum((y_true - y_pred) ** 2)) / sst


def readout_r2(X, y, kind: str = "rff", seed: int = 0, train_frac: float = 0.8):
    """Fit the readout on a fixed 80/20 split; returns (r2, eval truth, eval
    predictions). Split and features both derive from the seed alone."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or len(X) != len(y):
        raise ShapeError(f"X shape {X.shape} does not match {len(y)} targets")
    n_train = int(train_frac * len(X))
    if n_train < 2 or len(X) - n_train < 2:
        raise DegenerateSplitError(f"{len(X)} rows cannot support a "
                                   f"{train_frac:.0%} readout split")
    order = _rng.stream(seed, _rng.TAG_SPLIT).permutation(len(X))
    train, hold = order[:n_train], order[n_train:]
    model = make_readout(kind, seed).fit(X[train], y[train])
    pred = model.predict(X[hold])
    return r2_score(y[hold], pred), y[hold], pred

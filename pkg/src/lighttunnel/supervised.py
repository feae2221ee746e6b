"""Supervised sanity check: recover the factors from images with a small MLP.

Confirms that the five causal factors leave a recoverable trace in the image
observations. Trains a fixed five-layer network on flattened pixels against
per-factor standardized targets and reports the uniform average of the
per-factor held-out R^2 scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from . import _rng
from .exceptions import ConstantColumnError, DegenerateSplitError, ShapeError
from .inputs import FACTOR_COLUMNS
from .nnet import DenseNet, TrainConfig, forward, init_dense_net, train_mse
from .readout import r2_score

SUPERVISED_DIMS = (12288, 64, 256, 256, 64, 5)

# Training settings are not pinned by the architecture; these were chosen
# empirically to converge well within a CPU-scale budget.
SUPERVISED_TRAIN_DEFAULTS = TrainConfig(lr=1e-3, weight_decay=0.0,
                                        epochs=40, batch_size=128, seed=0)


def make_supervised_net(seed: int = 0) -> DenseNet:
    return init_dense_net(SUPERVISED_DIMS, hidden_activation="leaky_relu", seed=seed)


@dataclass
class SupervisedResult:
    r2: float
    r2_per_factor: dict
    loss_history: list
    train_indices: np.ndarray
    test_indices: np.ndarray
    net: DenseNet


def supervised_check(images, factors, n_train: int = 5000, n_test: int = 500,
                     cfg: TrainConfig = SUPERVISED_TRAIN_DEFAULTS,
                     seed: int = 0) -> SupervisedResult:
    """Train the check on ``n_train`` rows, score on ``n_test`` held out.

    ``images`` is (n, 64, 64, 3) or already flattened (n, 12288); ``factors``
    is the aligned factor table. Targets are standardized per factor with
    train-split statistics; scores are reported in the original units (R^2
    is invariant to that affine map).
    """
    X = np.asarray(images, dtype=np.float64)
    if X.ndim == 4:
        X = X.reshape(len(X), -1)
    if X.ndim != 2 or X.shape[1] != SUPERVISED_DIMS[0]:
        raise ShapeError(f"images must flatten to {SUPERVISED_DIMS[0]} values, "
                         f"got shape {X.shape}")
    if isinstance(factors, pd.DataFrame):
        factors = factors[list(FACTOR_COLUMNS)]
    Y = np.asarray(factors, dtype=np.float64)
    if Y.shape != (len(X), 5):
        raise ShapeError(f"factors shaped {Y.shape} do not align with "
                         f"{len(X)} images")
    if len(X) < n_train + n_test:
        raise DegenerateSplitError(f"need at least {n_train + n_test} rows, "
                                   f"got {len(X)}")

    order = _rng.stream(seed, _rng.TAG_SELECT).permutation(len(X))
    train, test = order[:n_train], order[n_train:n_train + n_test]
    assert not set(train) & set(test)

    mean = Y[train].mean(axis=0)
    std = Y[train].std(axis=0)
    if np.any(std == 0.0):
        flat = [FACTOR_COLUMNS[j] for j in np.flatnonzero(std == 0.0)]
        raise ConstantColumnError(f"factors constant on the train split: {flat}")

    net = make_supervised_net(seed=cfg.seed)
    net, history = train_mse(net, X[train], (Y[train] - mean) / std, cfg)
    pred = forward(net, X[test]) * std + mean
    per_factor = {FACTOR_COLUMNS[j]: r2_score(Y[test][:, j], pred[:, j])
                  for j in range(5)}
    return SupervisedResult(
        r2=float(np.mean(list(per_factor.values()))),
        r2_per_factor=per_factor, loss_history=history,
        train_indices=train, test_indices=test, net=net)

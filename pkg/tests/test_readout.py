"""Random-Fourier-feature readout and the R^2 helper."""

import numpy as np
import pytest

from lighttunnel.exceptions import ConstantColumnError, DegenerateSplitError, ShapeError
from lighttunnel.readout import RandomFourierRidge, make_readout, r2_score, readout_r2


def test_r2_score_known_values():
    y = np.array([1.0, 2.0, 3.0, 4.0])
    assert r2_score(y, y) == 1.0
    assert r2_score(y, np.full(4, y.mean())) == 0.0
    assert r2_score(y, y[::-1]) < 0.0  # anti-prediction is worse than the mean


def test_r2_score_rejects_constant_truth():
    with pytest.raises(DegenerateSplitError):
        r2_score(np.ones(5), np.zeros(5))


def test_rff_fits_smooth_nonlinear_map(rng):
    X = rng.uniform(-2.0, 2.0, (3000, 2))
    y = np.sin(X[:, 0]) + 0.5 * X[:, 1] ** 2
    r2, y_hold, pred = readout_r2(X, y, seed=0)
    assert r2 > 0.98
    assert len(y_hold) == len(pred) == 600


def test_rff_no_signal_scores_near_zero(rng):
    X = rng.normal(0.0, 1.0, (6000, 3))
    y = rng.normal(0.0, 1.0, 6000)
    r2, _, _ = readout_r2(X, y, seed=0)
    assert r2 < 0.05


def test_rff_deterministic(rng):
    X = rng.uniform(-1.0, 1.0, (500, 2))
    y = X[:, 0] ** 3
    a = readout_r2(X, y, seed=3)
    b = readout_r2(X, y, seed=3)
    assert a[0] == b[0]
    np.testing.assert_array_equal(a[2], b[2])


def test_rff_rejects_identical_rows():
    X = np.ones((50, 2))
    with pytest.raises(ConstantColumnError):
        RandomFourierRidge().fit(X, np.arange(50.0))


def test_rff_shape_checks(rng):
    with pytest.raises(ShapeError):
        RandomFourierRidge().fit(np.zeros(10), np.zeros(10))
    with pytest.raises(ShapeError):
        RandomFourierRidge().fit(np.zeros((10, 2)), np.zeros(9))


def test_readout_split_guard():
    with pytest.raises(DegenerateSplitError):
        readout_r2(np.zeros((5, 1)), np.arange(5.0))


def test_make_readout_kinds(rng):
    assert isinstance(make_readout("rff"), RandomFourierRidge)
    X = rng.uniform(-1.0, 1.0, (600, 2))
    y = 2.0 * X[:, 0] - X[:, 1]
    r2, _, _ = readout_r2(X, y, kind="mlp", seed=0)
    assert r2 > 0.9
    with pytest.raises(ShapeError):
        make_readout("forest")


def test_rff_estimator_params():
    est = RandomFourierRidge(n_features=64, ridge=1e-2, seed=5)
    assert est.get_params()["n_features"] == 64
    assert est.get_params()["ridge"] == 1e-2

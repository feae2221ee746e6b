"""Dense-net primitives: forward, gradients, Adam training, serialization."""

import numpy as np
import pytest

from lighttunnel.exceptions import FormatError, NonFiniteError, ParamError, ShapeError
from lighttunnel.nnet import (
    ACTIVATIONS,
    AdamState,
    DenseNet,
    DenseNetRegressor,
    Layer,
    TrainConfig,
    forward,
    init_dense_net,
    load_weights,
    mse_gradients,
    save_weights,
    train_mse,
)


def small_net(seed=0, dims=(3, 4, 2), hidden="relu"):
    return init_dense_net(dims, hidden_activation=hidden, seed=seed)


def flatten_params(net):
    return np.concatenate([l.W.ravel() for l in net.layers]
                          + [l.b.ravel() for l in net.layers])


def test_identity_layer_passes_input_through():
    net = DenseNet([Layer(W=np.eye(3, dtype=np.float32),
                          b=np.zeros(3, dtype=np.float32))])
    X = np.arange(12.0).reshape(4, 3)
    assert np.array_equal(forward(net, X), X)


def test_zero_weights_broadcast_bias():
    net = DenseNet([Layer(W=np.zeros((3, 2), dtype=np.float32),
                          b=np.array([1.5, -2.0], dtype=np.float32))])
    out = forward(net, np.random.default_rng(0).normal(size=(5, 3)))
    assert np.array_equal(out, np.tile([1.5, -2.0], (5, 1)))


def test_two_layer_forward_hand_computed():
    # First layer: z = [[1,2],[3,4]] x + [1,-1], relu. Second: identity sum.
    l1 = Layer(W=np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32),
               b=np.array([1.0, -1.0], dtype=np.float32), activation="relu")
    l2 = Layer(W=np.array([[1.0], [1.0]], dtype=np.float32),
               b=np.array([0.5], dtype=np.float32))
    net = DenseNet([l1, l2])
    # x = (1, -1): z1 = (1*1 + 3*(-1) + 1, 2*1 + 4*(-1) - 1) = (-1, -3) -> relu (0, 0)
    # out = 0 + 0 + 0.5
    assert forward(net, np.array([[1.0, -1.0]]))[0, 0] == 0.5
    # x = (1, 1): z1 = (5, 5) -> out = 10.5
    assert forward(net, np.array([[1.0, 1.0]]))[0, 0] == 10.5


def test_leaky_relu_slope():
    net = DenseNet([Layer(W=np.eye(1, dtype=np.float32),
                          b=np.zeros(1, dtype=np.float32), activation="leaky_relu")])
    assert forward(net, np.array([[-2.0]]))[0, 0] == pytest.approx(-0.02)
    assert forward(net, np.array([[3.0]]))[0, 0] == 3.0


def test_forward_rejects_wrong_width():
    with pytest.raises(ShapeError):
        forward(small_net(), np.zeros((4, 5)))


def test_init_is_deterministic_and_bounded():
    a, b = small_net(seed=4), small_net(seed=4)
    assert np.array_equal(flatten_params(a), flatten_params(b))
    assert not np.array_equal(flatten_params(small_net(seed=5)), flatten_params(a))
    for layer, fan_in in zip(a.layers, (3, 4)):
        bound = np.sqrt(6.0 / fan_in)
        assert np.all(np.abs(layer.W) <= bound)
        assert np.all(layer.b == 0.0)


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(0)
    net = init_dense_net((4, 5, 3, 2), hidden_activation="leaky_relu", seed=0)
    # Float64 parameters so the central-difference quotient is meaningful.
    for layer in net.layers:
        layer.W = layer.W.astype(np.float64)
        layer.b = layer.b.astype(np.float64)
    X = rng.normal(0.0, 1.0, (8, 4))
    Y = rng.normal(0.0, 1.0, (8, 2))
    _, gW, gb = mse_gradients(net, X, Y)

    eps = 1e-6
    worst = 0.0
    for k, layer in enumerate(net.layers):
        for attr, grads in (("W", gW[k]), ("b", gb[k])):
            flat = getattr(layer, attr).ravel()
            picks = rng.choice(flat.size, size=min(10, flat.size), replace=False)
            for i in picks:
                orig = flat[i]
                flat[i] = orig + eps
                up, _, _ = mse_gradients(net, X, Y)
                flat[i] = orig - eps
                down, _, _ = mse_gradients(net, X, Y)
                flat[i] = orig
                numeric = (up - down) / (2.0 * eps)
                analytic = grads.ravel()[i]
                scale = max(abs(numeric), abs(analytic), 1e-8)
                worst = max(worst, abs(numeric - analytic) / scale)
    assert worst < 1e-4, f"max relative gradient error {worst:.2e}"


def test_lr_zero_keeps_weights_and_flat_history(rng):
    net = small_net(seed=2)
    before = flatten_params(net).copy()
    X = rng.normal(0.0, 1.0, (64, 3))
    Y = rng.normal(0.0, 1.0, (64, 2))
    _, history = train_mse(net, X, Y, TrainConfig(lr=0.0, epochs=5, seed=0))
    assert np.array_equal(flatten_params(net), before)
    assert len(history) == 5
    np.testing.assert_allclose(history, history[0], rtol=1e-12)


def test_epochs_zero_returns_initialization(rng):
    net = small_net(seed=2)
    before = flatten_params(net).copy()
    X = rng.normal(0.0, 1.0, (16, 3))
    Y = rng.normal(0.0, 1.0, (16, 2))
    _, history = train_mse(net, X, Y, TrainConfig(epochs=0))
    assert history == []
    assert np.array_equal(flatten_params(net), before)


def test_adam_zero_gradient_is_pure_weight_decay():
    lr, wd, steps = 1e-2, 1e-3, 7
    params = [np.full((2, 2), 4.0), np.array([-3.0, 5.0])]
    expected = [p.copy() for p in params]
    state = AdamState(lr=lr, weight_decay=wd)
    zeros = [np.zeros_like(p) for p in params]
    for _ in range(steps):
        state.update(params, zeros)
        expected = [p - lr * (wd * p) for p in expected]
    for p, e in zip(params, expected):
        np.testing.assert_allclose(p, e, rtol=1e-12)
        np.testing.assert_allclose(p, (1.0 - lr * wd) ** steps * (e / (1.0 - lr * wd) ** steps),
                                   rtol=1e-12)


def test_linear_net_reaches_least_squares_solution():
    rng = np.random.default_rng(3)
    X = rng.normal(0.0, 1.0, (256, 4))
    W_true = rng.normal(0.0, 1.0, (4, 3))
    Y = X @ W_true
    net = init_dense_net((4, 3), seed=0)
    net, history = train_mse(net, X, Y, TrainConfig(lr=1e-2, epochs=200, seed=0))
    final = float(np.mean((forward(net, X) - Y) ** 2))
    assert final < 1e-6
    assert history[-1] < history[0]
    # The convex problem has the closed-form solution W_true itself.
    coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
    np.testing.assert_allclose(net.layers[0].W, coef, atol=1e-5)


def test_training_is_deterministic(rng):
    X = rng.normal(0.0, 1.0, (128, 3))
    Y = rng.normal(0.0, 1.0, (128, 2))
    cfg = TrainConfig(lr=1e-3, epochs=3, seed=11)
    net_a, hist_a = train_mse(small_net(seed=1), X, Y, cfg)
    net_b, hist_b = train_mse(small_net(seed=1), X, Y, cfg)
    assert hist_a == hist_b
    assert np.array_equal(flatten_params(net_a), flatten_params(net_b))


def test_training_rejects_bad_shapes_and_config(rng):
    X = rng.normal(0.0, 1.0, (16, 3))
    with pytest.raises(ShapeError):
        train_mse(small_net(), X, np.zeros((16, 5)), TrainConfig())
    with pytest.raises(ShapeError):
        train_mse(small_net(), X, np.zeros((8, 2)), TrainConfig())
    with pytest.raises(ParamError):
        train_mse(small_net(), X, np.zeros((16, 2)), TrainConfig(epochs=-1))
    with pytest.raises(ParamError):
        train_mse(small_net(), X, np.zeros((16, 2)), TrainConfig(batch_size=0))


def test_training_aborts_on_non_finite_loss():
    X = np.array([[1.0, 2.0, np.inf]])
    with pytest.raises(NonFiniteError):
        train_mse(small_net(), X, np.zeros((1, 2)), TrainConfig(epochs=1))


def test_weight_container_round_trip_bitwise():
    net = init_dense_net((3, 7, 2), hidden_activation="leaky_relu", seed=9)
    clone = load_weights(save_weights(net))
    assert clone.dims == net.dims
    for a, b in zip(net.layers, clone.layers):
        assert a.activation == b.activation
        assert np.array_equal(a.W, b.W) and a.W.dtype == b.W.dtype
        assert np.array_equal(a.b, b.b)


def test_weight_container_rejects_corruption():
    blob = save_weights(small_net())
    with pytest.raises(FormatError):
        load_weights(blob[:10])
    with pytest.raises(FormatError):
        load_weights(blob[:-6])  # truncated: checksum cannot match
    bad_magic = b"XXXX" + blob[4:]
    with pytest.raises(FormatError):
        load_weights(bad_magic)
    flipped = bytearray(blob)
    flipped[15] ^= 0xFF
    with pytest.raises(FormatError):
        load_weights(bytes(flipped))


def test_weight_container_rejects_future_version():
    import struct
    blob = save_weights(small_net())
    body = bytearray(blob[:-4])
    body[4:6] = struct.pack("<H", 99)
    import zlib
    blob = bytes(body) + struct.pack("<I", zlib.crc32(bytes(body)))
    with pytest.raises(FormatError):
        load_weights(blob)


def test_activation_tags_stable():
    # Container format encodes activations by index; the tuple is frozen.
    assert ACTIVATIONS == ("identity", "relu", "leaky_relu")


def test_regressor_estimator_smoke(rng):
    X = rng.uniform(-1.0, 1.0, (400, 2))
    y = X[:, 0] - 2.0 * X[:, 1]
    est = DenseNetRegressor(hidden_dims=(16,), lr=1e-2, epochs=60, seed=0)
    pred = est.fit(X, y).predict(X)
    assert pred.shape == y.shape
    assert float(np.mean((pred - y) ** 2)) < 1e-2
    assert est.get_params()["hidden_dims"] == (16,)

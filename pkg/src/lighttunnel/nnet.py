"""Dense neural-network primitives: forward, backprop, Adam, serialization.

Deliberately minimal: dense layers with relu / leaky_relu(0.01) / identity
activations, mean-squared-error training with decoupled weight decay, and a
versioned binary weight container. Weights are stored in 32-bit floats;
all arithmetic accumulates in 64-bit so results are platform independent.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from . import _rng
from .exceptions import FormatError, NonFiniteError, ParamError, ShapeError

ACTIVATIONS = ("identity", "relu", "leaky_relu")
LEAKY_SLOPE = 0.01


@dataclass
class Layer:
    W: np.ndarray  # (fan_in, fan_out)
    b: np.ndarray  # (fan_out,)
    activation: str = "identity"


@dataclass
class DenseNet:
    layers: list

    @property
    def dims(self):
        return tuple([self.layers[0].W.shape[0]] + [l.W.shape[1] for l in self.layers])


def _check_net(net: DenseNet) -> DenseNet:
    prev = None
    for k, layer in enumerate(net.layers):
        if layer.activation not in ACTIVATIONS:
            raise ParamError(f"layer {k}: unknown activation {layer.activation!r}")
        if layer.W.ndim != 2 or layer.b.shape != (layer.W.shape[1],):
            raise ShapeError(f"layer {k}: weight {layer.W.shape} and bias {layer.b.shape} disagree")
        if prev is not None and layer.W.shape[0] != prev:
            raise ShapeError(f"layer {k}: expects {layer.W.shape[0]} inputs, got {prev}")
        prev = layer.W.shape[1]
    return net


def init_dense_net(dims, hidden_activation: str = "relu",
                   output_activation: str = "identity", seed: int = 0) -> DenseNet:
    """He-style uniform fan-in initialization, reproducible from the seed."""
    if len(dims) < 2:
        raise ParamError("need at least input and output dims")
    layers = []
    for k in range(len(dims) - 1):
        fan_in, fan_out = int(dims[k]), int(dims[k + 1])
        gen = _rng.stream(seed, _rng.TAG_INIT, k)
        bound = np.sqrt(6.0 / fan_in)
        W = gen.uniform(-bound, bound, size=(fan_in, fan_out)).astype(np.float32)
        b = np.zeros(fan_out, dtype=np.float32)
        act = hidden_activation if k < len(dims) - 2 else output_activation
        layers.append(Layer(W=W, b=b, activation=act))
    return _check_net(DenseNet(layers))


def _activate(z, tag):
    if tag == "identity":
        return z
    if tag == "relu":
        return np.maximum(z, 0.0)
    return np.where(z > 0.0, z, LEAKY_SLOPE * z)


def _activate_grad(z, tag):
    if tag == "identity":
        return np.ones_like(z)
    if tag == "relu":
        return (z > 0.0).astype(z.dtype)
    return np.where(z > 0.0, 1.0, LEAKY_SLOPE)


def forward(net: DenseNet, batch: np.ndarray) -> np.ndarray:
    """Apply the network to a batch (rows are samples); returns float64."""
    _check_net(net)
    h = np.asarray(batch, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != net.layers[0].W.shape[0]:
        raise ShapeError(f"batch shape {h.shape} does not match input dim "
                         f"{net.layers[0].W.shape[0]}")
    for layer in net.layers:
        h = _activate(h @ layer.W.astype(np.float64) + layer.b.astype(np.float64),
                      layer.activation)
    return h


def _forward_cached(weights, biases, tags, X):
    pre, post = [], [X]
    h = X
    for W, b, tag in zip(weights, biases, tags):
        z = h @ W + b
        h = _activate(z, tag)
        pre.append(z)
        post.append(h)
    return pre, post


def _backward(weights, tags, pre, post, dloss):
    """Gradients of a scalar loss given d(loss)/d(output)."""
    gW, gb = [], []
    delta = dloss
    for k in range(len(weights) - 1, -1, -1):
        delta = delta * _activate_grad(pre[k], tags[k])
        gW.append(post[k].T @ delta)
        gb.append(delta.sum(axis=0))
        if k > 0:
            delta = delta @ weights[k].T
    return gW[::-1], gb[::-1]


def mse_gradients(net: DenseNet, X: np.ndarray, Y: np.ndarray):
    """Mean-squared-error loss and its gradients in float64."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    weights = [l.W.astype(np.float64) for l in net.layers]
    biases = [l.b.astype(np.float64) for l in net.layers]
    tags = [l.activation for l in net.layers]
    # Overflow is tolerated here; train_mse turns a non-finite loss into an
    # explicit NonFiniteError instead of a warning storm.
    with np.errstate(over="ignore", invalid="ignore"):
        pre, post = _forward_cached(weights, biases, tags, X)
        resid = post[-1] - Y
        loss = float(np.mean(resid ** 2))
        dloss = 2.0 * resid / resid.size
        gW, gb = _backward(weights, tags, pre, post, dloss)
    return loss, gW, gb


@dataclass
class TrainConfig:
    lr: float = 1e-3
    weight_decay: float = 0.0
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0


@dataclass
class AdamState:
    """Decoupled-weight-decay Adam accumulators for one parameter list."""

    lr: float
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def ensure(self, params):
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]

    def update(self, params, grads):
        """Apply one Adam step in place; weight decay acts directly on params."""
        self.ensure(params)
        self.step += 1
        c1 = 1.0 - self.beta1 ** self.step
        c2 = 1.0 - self.beta2 ** self.step
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * ((m / c1) / (np.sqrt(v / c2) + self.eps) + self.weight_decay * p)


def train_mse(net: DenseNet, X, Y, cfg: TrainConfig):
    """Train in place on (X, Y) with mini-batch Adam; returns (net, history).

    The history holds the mean training loss of each epoch. Shuffling depends
    only on ``cfg.seed``, so reruns are bit-identical.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or len(X) != len(Y):
        raise ShapeError(f"need matching 2-d arrays, got {X.shape} and {Y.shape}")
    if Y.shape[1] != net.layers[-1].W.shape[1]:
        raise ShapeError(f"targets have {Y.shape[1]} columns, net outputs "
                         f"{net.layers[-1].W.shape[1]}")
    if cfg.epochs < 0 or cfg.batch_size <= 0 or cfg.lr < 0 or cfg.weight_decay < 0:
        raise ParamError(f"invalid training config: {cfg}")
    _check_net(net)

    # Float64 master copies; weights go back to float32 storage at the end.
    weights = [l.W.astype(np.float64) for l in net.layers]
    biases = [l.b.astype(np.float64) for l in net.layers]
    params = weights + biases
    state = AdamState(lr=cfg.lr, weight_decay=cfg.weight_decay)
    work = DenseNet([Layer(W=W, b=b, activation=l.activation)
                     for W, b, l in zip(weights, biases, net.layers)])

    history = []
    n = len(X)
    for epoch in range(cfg.epochs):
        order = _rng.stream(cfg.seed, _rng.TAG_SHUFFLE, epoch).permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, gW, gb = mse_gradients(work, X[idx], Y[idx])
            if not np.isfinite(loss):
                raise NonFiniteError(f"loss became {loss} at epoch {epoch}, "
                                     f"batch starting at {start}")
            state.update(params, gW + gb)
            total += loss * len(idx)
        history.append(total / n)

    for layer, W, b in zip(net.layers, weights, biases):
        layer.W = W.astype(np.float32)
        layer.b = b.astype(np.float32)
    return net, history


_MAGIC = b"DNW1"
_VERSION = 1


def save_weights(net: DenseNet) -> bytes:
    """Serialize to a little-endian container with a trailing CRC32."""
    _check_net(net)
    parts = [_MAGIC, struct.pack("<HH", _VERSION, len(net.layers))]
    for layer in net.layers:
        parts.append(struct.pack("<IIB", layer.W.shape[0], layer.W.shape[1],
                                 ACTIVATIONS.index(layer.activation)))
    for layer in net.layers:
        parts.append(np.ascontiguousarray(layer.W, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(layer.b, dtype="<f4").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def load_weights(blob: bytes) -> DenseNet:
    if len(blob) < 12:
        raise FormatError(f"container truncated at {len(blob)} bytes")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise FormatError("checksum mismatch")
    if body[:4] != _MAGIC:
        raise FormatError(f"bad magic {body[:4]!r}")
    version, n_layers = struct.unpack("<HH", body[4:8])
    if version != _VERSION:
        raise FormatError(f"unsupported container version {version}")
    off = 8
    shapes = []
    for _ in range(n_layers):
        if off + 9 > len(body):
            raise FormatError("container truncated inside header")
        fan_in, fan_out, act = struct.unpack("<IIB", body[off:off + 9])
        if act >= len(ACTIVATIONS):
            raise FormatError(f"unknown activation tag {act}")
        shapes.append((fan_in, fan_out, ACTIVATIONS[act]))
        off += 9
    layers = []
    for fan_in, fan_out, act in shapes:
        nbytes = 4 * (fan_in * fan_out + fan_out)
        if off + nbytes > len(body):
            raise FormatError("container truncated inside weights")
        W = np.frombuffer(body[off:off + 4 * fan_in * fan_out], dtype="<f4")
        b = np.frombuffer(body[off + 4 * fan_in * fan_out:off + nbytes], dtype="<f4")
        layers.append(Layer(W=W.reshape(fan_in, fan_out).copy(),
                            b=b.copy(), activation=act))
        off += nbytes
    if off != len(body):
        raise FormatError(f"{len(body) - off} trailing bytes in container")
    return _check_net(DenseNet(layers))


class DenseNetRegressor(RegressorMixin, BaseEstimator):
    """Scikit-learn style wrapper over the dense-net trainer."""

    def __init__(self, hidden_dims=(64,), activation="relu", lr=1e-3,
                 weight_decay=0.0, epochs=100, batch_size=32, seed=0):
        self.hidden_dims = hidden_dims
        self.activation = activation
        self.lr = lr
        self.weight_decay = weight_decay
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if y.ndim == 1:
            y = y[:, None]
        dims = (X.shape[1], *self.hidden_dims, y.shape[1])
        net = init_dense_net(dims, hidden_activation=self.activation, seed=self.seed)
        cfg = TrainConfig(lr=self.lr, weight_decay=self.weight_decay,
                          epochs=self.epochs, batch_size=self.batch_size, seed=self.seed)
        self.net_, self.loss_history_ = train_mse(net, X, y, cfg)
        return self

    def predict(self, X):
        out = forward(self.net_, np.asarray(X, dtype=np.float64))
        return out[:, 0] if out.shape[1] == 1 else out

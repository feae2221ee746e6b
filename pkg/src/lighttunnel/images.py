"""Neural image decoder and an analytic stand-in image model.

The decoder is a dense network from the five causal factors to a 64x64x3
image, with inputs normalized to roughly [-1, 1] (brightness / 255, angles
/ 180) and outputs clamped to [0, 1]. The analytic model renders a centered
disk whose color follows the polarizer physics; it exists so training tests
never need the multi-gigabyte recorded image corpus.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass

import numpy as np
import pandas as pd
from PIL import Image
from sklearn.base import BaseEstimator, RegressorMixin

from . import nnet
from .exceptions import FormatError, ShapeError
from .inputs import round_half_away
from .sensors import DEFAULT_PARAMS, SensorParams, validate_params

IMAGE_SHAPE = (64, 64, 3)
N_PIXELS = 64 * 64 * 3
DISK_RADIUS = 24.0
BACKGROUND_FACTOR = 0.15


@dataclass(frozen=True)
class DecoderSpec:
    """Decoder architecture: 5 -> hidden layers -> 12288, ReLU inside."""

    hidden: tuple = (4096, 4096)

    @property
    def dims(self):
        return (5, *self.hidden, N_PIXELS)


DECODER_TRAIN_DEFAULTS = nnet.TrainConfig(lr=1e-3, weight_decay=1e-5,
                                          epochs=100, batch_size=4096, seed=0)


def encode_decoder_inputs(frame: pd.DataFrame) -> np.ndarray:
    """Normalize factor columns into the decoder's input space."""
    cols = [frame[c].to_numpy(dtype=float) for c in ("red", "green", "blue")]
    angs = [frame[c].to_numpy(dtype=float) for c in ("pol_1", "pol_2")]
    return np.column_stack([c / 255.0 for c in cols] + [a / 180.0 for a in angs])


def decode_frame(frame: pd.DataFrame, net: nnet.DenseNet) -> np.ndarray:
    """Decode a table of inputs to an (n, 64, 64, 3) stack of images."""
    if net.dims[0] != 5 or net.dims[-1] != N_PIXELS:
        raise ShapeError(f"decoder must map 5 -> {N_PIXELS}, got dims {net.dims}")
    flat = nnet.forward(net, encode_decoder_inputs(frame))
    return np.clip(flat, 0.0, 1.0).reshape(len(frame), *IMAGE_SHAPE)


def decode(x, net: nnet.DenseNet) -> np.ndarray:
    """Decode a single :class:`TunnelInputs` to a 64x64x3 image in [0, 1]."""
    return decode_frame(x.to_frame(), net)[0]


def _disk_mask():
    yy, xx = np.mgrid[0:64, 0:64]
    # Geometric center of the 64 px grid lies between pixels 31 and 32.
    return ((xx - 31.5) ** 2 + (yy - 31.5) ** 2) <= DISK_RADIUS ** 2


_MASK = _disk_mask()


def analytic_frame(frame: pd.DataFrame, params: SensorParams = DEFAULT_PARAMS) -> np.ndarray:
    """Vectorized :func:`analytic_image` over a factor table."""
    validate_params(params)
    rgb = frame[["red", "green", "blue"]].to_numpy(dtype=float) / 255.0
    delta = np.radians(frame["pol_1"].to_numpy(dtype=float) - frame["pol_2"].to_numpy(dtype=float))
    cos2 = np.cos(delta) ** 2
    # Convex form, matching the sensor model: exact Tp / Tc at the endpoints.
    malus = np.asarray(params.Tp, float)[None, :] * cos2[:, None] \
        + np.asarray(params.Tc, float)[None, :] * (1.0 - cos2)[:, None]
    color = np.minimum(rgb * malus, 1.0)
    images = np.empty((len(frame), *IMAGE_SHAPE))
    images[:] = (BACKGROUND_FACTOR * color)[:, None, None, :]
    images[:, _MASK, :] = color[:, None, :]
    return images


def analytic_image(x, params: SensorParams = DEFAULT_PARAMS) -> np.ndarray:
    """Centered disk of the polarizer-filtered source color on a dim field."""
    return analytic_frame(x.to_frame(), params)[0]


def train_decoder(frame: pd.DataFrame, images: np.ndarray,
                  spec: DecoderSpec = DecoderSpec(),
                  cfg: nnet.TrainConfig = DECODER_TRAIN_DEFAULTS):
    """Train a decoder on (inputs, images) pairs; returns (net, history)."""
    images = np.asarray(images, dtype=np.float64)
    if images.shape != (len(frame), *IMAGE_SHAPE):
        raise ShapeError(f"expected images shaped {(len(frame), *IMAGE_SHAPE)}, "
                         f"got {images.shape}")
    net = nnet.init_dense_net(spec.dims, hidden_activation="relu", seed=cfg.seed)
    return nnet.train_mse(net, encode_decoder_inputs(frame),
                          images.reshape(len(frame), N_PIXELS), cfg)


_DECODER_MAGIC = b"LTID"


def decoder_to_bytes(net: nnet.DenseNet) -> bytes:
    """Weight container prefixed with the input-normalization recipe."""
    meta = json.dumps({"inputs": ["red/255", "green/255", "blue/255",
                                  "pol_1/180", "pol_2/180"],
                       "output": "64x64x3 pixels clamped to [0,1]"}).encode()
    return _DECODER_MAGIC + struct.pack("<I", len(meta)) + meta + nnet.save_weights(net)


def decoder_from_bytes(blob: bytes) -> nnet.DenseNet:
    if blob[:4] != _DECODER_MAGIC:
        raise FormatError(f"bad decoder magic {blob[:4]!r}")
    (n_meta,) = struct.unpack("<I", blob[4:8])
    net = nnet.load_weights(blob[8 + n_meta:])
    if net.dims[0] != 5 or net.dims[-1] != N_PIXELS:
        raise FormatError(f"container is not an image decoder: dims {net.dims}")
    return net


def image_to_png(image: np.ndarray) -> bytes:
    """Serialize one image as 8-bit RGB PNG, pixel = round(value * 255)."""
    image = np.asarray(image, dtype=float)
    if image.shape != IMAGE_SHAPE:
        raise ShapeError(f"expected image shaped {IMAGE_SHAPE}, got {image.shape}")
    counts = round_half_away(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(counts, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def png_to_image(blob: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(blob)) as img:
        arr = np.asarray(img.convert("RGB"), dtype=float)
    if arr.shape != IMAGE_SHAPE:
        raise FormatError(f"PNG decodes to shape {arr.shape}, expected {IMAGE_SHAPE}")
    return arr / 255.0


class ImageDecoder(RegressorMixin, BaseEstimator):
    """Estimator over the decoder: fit on (input table, image stack)."""

    def __init__(self, hidden=(4096, 4096), lr=1e-3, weight_decay=1e-5,
                 epochs=100, batch_size=4096, seed=0):
        self.hidden = hidden
        self.lr = lr
        self.weight_decay = weight_decay
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed

    def fit(self, X: pd.DataFrame, y: np.ndarray):
        cfg = nnet.TrainConfig(lr=self.lr, weight_decay=self.weight_decay,
                               epochs=self.epochs, batch_size=self.batch_size,
                               seed=self.seed)
        self.net_, self.loss_history_ = train_decoder(
            X, y, spec=DecoderSpec(hidden=tuple(self.hidden)), cfg=cfg)
        return self

    def predict(self, X: pd.DataFrame) -> np.ndarray:
        return decode_frame(X, self.net_)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(decoder_to_bytes(self.net_))

    @classmethod
    def load(cls, path) -> "ImageDecoder":
        with open(path, "rb") as fh:
            net = decoder_from_bytes(fh.read())
        out = cls(hidden=tuple(net.dims[1:-1]))
        out.net_ = net
        return out

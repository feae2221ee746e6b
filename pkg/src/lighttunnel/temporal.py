"""Time-evolving factor process with random single-node interventions.

Brightness follows chained mean-reverting walks and the second polarizer is
coupled to the first, with boundary reflections keeping every factor inside
its control range ([0, 255] for colors, [-90, 90] for angles). At each step
one factor may be overridden with a uniform value; targets are recorded as
one-hot indicator columns.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
import pandas as pd

from . import _rng
from .exceptions import OutOfBoundsError, ParamError, UnknownTargetError
from .inputs import ANGLE_DATA_RANGE, BRIGHTNESS_RANGE, FACTOR_COLUMNS
from .scm import _attach_observations, make_image_fn
from .sensors import DEFAULT_PARAMS

TARGET_COLUMNS = tuple(f"target_{c}" for c in FACTOR_COLUMNS)

FACTOR_BOUNDS = (BRIGHTNESS_RANGE,) * 3 + (ANGLE_DATA_RANGE,) * 2


@dataclass(frozen=True)
class TemporalSpec:
    """Description of the temporal process.

    Innovation fields are the half-widths of the uniform innovations; the
    color half-width applies to red, green and blue alike.
    """

    initial: tuple = (127.5, 127.5, 127.5, 0.0, 0.0)
    color_innovation: float = 50.0
    angle_1_innovation: float = 10.0
    angle_2_innovation: float = 5.0
    no_intervention_prob: float = 0.3
    n_steps: int = 100000
    n_eval: int = 1000
    seed: int = 0


def validate_temporal_spec(spec: TemporalSpec) -> TemporalSpec:
    _check_state(np.asarray(spec.initial, dtype=float))
    if not 0.0 <= spec.no_intervention_prob <= 1.0:
        raise ParamError(f"no_intervention_prob must be a probability, "
                         f"got {spec.no_intervention_prob}")
    for name in ("color_innovation", "angle_1_innovation", "angle_2_innovation"):
        if getattr(spec, name) < 0:
            raise ParamError(f"{name} must be nonnegative")
    if spec.n_steps < 1 or spec.n_eval < 0:
        raise ParamError(f"need n_steps >= 1 and n_eval >= 0, got "
                         f"{spec.n_steps}, {spec.n_eval}")
    return spec


def temporal_spec_to_doc(spec: TemporalSpec) -> dict:
    return {f.name: getattr(spec, f.name) for f in fields(spec)}


def temporal_spec_from_doc(doc: dict) -> TemporalSpec:
    known = {f.name for f in fields(TemporalSpec)}
    unknown = set(doc) - known
    if unknown:
        raise ParamError(f"unknown temporal spec fields: {sorted(unknown)}")
    doc = {k: tuple(v) if isinstance(v, list) else v for k, v in doc.items()}
    return validate_temporal_spec(TemporalSpec(**doc))


def fold_brightness(x: float) -> float:
    """Reflect into [0, 255]: negative values mirror at 0, overshoot at 255.

    A single reflection suffices for arguments in [-255, 510]; rarer, larger
    excursions reflect again so the result is always in range.
    """
    x = float(x)
    while x < 0.0 or x > 255.0:
        x = -x if x < 0.0 else 510.0 - x
    return x


def fold_angle(x: float) -> float:
    """Reflect into [-90, 90]; same boundary rule as :func:`fold_brightness`."""
    x = float(x)
    while x < -90.0 or x > 90.0:
        x = -180.0 - x if x < -90.0 else 180.0 - x
    return x


def coupling_sign(red: float, blue: float) -> float:
    """+1 when blue exceeds red, else -1 (ties included)."""
    return 1.0 if blue > red else -1.0


def _check_state(state):
    if state.shape != (5,):
        raise OutOfBoundsError(f"state must have five entries, got shape {state.shape}")
    for name, value, (lo, hi) in zip(FACTOR_COLUMNS, state, FACTOR_BOUNDS):
        if not (np.isfinite(value) and lo <= value <= hi):
            raise OutOfBoundsError(f"state {name}={value} outside [{lo}, {hi}]")
    return state


def _draw_step(gen, spec):
    """Fixed per-step draw layout: 5 innovations, intervention coin,
    target index, target value in [0, 1)."""
    eps = np.concatenate([
        gen.uniform(-spec.color_innovation, spec.color_innovation, size=3),
        gen.uniform(-spec.angle_1_innovation, spec.angle_1_innovation, size=1),
        gen.uniform(-spec.angle_2_innovation, spec.angle_2_innovation, size=1),
    ])
    return eps, gen.uniform(), int(gen.integers(5)), gen.uniform()


def step_temporal(state, intervention=None, innovations=None,
                  spec: TemporalSpec = TemporalSpec()) -> np.ndarray:
    """Advance the process by one step.

    ``intervention`` is None or a ``(factor_name, value)`` pair that
    overrides the stated assignment of that factor. ``innovations`` is the
    5-vector of innovation draws; when omitted they are all zero, which
    gives the deterministic skeleton of the process.
    """
    state = _check_state(np.asarray(state, dtype=float))
    eps = np.zeros(5) if innovations is None else np.asarray(innovations, dtype=float)
    red, green, blue, pol_1, pol_2 = state
    nxt = np.array([
        fold_brightness(red + eps[0]),
        fold_brightness(green + (red - green) / 2.0 + eps[1]),
        fold_brightness(blue + (green - blue) / 4.0 + eps[2]),
        fold_angle(pol_1 + eps[3]),
        fold_angle(pol_2 + coupling_sign(red, blue) * ((pol_1 - pol_2) / 4.0) * eps[4]),
    ])
    if intervention is not None:
        name, value = intervention
        if name not in FACTOR_COLUMNS:
            raise UnknownTargetError(f"unknown intervention target {name!r}")
        k = FACTOR_COLUMNS.index(name)
        lo, hi = FACTOR_BOUNDS[k]
        if not lo <= value <= hi:
            raise OutOfBoundsError(f"intervention {name}={value} outside [{lo}, {hi}]")
        nxt[k] = value
    return nxt


def sample_sequence(spec: TemporalSpec):
    """Run the process for ``n_steps``; returns (factors, one-hot targets)."""
    validate_temporal_spec(spec)
    gen = _rng.stream(spec.seed, _rng.TAG_SEQUENCE)
    state = np.asarray(spec.initial, dtype=float)
    factors = np.empty((spec.n_steps, 5))
    onehot = np.zeros((spec.n_steps, 5), dtype=np.int64)
    for t in range(spec.n_steps):
        eps, coin, k, value01 = _draw_step(gen, spec)
        intervention = None
        if coin >= spec.no_intervention_prob:
            lo, hi = FACTOR_BOUNDS[k]
            intervention = (FACTOR_COLUMNS[k], lo + (hi - lo) * value01)
            onehot[t, k] = 1
        state = step_temporal(state, intervention, eps, spec)
        factors[t] = state
    return factors, onehot


def sample_uniform_factors(n: int, seed: int) -> np.ndarray:
    """IID factors, uniform over the control ranges (for metric evaluation)."""
    gen = _rng.stream(seed, _rng.TAG_EVAL)
    cols = [gen.uniform(lo, hi, size=n) for lo, hi in FACTOR_BOUNDS]
    return np.column_stack(cols)


def build_citris_dataset(spec: TemporalSpec, sensor_params=DEFAULT_PARAMS,
                         image_model: str = "analytic", decoder=None):
    """Sequential 80/10/10 splits of one long run, plus an iid eval split.

    Rows keep time order inside each split; the one-hot target columns mark
    the intervention that produced each row. The eval split has uniformly
    sampled factors and all-zero targets.
    """
    from .dataset_io import TunnelDataset

    validate_temporal_spec(spec)
    factors, onehot = sample_sequence(spec)
    n = spec.n_steps
    n_train, n_val = int(0.8 * n), int(0.1 * n)
    bounds = {"train": (0, n_train), "val": (n_train, n_train + n_val),
              "test": (n_train + n_val, n)}
    splits = {}
    for name, (lo, hi) in bounds.items():
        part = pd.DataFrame(factors[lo:hi], columns=list(FACTOR_COLUMNS))
        part[list(TARGET_COLUMNS)] = onehot[lo:hi]
        splits[name] = _attach_observations(part, sensor_params)
    if spec.n_eval:
        part = pd.DataFrame(sample_uniform_factors(spec.n_eval, spec.seed),
                            columns=list(FACTOR_COLUMNS))
        part[list(TARGET_COLUMNS)] = 0
        splits["eval"] = _attach_observations(part, sensor_params)
    return TunnelDataset(
        name="citris", kind="citris", seed=spec.seed, splits=splits,
        image_fn=make_image_fn(image_model, sensor_params, decoder),
        sensor_params=sensor_params,
        spec_doc=temporal_spec_to_doc(spec),
        image_model=image_model,
    )

"""Mechanistic model of the tunnel's numeric sensors.

Three two-band light sensors behind successive polarizers (inverse-square
attenuation, per-channel transmission, Malus cosine-squared factor,
exponential gain from diode and exposure codes), a source-current monitor,
and two angle encoders. All functions are deterministic: identical inputs
and parameters give bit-identical outputs.

Least-squares fitting recovers the parameters from calibration tables. Only
products like transmission x (d1/d2)^2 are identifiable from readings alone,
so the distances are fixed, user-supplied constants and the fitted
transmissions absorb the rest.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin

from .exceptions import (
    ParamError,
    RangeError,
    RankDeficientError,
    SaturatedError,
    SchemaError,
)
from .inputs import INPUT_COLUMNS, SENSOR_COLUMNS, ensure_input_columns, round_half_away, validate_frame

LIGHT_MAX_COUNT = 65535.0
ADC_MAX_COUNT = 1023.0


@dataclass(frozen=True)
class SensorParams:
    """All parameters of the sensor model.

    ``S`` maps source brightness (R,G,B) to the infrared (row 0) and visible
    (row 1) responses. ``Ts`` is the per-channel transmission of the first
    polarizer alone; ``Tp``/``Tc`` the joint transmission with parallel and
    crossed axes. ``Q``/``C0`` give the source current, ``A``/``a1``/``a2``
    the angle encoders, and ``Z1``/``Z2`` their calibration zero readings.
    """

    S: tuple = ((3.2, 1.1, 0.4), (0.9, 2.4, 3.0))
    d1: float = 100.0
    d2: float = 200.0
    d3: float = 300.0
    Ts: tuple = (0.42, 0.45, 0.48)
    Tp: tuple = (0.36, 0.40, 0.44)
    Tc: tuple = (0.02, 0.03, 0.04)
    Q: tuple = (0.17, 0.15, 0.13)
    C0: float = 25.0
    A: float = ADC_MAX_COUNT / 720.0
    a1: float = 507.0
    a2: float = 512.0
    Z1: float = 507.0
    Z2: float = 512.0


# Example values above are plausible magnitudes for round numbers' sake, not
# the result of any calibration; fit real values with fit_params.
DEFAULT_PARAMS = SensorParams()


def validate_params(p: SensorParams) -> SensorParams:
    """Check every invariant of :class:`SensorParams`; raise ParamError."""
    S = np.asarray(p.S, dtype=float)
    if S.shape != (2, 3):
        raise ParamError(f"S must be 2x3, got shape {S.shape}")
    if not np.all(np.isfinite(S)) or np.any(S < 0):
        raise ParamError("S must be finite and nonnegative")
    for name in ("Ts", "Tp", "Tc"):
        v = np.asarray(getattr(p, name), dtype=float)
        if v.shape != (3,):
            raise ParamError(f"{name} must be a 3-vector")
        if not np.all(np.isfinite(v)) or np.any(v < 0) or np.any(v > 1):
            raise ParamError(f"{name} must lie in [0, 1]")
    if np.any(np.asarray(p.Tc, dtype=float) > np.asarray(p.Tp, dtype=float)):
        raise ParamError("Tc must not exceed Tp in any channel")
    if not (0 < p.d1 < p.d2 < p.d3):
        raise ParamError(f"distances must satisfy 0 < d1 < d2 < d3, got {p.d1}, {p.d2}, {p.d3}")
    Q = np.asarray(p.Q, dtype=float)
    if Q.shape != (3,):
        raise ParamError("Q must be a 3-vector")
    if not np.all(np.isfinite(Q)) or np.any(Q < 0):
        raise ParamError("Q must be finite and nonnegative")
    if not (np.isfinite(p.C0) and p.C0 >= 0):
        raise ParamError(f"C0 must be nonnegative, got {p.C0}")
    if not (np.isfinite(p.A) and p.A > 0):
        raise ParamError(f"A must be positive, got {p.A}")
    for name in ("a1", "a2"):
        v = getattr(p, name)
        if not (np.isfinite(v) and v >= 0):
            raise ParamError(f"{name} must be nonnegative, got {v}")
    return p


def params_to_json(p: SensorParams) -> str:
    """Serialize parameters to JSON with the exact field names."""
    doc = {}
    for f in dataclasses.fields(p):
        v = getattr(p, f.name)
        doc[f.name] = [list(map(float, row)) for row in v] if f.name == "S" else (
            list(map(float, v)) if isinstance(v, tuple) else float(v)
        )
    return json.dumps(doc, indent=2, sort_keys=True)


def params_from_json(text: str) -> SensorParams:
    doc = json.loads(text)
    names = {f.name for f in dataclasses.fields(SensorParams)}
    unknown = set(doc) - names
    if unknown:
        raise ParamError(f"unknown parameter fields: {sorted(unknown)}")
    missing = names - set(doc)
    if missing:
        raise ParamError(f"missing parameter fields: {sorted(missing)}")
    kwargs = {}
    for name, v in doc.items():
        if name == "S":
            kwargs[name] = tuple(tuple(float(x) for x in row) for row in v)
        elif isinstance(v, list):
            kwargs[name] = tuple(float(x) for x in v)
        else:
            kwargs[name] = float(v)
    return validate_params(SensorParams(**kwargs))


@dataclass(frozen=True)
class SensorReadings:
    """Uncalibrated counts from all numeric sensors for one input setting."""

    ir_1: float
    ir_2: float
    ir_3: float
    vis_1: float
    vis_2: float
    vis_3: float
    current: float
    angle_1: float
    angle_2: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{c: getattr(self, c) for c in SENSOR_COLUMNS}])


def _gains(frame, band, i):
    codes = frame[f"diode_{band}_{i}"].to_numpy(dtype=float) + frame[f"t_{band}_{i}"].to_numpy(dtype=float)
    return np.power(2.0, codes)


def simulate_frame(frame: pd.DataFrame, params: SensorParams = DEFAULT_PARAMS,
                   device_faithful: bool = False, validate: bool = True) -> pd.DataFrame:
    """Simulate all sensors for a table of tunnel inputs.

    Returns a DataFrame with the nine sensor columns. With
    ``device_faithful=True`` outputs are rounded half-away-from-zero and
    clipped to the integer ranges the hardware reports; default is the
    real-valued model.
    """
    validate_params(params)
    if validate:
        validate_frame(frame)
    else:
        ensure_input_columns(frame)

    S = np.asarray(params.S, dtype=float)
    rgb = frame[["red", "green", "blue"]].to_numpy(dtype=float)
    delta = np.radians(frame["pol_1"].to_numpy(dtype=float) - frame["pol_2"].to_numpy(dtype=float))
    cos2 = np.cos(delta) ** 2
    # Convex form of (Tp - Tc) cos^2 + Tc: bit-exact Tp / Tc at the aligned
    # and crossed endpoints for any parameter values.
    malus = np.asarray(params.Tp, float)[None, :] * cos2[:, None] \
        + np.asarray(params.Tc, float)[None, :] * (1.0 - cos2)[:, None]

    # Per-channel light reaching each sensor, before the S response.
    reached = {
        1: rgb,
        2: (params.d1 / params.d2) ** 2 * np.asarray(params.Ts, float)[None, :] * rgb,
        3: (params.d1 / params.d3) ** 2 * malus * rgb,
    }
    out = {}
    for i in (1, 2, 3):
        out[f"ir_{i}"] = _gains(frame, "ir", i) * (reached[i] @ S[0])
        out[f"vis_{i}"] = _gains(frame, "vis", i) * (reached[i] @ S[1])

    v_c = frame["v_c"].to_numpy(dtype=float)
    out["current"] = (rgb @ np.asarray(params.Q, float) + params.C0) * (5.0 / v_c)
    for j, a_j in ((1, params.a1), (2, params.a2)):
        theta = frame[f"pol_{j}"].to_numpy(dtype=float)
        v_ref = frame[f"v_angle_{j}"].to_numpy(dtype=float)
        out[f"angle_{j}"] = np.minimum(ADC_MAX_COUNT, (params.A * theta + a_j) * (5.0 / v_ref))

    if device_faithful:
        for c in out:
            hi = LIGHT_MAX_COUNT if c.startswith(("ir", "vis")) else ADC_MAX_COUNT
            out[c] = np.clip(round_half_away(out[c]), 0.0, hi)
    return pd.DataFrame(out, index=frame.index)[list(SENSOR_COLUMNS)]


def simulate_sensors(x, params: SensorParams = DEFAULT_PARAMS,
                     device_faithful: bool = False) -> SensorReadings:
    """Simulate all sensors for a single :class:`TunnelInputs`."""
    row = simulate_frame(x.to_frame(), params, device_faithful=device_faithful).iloc[0]
    return SensorReadings(**{c: float(row[c]) for c in SENSOR_COLUMNS})


def _check_raw(raw):
    arr = np.asarray(raw, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise RangeError("raw", raw, "finite values")
    if np.any(arr < 0) or np.any(arr > ADC_MAX_COUNT):
        bad = arr[(arr < 0) | (arr > ADC_MAX_COUNT)]
        raise RangeError("raw", bad.flat[0], f"[0, {ADC_MAX_COUNT:g}]")
    return arr if arr.ndim else float(arr)


def calibrate_current(raw, v_c: float = 5.0):
    """Convert a raw current count to amperes at reference voltage ``v_c``."""
    raw = _check_raw(raw)
    return raw * v_c / (ADC_MAX_COUNT * 5.0) * 2.5


def calibrate_angle(raw, j: int, v_ref: float = 5.0):
    """Convert a raw angle count from encoder ``j`` to degrees."""
    if j not in (1, 2):
        raise RangeError("j", j, "one of (1, 2)")
    raw = _check_raw(raw)
    zero = DEFAULT_PARAMS.Z1 if j == 1 else DEFAULT_PARAMS.Z2
    return (raw - zero) * 720.0 / ADC_MAX_COUNT * v_ref / 5.0


def _lstsq(design, target, what):
    coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < design.shape[1]:
        raise RankDeficientError(f"{what} design matrix is rank deficient "
                                 f"(rank {rank} < {design.shape[1]})")
    return coef


def fit_params(calibration: pd.DataFrame, d1: float = 100.0, d2: float = 200.0,
               d3: float = 300.0):
    """Fit sensor parameters to a calibration table by least squares.

    The table must hold both the input columns and the recorded sensor
    columns. Distances are not identifiable from readings and are passed in
    as constants. Returns ``(params, residual_rms)`` where ``residual_rms``
    maps each sensor column to the root-mean-square residual, in counts, of
    the refit model over the whole table.
    """
    missing = [c for c in INPUT_COLUMNS + SENSOR_COLUMNS if c not in calibration.columns]
    if missing:
        raise SchemaError(f"calibration table lacks columns: {', '.join(missing)}")
    if not (0 < d1 < d2 < d3):
        raise ParamError(f"distances must satisfy 0 < d1 < d2 < d3, got {d1}, {d2}, {d3}")

    rgb = calibration[["red", "green", "blue"]].to_numpy(dtype=float)
    norm = {f"{band}_{i}": calibration[f"{band}_{i}"].to_numpy(dtype=float) / _gains(calibration, band, i)
            for band in ("ir", "vis") for i in (1, 2, 3)}

    # Sensor 1 sees the source directly: normalized reading = S[row] . rgb.
    S = np.stack([_lstsq(rgb, norm["ir_1"], "light-sensor"),
                  _lstsq(rgb, norm["vis_1"], "light-sensor")])

    # Sensors 2 and 3 reuse the fitted response on attenuated light, so the
    # per-channel transmissions enter linearly through S[band] * rgb.
    chan = np.vstack([S[0][None, :] * rgb, S[1][None, :] * rgb])
    y2 = np.concatenate([norm["ir_2"], norm["vis_2"]])
    Ts = _lstsq(chan, y2, "first-polarizer") / (d1 / d2) ** 2

    cos2 = np.cos(np.radians(calibration["pol_1"].to_numpy(dtype=float)
                             - calibration["pol_2"].to_numpy(dtype=float))) ** 2
    cos2 = np.concatenate([cos2, cos2])
    y3 = np.concatenate([norm["ir_3"], norm["vis_3"]])
    coef = _lstsq(np.hstack([chan * cos2[:, None], chan]), y3, "polarizer-pair")
    Tc = coef[3:] / (d1 / d3) ** 2
    Tp = coef[:3] / (d1 / d3) ** 2 + Tc

    c_norm = calibration["current"].to_numpy(dtype=float) * calibration["v_c"].to_numpy(dtype=float) / 5.0
    qc = _lstsq(np.hstack([rgb, np.ones((len(rgb), 1))]), c_norm, "current")

    # Angle encoders share the slope A; unfold zero points with indicators.
    # Clamped rows carry no slope information and are dropped.
    rows, targets = [], []
    for j in (1, 2):
        raw = calibration[f"angle_{j}"].to_numpy(dtype=float)
        keep = raw < ADC_MAX_COUNT
        theta = calibration[f"pol_{j}"].to_numpy(dtype=float)[keep]
        v_ref = calibration[f"v_angle_{j}"].to_numpy(dtype=float)[keep]
        ones = np.ones(keep.sum())
        rows.append(np.column_stack([theta, ones if j == 1 else 0 * ones,
                                     ones if j == 2 else 0 * ones]))
        targets.append(raw[keep] * v_ref / 5.0)
    if sum(len(t) for t in targets) == 0:
        raise SaturatedError("all angle rows are clamped at 1023; "
                             "record a sweep at a higher reference voltage")
    A, a1, a2 = _lstsq(np.vstack(rows), np.concatenate(targets), "angle")

    params = validate_params(SensorParams(
        S=tuple(tuple(float(x) for x in row) for row in S),
        d1=float(d1), d2=float(d2), d3=float(d3),
        Ts=tuple(float(x) for x in Ts),
        Tp=tuple(float(x) for x in Tp),
        Tc=tuple(float(x) for x in Tc),
        Q=tuple(float(x) for x in qc[:3]),
        C0=float(qc[3]), A=float(A), a1=float(a1), a2=float(a2),
    ))
    refit = simulate_frame(calibration[list(INPUT_COLUMNS)], params, validate=False)
    residual_rms = {c: float(np.sqrt(np.mean((calibration[c].to_numpy(dtype=float)
                                              - refit[c].to_numpy()) ** 2)))
                    for c in SENSOR_COLUMNS}
    return params, residual_rms


class SensorSimulator(TransformerMixin, BaseEstimator):
    """Transformer from tunnel-input tables to simulated sensor readings.

    Parameters
    ----------
    params : SensorParams or None
        Model parameters; None selects the documented example set.
    device_faithful : bool
        Round and clip outputs to the hardware integer ranges.
    """

    def __init__(self, params=None, device_faithful=False):
        self.params = params
        self.device_faithful = device_faithful

    def fit(self, X=None, y=None):
        self.params_ = validate_params(self.params if self.params is not None else DEFAULT_PARAMS)
        return self

    def transform(self, X: pd.DataFrame) -> pd.DataFrame:
        if not hasattr(self, "params_"):
            self.fit()
        return simulate_frame(X, self.params_, device_faithful=self.device_faithful)


class SensorCalibration(RegressorMixin, BaseEstimator):
    """Estimator wrapper around :func:`fit_params`.

    ``fit`` takes a calibration table (inputs plus recorded readings) and
    exposes ``params_`` and ``residual_rms_``; ``predict`` simulates readings
    for new input tables with the fitted parameters.
    """

    def __init__(self, d1=100.0, d2=200.0, d3=300.0, device_faithful=False):
        self.d1 = d1
        self.d2 = d2
        self.d3 = d3
        self.device_faithful = device_faithful

    def fit(self, X: pd.DataFrame, y=None):
        self.params_, self.residual_rms_ = fit_params(X, d1=self.d1, d2=self.d2, d3=self.d3)
        return self

    def predict(self, X: pd.DataFrame) -> pd.DataFrame:
        return simulate_frame(X, self.params_, device_faithful=self.device_faithful)

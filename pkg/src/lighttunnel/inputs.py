"""Control inputs of the light tunnel: ranges, validation, quantization.

Column names follow the device's dataset files (``red``, ``pol_1``,
``diode_ir_2``, ...).  Scalars carry full precision; :func:`quantize_inputs`
rounds to the resolution the physical controllers actually accept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np
import pandas as pd

from .exceptions import RangeError, SchemaError

# Causal factors, in fixed order. All generators and metrics use this order.
FACTOR_COLUMNS = ("red", "green", "blue", "pol_1", "pol_2")

# Non-causal sensor configuration inputs.
CONFIG_COLUMNS = (
    "diode_ir_1", "diode_ir_2", "diode_ir_3",
    "diode_vis_1", "diode_vis_2", "diode_vis_3",
    "t_ir_1", "t_ir_2", "t_ir_3",
    "t_vis_1", "t_vis_2", "t_vis_3",
    "v_c", "v_angle_1", "v_angle_2",
)

INPUT_COLUMNS = FACTOR_COLUMNS + CONFIG_COLUMNS

SENSOR_COLUMNS = (
    "ir_1", "ir_2", "ir_3",
    "vis_1", "vis_2", "vis_3",
    "current", "angle_1", "angle_2",
)

BRIGHTNESS_RANGE = (0.0, 255.0)
ANGLE_RANGE = (-180.0, 180.0)
# Convention used by all shipped dataset generators.
ANGLE_DATA_RANGE = (-90.0, 90.0)
REFERENCE_VOLTAGES = (1.1, 2.56, 5.0)

_INTERVAL_RANGES = {
    "red": BRIGHTNESS_RANGE,
    "green": BRIGHTNESS_RANGE,
    "blue": BRIGHTNESS_RANGE,
    "pol_1": ANGLE_RANGE,
    "pol_2": ANGLE_RANGE,
}

_CHOICE_RANGES = {
    **{f"diode_ir_{i}": (0, 1, 2) for i in (1, 2, 3)},
    **{f"diode_vis_{i}": (0, 1) for i in (1, 2, 3)},
    **{f"t_ir_{i}": (0, 1, 2, 3) for i in (1, 2, 3)},
    **{f"t_vis_{i}": (0, 1, 2, 3) for i in (1, 2, 3)},
    "v_c": REFERENCE_VOLTAGES,
    "v_angle_1": REFERENCE_VOLTAGES,
    "v_angle_2": REFERENCE_VOLTAGES,
}


@dataclass(frozen=True)
class TunnelInputs:
    """One full configuration of the tunnel's control inputs."""

    red: float = 0.0
    green: float = 0.0
    blue: float = 0.0
    pol_1: float = 0.0
    pol_2: float = 0.0
    diode_ir_1: int = 2
    diode_ir_2: int = 2
    diode_ir_3: int = 2
    diode_vis_1: int = 1
    diode_vis_2: int = 1
    diode_vis_3: int = 1
    t_ir_1: int = 3
    t_ir_2: int = 3
    t_ir_3: int = 3
    t_vis_1: int = 3
    t_vis_2: int = 3
    t_vis_3: int = 3
    v_c: float = 5.0
    v_angle_1: float = 5.0
    v_angle_2: float = 5.0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{f.name: getattr(self, f.name) for f in fields(self)}])

    @classmethod
    def from_row(cls, row) -> "TunnelInputs":
        return cls(**{c: row[c] for c in INPUT_COLUMNS})


def round_half_away(x):
    """Round to the nearest integer, halves away from zero.

    Fixed rule (rather than banker's rounding) so quantized datasets are
    bit-identical across platforms.
    """
    x = np.asarray(x, dtype=float)
    out = np.copysign(np.floor(np.abs(x) + 0.5), x) + 0.0
    return out if out.ndim else float(out)

def _check_scalar(name, value):
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, (int, float, np.integer, np.floating)):
        raise RangeError(name, value, "a real number")
    if not math.isfinite(float(value)):
        raise RangeError(name, value, "a finite value")
    if name in _INTERVAL_RANGES:
        lo, hi = _INTERVAL_RANGES[name]
        if not lo <= float(value) <= hi:
            raise RangeError(name, value, f"[{lo}, {hi}]")
    else:
        choices = _CHOICE_RANGES[name]
        if not any(math.isclose(float(value), c, rel_tol=0, abs_tol=1e-9) for c in choices):
            raise RangeError(name, value, f"one of {choices}")


def validate_inputs(x: TunnelInputs) -> TunnelInputs:
    """Return ``x`` unchanged if every field is within its device range."""
    for f in fields(x):
        _check_scalar(f.name, getattr(x, f.name))
    return x


def quantize_inputs(x: TunnelInputs) -> TunnelInputs:
    """Round brightness to integers and angles to the 0.1-degree grid.

    Matches the resolution the device accepts; idempotent. Other fields are
    already discrete and pass through untouched.
    """
    return replace(
        x,
        red=round_half_away(x.red),
        green=round_half_away(x.green),
        blue=round_half_away(x.blue),
        pol_1=round_half_away(x.pol_1 * 10.0) / 10.0,
        pol_2=round_half_away(x.pol_2 * 10.0) / 10.0,
    )


def ensure_input_columns(frame: pd.DataFrame, columns=INPUT_COLUMNS) -> None:
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise SchemaError(f"missing input columns: {', '.join(missing)}")


def validate_frame(frame: pd.DataFrame) -> pd.DataFrame:
    """Validate every row of a tunnel-input table against the device ranges.

    Returns the frame unchanged; raises :class:`RangeError` naming the first
    offending column.
    """
    ensure_input_columns(frame)
    for name in INPUT_COLUMNS:
        col = frame[name].to_numpy()
        if not np.all(np.isfinite(col.astype(float))):
            raise RangeError(name, "non-finite", "finite values")
        if name in _INTERVAL_RANGES:
            lo, hi = _INTERVAL_RANGES[name]
            bad = (col < lo) | (col > hi)
            if bad.any():
                raise RangeError(name, col[bad][0], f"[{lo}, {hi}]")
        else:
            choices = np.asarray(_CHOICE_RANGES[name], dtype=float)
            bad = np.abs(col.astype(float)[:, None] - choices[None, :]).min(axis=1) > 1e-9
            if bad.any():
                raise RangeError(name, col[bad][0], f"one of {tuple(choices)}")
    return frame


def quantize_frame(frame: pd.DataFrame) -> pd.DataFrame:
    """Frame version of :func:`quantize_inputs`."""
    out = frame.copy()
    for name in ("red", "green", "blue"):
        out[name] = round_half_away(out[name].to_numpy(dtype=float))
    for name in ("pol_1", "pol_2"):
        out[name] = round_half_away(out[name].to_numpy(dtype=float) * 10.0) / 10.0
    return out

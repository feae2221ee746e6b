"""Shared fixtures and table generators for the test suite."""

import numpy as np
import pandas as pd
import pytest

from lighttunnel.inputs import CONFIG_COLUMNS, REFERENCE_VOLTAGES, TunnelInputs


def random_input_frame(n, rng, saturate_safe=False):
    """Table of valid tunnel inputs with randomized sensor configs.

    With ``saturate_safe`` the angle references stay at 5 V and the angles
    within [-80, 80] so no angle reading clamps.
    """
    frame = pd.DataFrame({
        "red": rng.uniform(0.0, 255.0, n),
        "green": rng.uniform(0.0, 255.0, n),
        "blue": rng.uniform(0.0, 255.0, n),
        "pol_1": rng.uniform(-80.0, 80.0, n) if saturate_safe else rng.uniform(-180.0, 180.0, n),
        "pol_2": rng.uniform(-80.0, 80.0, n) if saturate_safe else rng.uniform(-180.0, 180.0, n),
    })
    for c in CONFIG_COLUMNS:
        if c.startswith("diode_ir"):
            frame[c] = rng.integers(0, 3, n)
        elif c.startswith("diode_vis"):
            frame[c] = rng.integers(0, 2, n)
        elif c.startswith("t_"):
            frame[c] = rng.integers(0, 4, n)
        elif c.startswith("v_angle") and saturate_safe:
            frame[c] = 5.0
        else:
            frame[c] = rng.choice(REFERENCE_VOLTAGES, n)
    return frame


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def default_inputs():
    return TunnelInputs(red=120.0, green=80.0, blue=40.0, pol_1=30.0, pol_2=-15.0)

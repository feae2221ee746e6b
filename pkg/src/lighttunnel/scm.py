"""Linear-Gaussian structural causal model with shift interventions.

Ground truth for the interventional and multiview benchmark datasets: five
latent factors follow a linear SCM with additive Gaussian noise; each
interventional environment adds a constant shift to one node's assignment.
Latents map into device units through a documented affine map and clamp, and
the raw latent values are always kept alongside so metrics can work in
latent space regardless of that map.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields

import numpy as np
import pandas as pd

from . import _rng
from .exceptions import CyclicGraphError, ParamError, UnknownTargetError
from .images import analytic_frame, decode_frame
from .inputs import ANGLE_DATA_RANGE, BRIGHTNESS_RANGE, FACTOR_COLUMNS, TunnelInputs
from .sensors import DEFAULT_PARAMS, simulate_frame, validate_params

ENVIRONMENTS = ("obs", "do_red", "do_green", "do_blue", "do_pol_1", "do_pol_2")

# Example graph: red -> green -> blue, pol_1 -> pol_2, red -> pol_2. This is
# a placeholder to make the generator runnable out of the box, not a claim
# about any particular physical system; pass your own adjacency to replace it.
DEFAULT_ADJACENCY = (
    (0.0, 1.0, 0.0, 0.0, 1.0),
    (0.0, 0.0, 1.0, 0.0, 0.0),
    (0.0, 0.0, 0.0, 0.0, 0.0),
    (0.0, 0.0, 0.0, 0.0, 1.0),
    (0.0, 0.0, 0.0, 0.0, 0.0),
)

DEVICE_SCALE = (50.0, 50.0, 50.0, 30.0, 30.0)
DEVICE_OFFSET = (127.5, 127.5, 127.5, 0.0, 0.0)

LATENT_COLUMNS = tuple(f"latent_{c}" for c in FACTOR_COLUMNS)


@dataclass(frozen=True)
class ScmSpec:
    """Declarative description of the SCM data-generating process.

    ``B[i][j] != 0`` means factor i is a direct cause of factor j, in the
    fixed order (red, green, blue, pol_1, pol_2). Noise variances and shift
    sizes are materialized values; use :func:`make_scm_spec` to draw them
    from their stated ranges given only a seed.
    """

    B: tuple = DEFAULT_ADJACENCY
    sigma2: tuple = (0.015, 0.015, 0.015, 0.015, 0.015)
    eta: tuple = (1.5, 1.5, 1.5, 1.5, 1.5)
    n_per_env: int = 10000
    scale: tuple = DEVICE_SCALE
    offset: tuple = DEVICE_OFFSET
    seed: int = 0


def make_scm_spec(seed: int = 0, B=None, n_per_env: int = 10000,
                  scale=DEVICE_SCALE, offset=DEVICE_OFFSET) -> ScmSpec:
    """Draw noise variances from U[0.01, 0.02] and shifts from U[1, 2]."""
    sigma2 = _rng.stream(seed, _rng.TAG_NOISE_VARS).uniform(0.01, 0.02, size=5)
    eta = _rng.stream(seed, _rng.TAG_SHIFTS).uniform(1.0, 2.0, size=5)
    return validate_scm_spec(ScmSpec(
        B=tuple(tuple(float(x) for x in row) for row in (B if B is not None else DEFAULT_ADJACENCY)),
        sigma2=tuple(float(x) for x in sigma2),
        eta=tuple(float(x) for x in eta),
        n_per_env=int(n_per_env),
        scale=tuple(float(x) for x in scale),
        offset=tuple(float(x) for x in offset),
        seed=int(seed),
    ))


def topological_order(B) -> list:
    """Kahn's algorithm over the support of B; raises on cycles."""
    B = np.asarray(B, dtype=float)
    d = B.shape[0]
    remaining = set(range(d))
    order = []
    while remaining:
        free = [j for j in sorted(remaining)
                if not any(B[i, j] != 0 for i in remaining if i != j)]
        if not free:
            raise CyclicGraphError(f"adjacency has a cycle among nodes {sorted(remaining)}")
        order.extend(free)
        remaining -= set(free)
    return order


def validate_scm_spec(spec: ScmSpec) -> ScmSpec:
    B = np.asarray(spec.B, dtype=float)
    if B.shape != (5, 5):
        raise ParamError(f"adjacency must be 5x5, got {B.shape}")
    if np.any(np.diag(B) != 0):
        raise CyclicGraphError("adjacency has a self loop")
    topological_order(B)
    for name, lo, hi in (("sigma2", 0.01, 0.02), ("eta", 1.0, 2.0)):
        v = np.asarray(getattr(spec, name), dtype=float)
        if v.shape != (5,) or np.any(v < lo) or np.any(v > hi):
            raise ParamError(f"{name} must be five values in [{lo}, {hi}], got {v}")
    for name in ("scale", "offset"):
        v = np.asarray(getattr(spec, name), dtype=float)
        if v.shape != (5,) or not np.all(np.isfinite(v)):
            raise ParamError(f"{name} must be five finite values")
    if spec.n_per_env < 1:
        raise ParamError(f"n_per_env must be at least 1, got {spec.n_per_env}")
    return spec


def scm_spec_to_doc(spec: ScmSpec) -> dict:
    return {f.name: getattr(spec, f.name) for f in fields(spec)}


def scm_spec_from_doc(doc: dict) -> ScmSpec:
    """Build a spec from a JSON document; draws unstated noise/shift values."""
    known = {f.name for f in fields(ScmSpec)}
    unknown = set(doc) - known
    if unknown:
        raise ParamError(f"unknown SCM spec fields: {sorted(unknown)}")
    if "sigma2" in doc and "eta" in doc:
        kwargs = {k: tuple(tuple(r) for r in v) if k == "B" else
                  (tuple(v) if isinstance(v, list) else v) for k, v in doc.items()}
        return validate_scm_spec(ScmSpec(**kwargs))
    base = make_scm_spec(seed=int(doc.get("seed", 0)), B=doc.get("B"),
                         n_per_env=doc.get("n_per_env", 10000),
                         scale=doc.get("scale", DEVICE_SCALE),
                         offset=doc.get("offset", DEVICE_OFFSET))
    override = {k: tuple(v) for k, v in doc.items() if k in ("sigma2", "eta")}
    return validate_scm_spec(ScmSpec(**{**scm_spec_to_doc(base), **override})) if override else base


def analytic_covariance(spec: ScmSpec) -> np.ndarray:
    """Closed-form latent covariance (I - B')^-1 D (I - B)^-1."""
    B = np.asarray(spec.B, dtype=float)
    inv = np.linalg.inv(np.eye(5) - B.T)
    return inv @ np.diag(np.asarray(spec.sigma2, float)) @ inv.T


def analytic_mean(spec: ScmSpec, env: str) -> np.ndarray:
    """Closed-form latent mean: zero observationally, (I - B')^-1 e_k eta_k
    under a shift of node k."""
    k = _target_index(env)
    if k is None:
        return np.zeros(5)
    e = np.zeros(5)
    e[k] = np.asarray(spec.eta, float)[k]
    return np.linalg.solve(np.eye(5) - np.asarray(spec.B, float).T, e)


def _target_index(env: str):
    if env == "obs":
        return None
    if env.startswith("do_") and env[3:] in FACTOR_COLUMNS:
        return FACTOR_COLUMNS.index(env[3:])
    raise UnknownTargetError(f"unknown environment {env!r}; expected one of {ENVIRONMENTS}")


def latents_to_device(latents: np.ndarray, spec: ScmSpec) -> np.ndarray:
    """Affine map into device units, then clamp to the data ranges."""
    dev = latents * np.asarray(spec.scale, float) + np.asarray(spec.offset, float)
    lo = [BRIGHTNESS_RANGE[0]] * 3 + [ANGLE_DATA_RANGE[0]] * 2
    hi = [BRIGHTNESS_RANGE[1]] * 3 + [ANGLE_DATA_RANGE[1]] * 2
    return np.clip(dev, lo, hi)


def sample_scm(spec: ScmSpec, env: str = "obs") -> pd.DataFrame:
    """Ancestral sampling of one environment.

    Returns a table with the raw latent values (``latent_*`` columns) and
    their device-mapped counterparts (the factor columns). Noise streams are
    keyed by (seed, environment, node), so environments are independent and
    any one of them can be regenerated in isolation.
    """
    validate_scm_spec(spec)
    target = _target_index(env)
    env_idx = ENVIRONMENTS.index(env)
    B = np.asarray(spec.B, dtype=float)
    n = spec.n_per_env
    z = np.zeros((n, 5))
    for j in topological_order(B):
        gen = _rng.stream(spec.seed, _rng.TAG_ENV, env_idx, j)
        z[:, j] = z @ B[:, j] + gen.normal(0.0, np.sqrt(spec.sigma2[j]), size=n)
        if target == j:
            z[:, j] += spec.eta[j]
    out = pd.DataFrame(z, columns=list(LATENT_COLUMNS))
    out[list(FACTOR_COLUMNS)] = latents_to_device(z, spec)
    return out


def _attach_observations(table: pd.DataFrame, sensor_params) -> pd.DataFrame:
    """Add the sensor-configuration defaults and simulated readings."""
    table = table.copy()
    defaults = TunnelInputs()
    for c in defaults.to_frame().columns:
        if c not in table.columns:
            table[c] = getattr(defaults, c)
    readings = simulate_frame(table, sensor_params)
    return pd.concat([table, readings], axis=1)


def _stratified_split(table: pd.DataFrame, seed: int) -> dict:
    """80/10/10 split drawn independently inside every environment block."""
    parts = {"train": [], "val": [], "test": []}
    for env, block in table.groupby("environment", sort=False):
        n = len(block)
        order = _rng.stream(seed, _rng.TAG_SPLIT, ENVIRONMENTS.index(env)).permutation(n)
        n_train, n_val = int(0.8 * n), int(0.1 * n)
        idx = block.index.to_numpy()[order]
        parts["train"].append(table.loc[idx[:n_train]])
        parts["val"].append(table.loc[idx[n_train:n_train + n_val]])
        parts["test"].append(table.loc[idx[n_train + n_val:]])
    return {k: pd.concat(v).reset_index(drop=True) for k, v in parts.items()}


def make_image_fn(kind: str = "analytic", sensor_params=DEFAULT_PARAMS, decoder=None):
    """Image model used to render factor rows: analytic disk or a decoder."""
    validate_params(sensor_params)
    if kind == "analytic":
        return lambda frame: analytic_frame(frame, sensor_params)
    if kind == "decoder":
        if decoder is None:
            raise ParamError("image model 'decoder' needs trained decoder weights")
        return lambda frame: decode_frame(frame, decoder)
    if kind == "none":
        return None
    raise ParamError(f"unknown image model {kind!r}")


def build_ccrl_dataset(spec: ScmSpec, sensor_params=DEFAULT_PARAMS,
                       image_model: str = "analytic", decoder=None):
    """Six environments (observational + five shifts), stratified 80/10/10.

    Every row carries its environment label, the raw latents, the device
    factors, and the simulated sensor readings; images render lazily through
    the dataset's image function.
    """
    from .dataset_io import TunnelDataset

    validate_scm_spec(spec)
    blocks = []
    for env in ENVIRONMENTS:
        block = sample_scm(spec, env)
        block.insert(0, "environment", env)
        blocks.append(block)
    table = _attach_observations(pd.concat(blocks, ignore_index=True), sensor_params)
    return TunnelDataset(
        name="ccrl", kind="ccrl", seed=spec.seed,
        splits=_stratified_split(table, spec.seed),
        image_fn=make_image_fn(image_model, sensor_params, decoder),
        sensor_params=sensor_params,
        spec_doc=scm_spec_to_doc(spec),
        image_model=image_model,
    )


@dataclass(frozen=True)
class ViewSpec:
    """Grouping of the observed variables into camera-like views.

    ``outputs`` must partition the used observation columns; ``parents``
    lists the causal factors feeding each view. Content of a view pair is
    the intersection of their parent sets, style the symmetric difference.
    """

    parents: dict = field(default_factory=lambda: {
        "view_image": ("red", "green", "blue", "pol_1", "pol_2"),
        "view_light": ("red", "green", "blue"),
        "view_angle_1": ("pol_1",),
        "view_angle_2": ("pol_2",),
    })
    outputs: dict = field(default_factory=lambda: {
        "view_image": ("image",),
        "view_light": ("current", "ir_1", "vis_1", "ir_2", "vis_2"),
        "view_angle_1": ("angle_1",),
        "view_angle_2": ("angle_2",),
    })

    def content_factors(self, a: str, b: str) -> tuple:
        common = set(self.parents[a]) & set(self.parents[b])
        return tuple(c for c in FACTOR_COLUMNS if c in common)

    def style_factors(self, a: str, b: str) -> tuple:
        either = set(self.parents[a]) ^ set(self.parents[b])
        return tuple(c for c in FACTOR_COLUMNS if c in either)

    def content_indices(self, a: str, b: str) -> tuple:
        return tuple(FACTOR_COLUMNS.index(c) for c in self.content_factors(a, b))

    def style_indices(self, a: str, b: str) -> tuple:
        return tuple(FACTOR_COLUMNS.index(c) for c in self.style_factors(a, b))


def validate_view_spec(views: ViewSpec) -> ViewSpec:
    if set(views.parents) != set(views.outputs):
        raise ParamError("parents and outputs must list the same views")
    seen = set()
    for name, cols in views.outputs.items():
        overlap = seen & set(cols)
        if overlap:
            raise ParamError(f"view {name} reuses outputs {sorted(overlap)}")
        seen |= set(cols)
    for name, parents in views.parents.items():
        bad = set(parents) - set(FACTOR_COLUMNS)
        if bad:
            raise ParamError(f"view {name} lists unknown factors {sorted(bad)}")
    return views


DEFAULT_VIEWS = ViewSpec()


def build_multiview_dataset(spec: ScmSpec, views: ViewSpec = DEFAULT_VIEWS,
                            sensor_params=DEFAULT_PARAMS,
                            image_model: str = "analytic", decoder=None):
    """Same pooled 60000 factor rows, grouped into views for each pair."""
    validate_view_spec(views)
    ds = build_ccrl_dataset(spec, sensor_params, image_model, decoder)
    return ds.replace(name="multiview", kind="multiview", views=views)


def view_observations(ds, split: str, view: str):
    """Observation block of one view: a column table, or images for an
    image view (rendered through the dataset's image function)."""
    views = ds.views
    if views is None or view not in views.outputs:
        raise UnknownTargetError(f"unknown view {view!r}")
    cols = [c for c in views.outputs[view] if c != "image"]
    frame = ds.splits[split]
    if cols:
        return frame[cols]
    if ds.image_fn is None:
        raise ParamError("dataset has no image model")
    return ds.image_fn(frame)

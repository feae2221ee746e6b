"""Dataset container and on-disk format: CSV splits, PNG images, manifest.

A dataset is a set of named splits (tables over the device schema plus
ground-truth and intervention columns) and an optional image model that
renders each row. Writing produces one CSV per split, zero-padded-index
PNGs under ``images/``, and a manifest with content checksums; reading is
the exact inverse and verifies the checksums. Nothing in the output depends
on wall-clock time, so regeneration is byte-identical.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .exceptions import ChecksumError, SchemaError
from .images import image_to_png, png_to_image
from .inputs import INPUT_COLUMNS, SENSOR_COLUMNS
from .sensors import DEFAULT_PARAMS, SensorParams, params_from_json, params_to_json

FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"
IMAGE_CHUNK = 512

# Leading metadata columns a split may carry, in their fixed output order.
META_COLUMNS = ("environment",) + tuple(f"target_{c}" for c in
                                        ("red", "green", "blue", "pol_1", "pol_2"))
LATENT_COLUMNS = tuple(f"latent_{c}" for c in
                       ("red", "green", "blue", "pol_1", "pol_2"))


@dataclass
class TunnelDataset:
    """In-memory dataset: split tables plus a lazy image model."""

    name: str
    kind: str
    seed: int
    splits: dict
    image_fn: object = None
    sensor_params: SensorParams = DEFAULT_PARAMS
    spec_doc: dict = None
    image_model: str = "analytic"
    views: object = None

    def replace(self, **changes) -> "TunnelDataset":
        return dataclasses.replace(self, **changes)


def _column_order(frame: pd.DataFrame):
    known = [c for c in META_COLUMNS + LATENT_COLUMNS if c in frame.columns]
    ordered = known + list(INPUT_COLUMNS) + list(SENSOR_COLUMNS)
    missing = [c for c in INPUT_COLUMNS + SENSOR_COLUMNS if c not in frame.columns]
    extra = [c for c in frame.columns if c not in ordered]
    if missing or extra:
        raise SchemaError(f"split columns do not match the dataset schema; "
                          f"missing: {missing}, extra: {extra}")
    return ordered


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_dataset(ds: TunnelDataset, out_dir: str) -> str:
    """Write all splits, images, and the manifest under ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    files, images_meta = {}, {}
    for split in sorted(ds.splits):
        frame = ds.splits[split]
        ordered = _column_order(frame)
        out = frame[ordered].reset_index(drop=True)
        if ds.image_fn is not None:
            os.makedirs(os.path.join(out_dir, "images"), exist_ok=True)
            agg = hashlib.sha256()
            names = []
            for start in range(0, len(out), IMAGE_CHUNK):
                chunk = out.iloc[start:start + IMAGE_CHUNK]
                for offset, image in enumerate(ds.image_fn(chunk)):
                    rel = f"images/{split}_{start + offset:06d}.png"
                    blob = image_to_png(image)
                    with open(os.path.join(out_dir, rel), "wb") as fh:
                        fh.write(blob)
                    agg.update(blob)
                    names.append(rel)
            out["image_file"] = names
            images_meta[split] = {"count": len(names), "sha256": agg.hexdigest()}
        csv_name = f"{split}.csv"
        out.to_csv(os.path.join(out_dir, csv_name), index=False,
                   float_format="%.17g", lineterminator="\n")
        files[csv_name] = _sha256(os.path.join(out_dir, csv_name))

    manifest = {
        "format_version": FORMAT_VERSION,
        "name": ds.name,
        "kind": ds.kind,
        "seed": ds.seed,
        "image_model": ds.image_model if ds.image_fn is not None else "none",
        "sensor_params": json.loads(params_to_json(ds.sensor_params)),
        "spec": ds.spec_doc,
        "views": None if ds.views is None else
            {"parents": {k: list(v) for k, v in ds.views.parents.items()},
             "outputs": {k: list(v) for k, v in ds.views.outputs.items()}},
        "splits": {
            s: {"rows": int(len(ds.splits[s])),
                "environments": (ds.splits[s]["environment"].value_counts()
                                 .sort_index().astype(int).to_dict()
                                 if "environment" in ds.splits[s] else None)}
            for s in sorted(ds.splits)},
        "files": files,
        "images": images_meta,
    }
    with open(os.path.join(out_dir, MANIFEST_NAME), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out_dir


def _read_tolerant(in_dir: str) -> TunnelDataset:
    """Directory without a manifest: accept any CSVs with the device schema."""
    splits = {}
    for entry in sorted(os.listdir(in_dir)):
        if entry.endswith(".csv"):
            frame = pd.read_csv(os.path.join(in_dir, entry), float_precision="round_trip")
            missing = [c for c in INPUT_COLUMNS + SENSOR_COLUMNS
                       if c not in frame.columns]
            if missing:
                raise SchemaError(f"{entry} lacks required columns: {missing}")
            splits[entry[:-4]] = frame
    if not splits:
        raise SchemaError(f"no dataset found under {in_dir}")
    return TunnelDataset(name=os.path.basename(os.path.normpath(in_dir)),
                         kind="custom", seed=0, splits=splits, image_model="none")


def read_dataset(in_dir: str, verify_images: bool = False) -> TunnelDataset:
    """Load a dataset directory; verifies CSV checksums (and image checksums
    on request). Directories without a manifest are read tolerantly."""
    manifest_path = os.path.join(in_dir, MANIFEST_NAME)
    if not os.path.exists(manifest_path):
        return _read_tolerant(in_dir)
    with open(manifest_path) as fh:
        manifest = json.load(fh)

    splits = {}
    for csv_name, expected in sorted(manifest["files"].items()):
        path = os.path.join(in_dir, csv_name)
        if not os.path.exists(path):
            raise SchemaError(f"manifest lists {csv_name} but it is missing")
        actual = _sha256(path)
        if actual != expected:
            raise ChecksumError(f"{csv_name}: checksum {actual} != manifest {expected}")
        frame = pd.read_csv(path, float_precision="round_trip")
        missing = [c for c in INPUT_COLUMNS + SENSOR_COLUMNS if c not in frame.columns]
        if missing:
            raise SchemaError(f"{csv_name} lacks required columns: {missing}")
        splits[csv_name[:-4]] = frame
    if verify_images:
        verify_dataset_images(in_dir, manifest, splits)

    views = None
    if manifest.get("views"):
        from .scm import ViewSpec
        views = ViewSpec(
            parents={k: tuple(v) for k, v in manifest["views"]["parents"].items()},
            outputs={k: tuple(v) for k, v in manifest["views"]["outputs"].items()})
    return TunnelDataset(
        name=manifest["name"], kind=manifest["kind"], seed=manifest["seed"],
        splits=splits,
        sensor_params=params_from_json(json.dumps(manifest["sensor_params"])),
        spec_doc=manifest.get("spec"), image_model=manifest.get("image_model", "none"),
        views=views)


def verify_dataset_images(in_dir: str, manifest=None, splits=None) -> None:
    """Recompute the per-split aggregate PNG hash against the manifest."""
    if manifest is None:
        with open(os.path.join(in_dir, MANIFEST_NAME)) as fh:
            manifest = json.load(fh)
    if splits is None:
        splits = {name[:-4]: pd.read_csv(os.path.join(in_dir, name),
                                         float_precision="round_trip")
                  for name in manifest["files"]}
    for split, meta in sorted(manifest.get("images", {}).items()):
        frame = splits[split]
        agg = hashlib.sha256()
        for rel in frame["image_file"]:
            with open(os.path.join(in_dir, rel), "rb") as fh:
                agg.update(fh.read())
        if agg.hexdigest() != meta["sha256"]:
            raise ChecksumError(f"images of split {split!r}: checksum "
                                f"{agg.hexdigest()} != manifest {meta['sha256']}")


def load_images(in_dir: str, frame: pd.DataFrame, indices=None) -> np.ndarray:
    """Read the PNGs referenced by a split's ``image_file`` column."""
    if "image_file" not in frame.columns:
        raise SchemaError("split has no image_file column")
    rows = frame if indices is None else frame.iloc[indices]
    out = np.empty((len(rows), 64, 64, 3))
    for k, rel in enumerate(rows["image_file"]):
        with open(os.path.join(in_dir, rel), "rb") as fh:
            out[k] = png_to_image(fh.read())
    return out

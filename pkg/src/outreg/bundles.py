"""On-disk bundles: plants, gains, controllers, and scenario documents.

A bundle is a directory with one .npy file per operator (binary format
with an explicit shape header) and a manifest.json sidecar carrying the
non-matrix metadata.  All loaders validate the manifest kind.
"""

import json
import os

import numpy as np

from .plant import HeatGeometry, PlantModel, StabilizationGains
from .synthesis import ControllerRealization

SCHEMA_VERSION = 1


def _write_manifest(path, doc):
    with open(os.path.join(path, "manifest.json"), "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)


def _read_manifest(path, expected_kind):
    mpath = os.path.join(path, "manifest.json")
    if not os.path.isfile(mpath):
        raise FileNotFoundError(f"no manifest.json in {path}")
    with open(mpath) as fh:
        doc = json.load(fh)
    if doc.get("kind") != expected_kind:
        raise ValueError(f"{path} holds a {doc.get('kind')!r} bundle, expected {expected_kind!r}")
    return doc


def save_plant(plant, path):
    os.makedirs(path, exist_ok=True)
    for name in ("A", "B", "Bd", "C", "D"):
        np.save(os.path.join(path, f"{name}.npy"), getattr(plant, name))
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "plant",
        "n": plant.n,
        "inputs": plant.inputs,
        "outputs": plant.outputs,
    }
    if plant.geometry is not None:
        g = plant.geometry
        np.savez(
            os.path.join(path, "geometry.npz"),
            gamma1=g.gamma1, gamma2=g.gamma2, gamma3=g.gamma3, quad_weights=g.quad_weights,
        )
        doc["geometry"] = {"n": g.n, "h": g.h}
    _write_manifest(path, doc)


def load_plant(path):
    doc = _read_manifest(path, "plant")
    mats = {name: np.load(os.path.join(path, f"{name}.npy")) for name in ("A", "B", "Bd", "C", "D")}
    geometry = None
    if "geometry" in doc:
        z = np.load(os.path.join(path, "geometry.npz"))
        geometry = HeatGeometry(
            n=int(doc["geometry"]["n"]),
            h=float(doc["geometry"]["h"]),
            gamma1=z["gamma1"], gamma2=z["gamma2"], gamma3=z["gamma3"],
            quad_weights=z["quad_weights"],
        )
    return PlantModel(geometry=geometry, **mats)


def save_gains(gains, path):
    os.makedirs(path, exist_ok=True)
    np.save(os.path.join(path, "K2.npy"), gains.K2)
    np.save(os.path.join(path, "L1.npy"), gains.L1)
    _write_manifest(path, {"schema_version": SCHEMA_VERSION, "kind": "gains"})


def load_gains(path):
    _read_manifest(path, "gains")
    return StabilizationGains(
        K2=np.load(os.path.join(path, "K2.npy")),
        L1=np.load(os.path.join(path, "L1.npy")),
    )


_CONTROLLER_FIELDS = (
    "omegas", "block_sizes", "im_G1", "im_G2", "K1", "K2", "L", "H", "G1", "G2", "K",
    "L1", "K21",
)


def save_controller(ctrl, path):
    os.makedirs(path, exist_ok=True)
    for name in _CONTROLLER_FIELDS:
        arr = getattr(ctrl, name)
        if arr is not None:
            np.save(os.path.join(path, f"{name}.npy"), arr)
    _write_manifest(path, {
        "schema_version": SCHEMA_VERSION,
        "kind": "controller",
        "variant": ctrl.variant,
        "params": ctrl.params,
        "mode_count": int(len(ctrl.omegas)),
        "block_sizes": [int(b) for b in ctrl.block_sizes],
        "dim_plant": int(ctrl.dim_plant),
        "dim_internal_model": int(ctrl.dim_im),
        "dim": int(ctrl.dim),
        "self_checks": {k: float(v) for k, v in ctrl.self_checks.items()},
    })


def load_controller(path):
    doc = _read_manifest(path, "controller")
    arrays = {}
    for name in _CONTROLLER_FIELDS:
        fpath = os.path.join(path, f"{name}.npy")
        arrays[name] = np.load(fpath) if os.path.isfile(fpath) else None
    return ControllerRealization(
        variant=doc["variant"],
        dim_plant=int(doc["dim_plant"]),
        params=doc.get("params", {}),
        self_checks=doc.get("self_checks", {}),
        **arrays,
    )

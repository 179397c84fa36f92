"""Versioned JSON model files with base64-encoded float arrays."""
from __future__ import annotations

import base64
import hashlib
import json
from pathlib import Path
from typing import Optional

import numpy as np

from ..intensity import HawkesModel, model_from_config

FORMAT_VERSION = 1


class ManifestError(ValueError):
    """The file is not a usable model manifest."""


def config_hash(obj) -> str:
    """SHA-256 of the canonical JSON encoding of ``obj``."""
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()


def encode_array(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "dtype": "<f8", "data": base64.b64encode(a.tobytes()).decode("ascii")}


def decode_array(name: str, entry: dict) -> np.ndarray:
    try:
        shape = tuple(int(s) for s in entry["shape"])
        raw = base64.b64decode(entry["data"], validate=True)
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"array {name!r} is malformed: {exc}") from None
    if entry.get("dtype", "<f8") != "<f8":
        raise ManifestError(f"array {name!r} has dtype {entry['dtype']!r}, expected '<f8'")
    expected = int(np.prod(shape, dtype=np.int64))
    if len(raw) != 8 * expected:
        raise ManifestError(
            f"array {name!r} declares shape {list(shape)} ({expected} values) but holds {len(raw) / 8:g} values"
        )
    return np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)


def _dims(model: HawkesModel) -> dict:
    params = model.params
    d_e = None
    for key in ("impact.type_features", "exo.type_features"):
        if key in params:
            d_e = int(params[key].shape[1])
    d_s = int(params["exo.seq_feature_mean"].shape[0]) if "exo.seq_feature_mean" in params else None
    return {"C": model.num_types, "M": model.num_basis, "D_e": d_e, "D_s": d_s}


def build_manifest(model: HawkesModel, *, type_names=None, seq_names=None, seed=None,
                   fit_config: Optional[dict] = None, extra: Optional[dict] = None) -> dict:
    composition = model.config()
    type_names = list(type_names) if type_names is not None else [str(c) for c in range(model.num_types)]
    if len(type_names) != model.num_types:
        raise ValueError("type_names must have one entry per event type")
    return {
        "format_version": FORMAT_VERSION,
        "composition": composition,
        "dims": _dims(model),
        "memory_size": model.memory_size,
        "type_names": type_names,
        "seq_names": None if seq_names is None else list(seq_names),
        "trainable": model.trainable_names,
        "arrays": {name: encode_array(v) for name, v in sorted(model.params.items())},
        "provenance": {"seed": seed, "config_hash": config_hash({"composition": composition, "fit": fit_config})},
        "fit_config": fit_config,
        **(extra or {}),
    }


def model_save(model: HawkesModel, path, **kwargs) -> dict:
    """Write ``model`` to ``path``; keyword arguments go to :func:`build_manifest`."""
    manifest = build_manifest(model, **kwargs)
    Path(path).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return manifest


def read_manifest(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {str(path)!r}: {exc.strerror}") from None
    try:
        manifest = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(
            f"cannot parse manifest {str(path)!r}: {exc.msg} (line {exc.lineno}, column {exc.colno})"
        ) from None
    if not isinstance(manifest, dict) or "format_version" not in manifest:
        raise ManifestError(f"{str(path)!r} is not a model manifest (no format_version)")
    version = manifest["format_version"]
    if version != FORMAT_VERSION:
        raise ManifestError(
            f"manifest format_version {version!r} is not supported; this build reads format_version {FORMAT_VERSION}"
        )
    for key in ("composition", "arrays", "type_names"):
        if key not in manifest:
            raise ManifestError(f"manifest is missing {key!r}")
    return manifest


def model_from_manifest(manifest: dict) -> HawkesModel:
    try:
        model = model_from_config(manifest["composition"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"manifest composition is invalid: {exc}") from None
    params = model.params
    arrays = manifest["arrays"]
    missing = sorted(set(params) - set(arrays))
    unknown = sorted(set(arrays) - set(params))
    if missing:
        raise ManifestError(f"manifest lacks arrays {missing}")
    if unknown:
        raise ManifestError(f"manifest has arrays the model does not use: {unknown}")
    for name, entry in arrays.items():
        value = decode_array(name, entry)
        if value.shape != params[name].shape:
            raise ManifestError(
                f"array {name!r} has shape {list(value.shape)} but the model expects {list(params[name].shape)}"
            )
        params[name][...] = value
    if "trainable" in manifest:
        for name in params:
            model.set_trainable(name, name in manifest["trainable"])
    model.memory_size = int(manifest.get("memory_size", model.memory_size))
    if len(manifest["type_names"]) != model.num_types:
        raise ManifestError(
            f"manifest lists {len(manifest['type_names'])} type names for a model with {model.num_types} types"
        )
    return model


def model_load(path) -> HawkesModel:
    """Inverse of :func:`model_save`; parameters are restored bit-exactly."""
    return model_from_manifest(read_manifest(path))

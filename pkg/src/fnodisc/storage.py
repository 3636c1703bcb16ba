"""Binary tensor container: a JSON manifest plus one payload file.

The manifest lists every tensor's name, shape, dtype (f64 or c128) and byte
range; the payload holds little-endian 64-bit floats, complex values as
interleaved (re, im) pairs, row-major.  The same container carries model
checkpoints and exported grid fields.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .fno import FnoConfig, FnoParams
from .spectral import GridField

__all__ = [
    "FORMAT_VERSION",
    "save_bundle",
    "load_bundle",
    "save_checkpoint",
    "load_checkpoint",
    "save_fields",
    "load_fields",
]

FORMAT_VERSION = 1

_DTYPES = {"f64": np.dtype("<f8"), "c128": np.dtype("<c16")}


def _dtype_tag(arr: np.ndarray) -> str:
    if np.iscomplexobj(arr):
        return "c128"
    return "f64"


def save_bundle(directory: str | Path, name: str, tensors: dict[str, np.ndarray], meta: dict) -> Path:
    """Write ``{name}.json`` + ``{name}.bin`` under ``directory``.

    Returns the manifest path.  Writing the same tensors twice produces
    byte-identical files.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    payload_name = f"{name}.bin"
    entries = []
    offset = 0
    blobs = []
    for tname, arr in tensors.items():
        tag = _dtype_tag(arr)
        blob = np.ascontiguousarray(arr).astype(_DTYPES[tag]).tobytes()
        entries.append(
            {
                "name": tname,
                "shape": list(arr.shape),
                "dtype": tag,
                "byte_offset": offset,
                "byte_len": len(blob),
            }
        )
        blobs.append(blob)
        offset += len(blob)
    manifest = {
        "format_version": FORMAT_VERSION,
        "payload": payload_name,
        "meta": meta,
        "tensors": entries,
    }
    (directory / payload_name).write_bytes(b"".join(blobs))
    manifest_path = directory / f"{name}.json"
    manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return manifest_path


def load_bundle(manifest_path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"container format {version} does not match {FORMAT_VERSION}")
    payload = (manifest_path.parent / manifest["payload"]).read_bytes()
    tensors = {}
    for entry in manifest["tensors"]:
        lo = entry["byte_offset"]
        raw = payload[lo : lo + entry["byte_len"]]
        arr = np.frombuffer(raw, dtype=_DTYPES[entry["dtype"]]).reshape(entry["shape"])
        tensors[entry["name"]] = arr.astype(
            np.complex128 if entry["dtype"] == "c128" else np.float64
        )
    return tensors, manifest["meta"]


def save_checkpoint(directory: str | Path, params: FnoParams, extra: dict | None = None) -> Path:
    meta = {"kind": "checkpoint", "config": params.config.to_dict()}
    if extra:
        meta.update(extra)
    return save_bundle(directory, "checkpoint", params.as_tensors(), meta)


def load_checkpoint(manifest_path: str | Path) -> FnoParams:
    tensors, meta = load_bundle(manifest_path)
    config = FnoConfig.from_dict(meta["config"])
    return FnoParams.from_tensors(config, tensors)


def save_fields(directory: str | Path, name: str, fields: dict[str, GridField], meta: dict | None = None) -> Path:
    tensors = {k: f.values for k, f in fields.items()}
    return save_bundle(directory, name, tensors, {"kind": "fields", **(meta or {})})


def load_fields(manifest_path: str | Path) -> dict[str, GridField]:
    tensors, _ = load_bundle(manifest_path)
    return {k: GridField(v) for k, v in tensors.items()}

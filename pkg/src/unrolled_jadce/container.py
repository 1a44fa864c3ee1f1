"""On-disk container shared by datasets, weight matrices and checkpoints.

A container is a directory holding ``manifest.json`` plus one raw blob per
array. Blobs are little-endian float64, row-major; complex arrays are stored
as interleaved (re, im) pairs.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
MANIFEST = "manifest.json"


class ContainerError(RuntimeError):
    pass


def _encode(arr: np.ndarray) -> tuple[bytes, str]:
    arr = np.asarray(arr)
    if np.iscomplexobj(arr):
        flat = np.ascontiguousarray(arr, dtype=np.complex128)
        raw = flat.view(np.float64)
        return raw.astype("<f8").tobytes(order="C"), "complex128"
    return np.ascontiguousarray(arr, dtype="<f8").tobytes(order="C"), "float64"


def write_container(path, arrays: dict[str, np.ndarray], meta: dict) -> Path:
    """Write ``arrays`` and ``meta`` to directory ``path``.

    Output is a pure function of the inputs (sorted keys, no timestamps), so
    re-running with the same inputs yields byte-identical files.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    entries = {}
    for name in sorted(arrays):
        data, dtype = _encode(arrays[name])
        fname = f"{name}.f64"
        with open(path / fname, "wb") as fh:
            fh.write(data)
        entries[name] = {
            "file": fname,
            "dtype": dtype,
            "shape": list(np.shape(arrays[name])),
        }
    manifest = {"format_version": FORMAT_VERSION, "arrays": entries, **meta}
    tmp = path / (MANIFEST + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path / MANIFEST)
    return path


def read_manifest(path) -> dict:
    path = Path(path)
    try:
        with open(path / MANIFEST) as fh:
            manifest = json.load(fh)
    except FileNotFoundError as exc:
        raise ContainerError(f"no {MANIFEST} in {path}") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ContainerError(
            f"unsupported container version {manifest.get('format_version')!r}"
        )
    return manifest


def read_container(path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    manifest = read_manifest(path)
    arrays = {}
    for name, entry in manifest["arrays"].items():
        raw = np.fromfile(path / entry["file"], dtype="<f8")
        shape = tuple(entry["shape"])
        if entry["dtype"] == "complex128":
            arr = raw.astype(np.float64).view(np.complex128)
        else:
            arr = raw.astype(np.float64)
        if arr.size != int(np.prod(shape)):
            raise ContainerError(f"blob {entry['file']} does not match shape {shape}")
        arrays[name] = arr.reshape(shape)
    meta = {k: v for k, v in manifest.items() if k != "arrays"}
    return arrays, meta

"""On-disk bundles: ``<name>.json`` manifest plus one raw row-major array file per entry.

Manifest layout::

    {"format": "dmvst-bundle", "version": 1, "kind": "...", "meta": {...},
     "arrays": {"counts": {"file": "grid.counts.bin", "dtype": "<i8", "shape": [T, W, H]}, ...}}

Array files hold little-endian values in C (row-major) order with no header.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import InputError
from .grid import DemandGrid, GridSpec
from .normalize import Normalizer

FORMAT = "dmvst-bundle"
VERSION = 1


def save_bundle(path, kind: str, arrays: dict[str, np.ndarray], meta: dict | None = None) -> Path:
    path = Path(path)
    if path.suffix != ".json":
        path = path.with_suffix(".json")
    path.parent.mkdir(parents=True, exist_ok=True)
    entries = {}
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        dtype = arr.dtype.newbyteorder("<")
        fname = f"{path.stem}.{name}.bin"
        (path.parent / fname).write_bytes(arr.astype(dtype, copy=False).tobytes(order="C"))
        entries[name] = {"file": fname, "dtype": dtype.str, "shape": list(arr.shape)}
    manifest = {"format": FORMAT, "version": VERSION, "kind": kind, "meta": meta or {},
                "arrays": entries}
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_bundle(path, kind: str | None = None) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    if path.is_dir():
        raise InputError(f"{path} is a directory; pass the bundle's .json manifest")
    manifest = json.loads(path.read_text())
    if manifest.get("format") != FORMAT or manifest.get("version") != VERSION:
        raise InputError(f"{path}: not a {FORMAT} v{VERSION} manifest")
    if kind is not None and manifest.get("kind") != kind:
        raise InputError(f"{path}: expected a {kind!r} bundle, found {manifest.get('kind')!r}")
    arrays = {}
    for name, e in manifest["arrays"].items():
        raw = (path.parent / e["file"]).read_bytes()
        dtype = np.dtype(e["dtype"])
        expected = int(np.prod(e["shape"], dtype=np.int64)) * dtype.itemsize
        if len(raw) != expected:
            raise InputError(f"{e['file']}: {len(raw)} bytes, manifest implies {expected}")
        arrays[name] = np.frombuffer(raw, dtype=dtype).reshape(e["shape"]).copy()
    return manifest["meta"], arrays


def save_grid(path, grid: DemandGrid, normalizer: Normalizer | None = None, extra: dict | None = None) -> Path:
    meta = {"spec": grid.spec.to_dict(), "start_time": int(grid.start_time),
            "dims": list(grid.counts.shape), "excluded": int(grid.excluded)}
    if normalizer is not None:
        meta["normalizer"] = normalizer.to_dict()
    meta.update(extra or {})
    return save_bundle(path, "grid", {"counts": grid.counts.astype(np.int64)}, meta)


def load_grid(path) -> tuple[DemandGrid, dict]:
    meta, arrays = load_bundle(path, "grid")
    grid = DemandGrid(GridSpec(**meta["spec"]), arrays["counts"], int(meta["start_time"]),
                      int(meta.get("excluded", 0)))
    return grid, meta

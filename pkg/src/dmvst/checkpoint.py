"""Binary checkpoints: header, JSON manifest, then raw little-endian float64 arrays.

Layout::

    b"DMVSTCK\\0"  uint32 version  uint64 manifest_len  manifest (UTF-8 JSON)  payload

The manifest lists every parameter and buffer in module order with its shape;
the payload is their concatenation in that order.  Floats round-trip bit-exactly.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .baselines import BaselineConfig, LinearBaseline, MLPBaseline
from .data.normalize import Normalizer
from .errors import CheckpointError
from .model import DMVSTNet, Forecaster, ModelConfig

MAGIC = b"DMVSTCK\x00"
VERSION = 1
_HEADER = struct.Struct("<8sIQ")
_LE = np.dtype("<f8")


def _build(kind: str, config: dict, shapes: dict[str, list[int]]) -> Forecaster:
    if kind == "dmvst":
        cfg = ModelConfig.from_dict(config)
        table = shapes.get("embedding")
        return DMVSTNet(cfg, embeddings=np.zeros(table) if table is not None else None)
    if kind == "linear":
        return LinearBaseline(BaselineConfig.from_dict(config))
    if kind == "mlp":
        return MLPBaseline(BaselineConfig.from_dict(config))
    raise CheckpointError(f"unknown model kind {kind!r}")


def save_checkpoint(model: Forecaster, normalizer: Normalizer, path, extra: dict | None = None) -> Path:
    path = Path(path)
    entries, blobs = [], []
    for group, items in (("param", model.named_parameters()), ("buffer", model.named_buffers())):
        for name, value in items:
            arr = value.data if group == "param" else value
            arr = np.ascontiguousarray(arr, dtype=_LE)
            entries.append({"group": group, "name": name, "shape": list(arr.shape)})
            blobs.append(arr.tobytes())
    manifest = {
        "kind": model.kind,
        "config": model.config_dict(),
        "normalizer": normalizer.to_dict(),
        "arrays": entries,
        "extra": extra or {},
    }
    body = json.dumps(manifest, sort_keys=True).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, len(body)))
        fh.write(body)
        for blob in blobs:
            fh.write(blob)
    return path


def load_checkpoint(path) -> tuple[Forecaster, Normalizer, dict]:
    """Return ``(model, normalizer, manifest)``; the model comes back in eval mode."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise CheckpointError("truncated checkpoint header")
    magic, version, n_manifest = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    if version != VERSION:
        raise CheckpointError(f"checkpoint version {version}, expected {VERSION}")
    start = _HEADER.size
    if len(raw) < start + n_manifest:
        raise CheckpointError("truncated checkpoint manifest")
    try:
        manifest = json.loads(raw[start:start + n_manifest].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt manifest: {exc}") from exc

    offset = start + n_manifest
    arrays = {}
    for entry in manifest["arrays"]:
        shape = tuple(entry["shape"])
        nbytes = int(np.prod(shape, dtype=np.int64)) * 8
        if offset + nbytes > len(raw):
            raise CheckpointError(f"truncated payload at {entry['name']}")
        arrays[(entry["group"], entry["name"])] = np.frombuffer(
            raw, dtype=_LE, count=nbytes // 8, offset=offset).reshape(shape).astype(np.float64)
        offset += nbytes
    if offset != len(raw):
        raise CheckpointError(f"{len(raw) - offset} trailing bytes after payload")

    shapes = {name: list(a.shape) for (group, name), a in arrays.items() if group == "param"}
    model = _build(manifest["kind"], manifest["config"], shapes)
    params = dict(model.named_parameters())
    if set(params) != {n for g, n in arrays if g == "param"}:
        raise CheckpointError("checkpoint parameters do not match the model layout")
    for name, tensor in params.items():
        value = arrays[("param", name)]
        if value.shape != tensor.shape:
            raise CheckpointError(f"{name}: shape {value.shape} != model {tensor.shape}")
        tensor.data = value
    for name, _ in model.named_buffers():
        key = ("buffer", name)
        if key not in arrays:
            raise CheckpointError(f"missing buffer {name}")
        model.set_buffer(name, arrays[key])
    norm = manifest["normalizer"]
    model.normalizer = Normalizer(norm["min"], norm["max"])
    model.eval()
    return model, model.normalizer, manifest

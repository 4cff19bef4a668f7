"""Checkpoint files: JSON header line + flat little-endian float64 payload.

The header carries a format version, a config echo, and a parameter
manifest (name, shape, dtype, byte offset into the payload). Complex
arrays are stored as interleaved (re, im) float64 pairs. Loading followed
by saving reproduces the file byte for byte.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import CheckpointError
from .params import ParamSet

FORMAT_VERSION = 1
_DTYPES = {"float64": "<f8", "complex128": "<c16"}


def save_checkpoint(path, config: dict, param_set: ParamSet) -> None:
    manifest = []
    payload = bytearray()
    for name in param_set.names:
        arr = np.ascontiguousarray(param_set.array(name))
        dtype = "complex128" if np.iscomplexobj(arr) else "float64"
        manifest.append({"name": name, "shape": list(arr.shape), "dtype": dtype,
                         "offset": len(payload)})
        payload.extend(arr.astype(_DTYPES[dtype]).tobytes())
    header = {"format_version": FORMAT_VERSION, "config": config,
              "manifest": manifest, "payload_bytes": len(payload)}
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as handle:
        handle.write(header_bytes + b"\n")
        handle.write(bytes(payload))


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    blob = path.read_bytes()
    newline = blob.find(b"\n")
    if newline < 0:
        raise CheckpointError(f"{path}: missing header line")
    try:
        header = json.loads(blob[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})") from None
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported format version {header.get('format_version')}"
        )
    payload = blob[newline + 1:]
    if len(payload) != header["payload_bytes"]:
        raise CheckpointError(
            f"{path}: payload is {len(payload)} bytes, header says {header['payload_bytes']}"
        )
    arrays: dict[str, np.ndarray] = {}
    for entry in header["manifest"]:
        dtype = np.dtype(_DTYPES[entry["dtype"]])
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        start = entry["offset"]
        stop = start + count * dtype.itemsize
        if stop > len(payload):
            raise CheckpointError(f"{path}: manifest entry {entry['name']} overruns payload")
        arrays[entry["name"]] = np.frombuffer(
            payload[start:stop], dtype=dtype
        ).reshape(entry["shape"]).copy()
    return header["config"], arrays


def restore_into(param_set: ParamSet, arrays: dict[str, np.ndarray]) -> None:
    """Copy loaded arrays into a freshly built model's parameters."""
    if set(arrays) != set(param_set.names):
        missing = set(param_set.names) - set(arrays)
        extra = set(arrays) - set(param_set.names)
        raise CheckpointError(
            f"parameter manifest mismatch (missing: {sorted(missing)}, extra: {sorted(extra)})"
        )
    for name in param_set.names:
        target = param_set.array(name)
        source = arrays[name]
        if target.shape != source.shape:
            raise CheckpointError(
                f"{name}: checkpoint shape {source.shape} != model shape {target.shape}"
            )
        target[...] = source

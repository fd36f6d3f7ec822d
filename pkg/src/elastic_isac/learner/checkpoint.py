"""Binary checkpoint: magic, little-endian header length, JSON header, then float64 tensors."""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"ENTCKPT1"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_tensors(path, tensors: dict[str, np.ndarray], roles, extra: dict | None = None) -> None:
    names = sorted(tensors)
    header = {
        "version": VERSION,
        "roles": list(roles),
        "tensors": [{"name": n, "shape": list(np.shape(tensors[n]))} for n in names],
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for n in names:
            fh.write(np.ascontiguousarray(tensors[n], dtype="<f8").tobytes())


def load_tensors(path) -> tuple[dict, dict[str, np.ndarray]]:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise CheckpointError("not a checkpoint file")
    (n,) = struct.unpack("<I", data[8:12])
    header = json.loads(data[12:12 + n])
    if header.get("version") != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {header.get('version')}")
    pos = 12 + n
    out = {}
    for t in header["tensors"]:
        shape = tuple(t["shape"])
        count = int(np.prod(shape)) if shape else 1
        out[t["name"]] = np.frombuffer(data, dtype="<f8", count=count, offset=pos).reshape(shape).astype(float)
        pos += 8 * count
    if pos != len(data):
        raise CheckpointError("trailing bytes in checkpoint")
    return header, out


def restore_into(target: dict[str, np.ndarray], loaded: dict[str, np.ndarray]) -> None:
    """Copy loaded tensors into ``target`` in place, naming the first incompatible layer."""
    for name, arr in target.items():
        if name not in loaded:
            raise CheckpointError(f"checkpoint has no tensor {name}")
        if loaded[name].shape != arr.shape:
            raise CheckpointError(f"incompatible layer {name}: checkpoint {loaded[name].shape}, model {arr.shape}")
    extra = set(loaded) - set(target)
    if extra:
        raise CheckpointError(f"checkpoint tensor {sorted(extra)[0]} has no counterpart in the model")
    for name, arr in target.items():
        arr[...] = loaded[name]

"""Versioned binary checkpoints: magic + version + spec hash + named payloads."""

from __future__ import annotations

import hashlib
import json
import struct
from typing import Dict, Optional, Tuple

import numpy as np

Params = Dict[str, np.ndarray]

MAGIC = b"PRCK"
VERSION = 1


class CheckpointError(RuntimeError):
    pass


def spec_hash(params: Params) -> str:
    desc = "\n".join(f"{k}:{params[k].shape}:{params[k].dtype}"
                     for k in sorted(params))
    return hashlib.sha256(desc.encode()).hexdigest()[:16]


def save_params(path: str, params: Params, meta: Optional[dict] = None) -> None:
    header = {
        "spec_hash": spec_hash(params),
        "names": sorted(params),
        "shapes": {k: list(params[k].shape) for k in params},
        "dtypes": {k: str(params[k].dtype) for k in params},
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(blob)))
        f.write(blob)
        for k in header["names"]:
            arr = np.ascontiguousarray(params[k])
            f.write(arr.astype(arr.dtype.newbyteorder("<")).tobytes())


def load_params(path: str, expected_hash: Optional[str] = None) -> Tuple[Params, dict]:
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise CheckpointError(f"{path}: bad magic")
        version, hlen = struct.unpack("<II", f.read(8))
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        header = json.loads(f.read(hlen).decode())
        params: Params = {}
        for k in header["names"]:
            shape = tuple(header["shapes"][k])
            dtype = np.dtype(header["dtypes"][k]).newbyteorder("<")
            count = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(f.read(count * dtype.itemsize), dtype=dtype)
            params[k] = arr.reshape(shape).astype(np.dtype(header["dtypes"][k]))
    if spec_hash(params) != header["spec_hash"]:
        raise CheckpointError(f"{path}: spec hash mismatch")
    if expected_hash is not None and header["spec_hash"] != expected_hash:
        raise CheckpointError(f"{path}: expected spec hash {expected_hash}")
    return params, header["meta"]

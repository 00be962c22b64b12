"""Checkpoint blobs: JSON header plus raw parameter buffers."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import CompatibilityError, InvalidArgumentError

MAGIC = b"DOORVERSE-CKPT-v1\n"


def save_checkpoint(path: str | Path, arrays: dict[str, np.ndarray],
                    config_hash: str, seed: int, meta: dict | None = None) -> None:
    names = sorted(arrays)
    header = {
        "arrays": [{"name": n, "shape": list(arrays[n].shape), "dtype": "float32"} for n in names],
        "config_hash": config_hash,
        "seed": int(seed),
        "meta": meta or {},
    }
    blob = MAGIC + json.dumps(header, sort_keys=True).encode() + b"\n"
    for n in names:
        blob += np.ascontiguousarray(arrays[n], dtype=np.float32).tobytes()
    Path(path).write_bytes(blob)


def load_checkpoint(path: str | Path, expect_config_hash: str | None = None
                    ) -> tuple[dict[str, np.ndarray], dict]:
    raw = Path(path).read_bytes()
    if not raw.startswith(MAGIC):
        raise InvalidArgumentError(f"{path} is not a doorverse checkpoint")
    body = raw[len(MAGIC):]
    nl = body.index(b"\n")
    header = json.loads(body[:nl].decode())
    if expect_config_hash is not None and header["config_hash"] != expect_config_hash:
        raise CompatibilityError(
            f"checkpoint config hash {header['config_hash']} != expected {expect_config_hash}")
    arrays: dict[str, np.ndarray] = {}
    offset = nl + 1
    for entry in header["arrays"]:
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        nbytes = count * 4
        buf = np.frombuffer(body[offset:offset + nbytes], dtype=np.float32)
        arrays[entry["name"]] = buf.reshape(entry["shape"]).copy()
        offset += nbytes
    return arrays, header

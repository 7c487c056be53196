"""Checkpoint container.

Layout (all integers little-endian)::

    magic     8 bytes   b"BIPOCKPT"
    version   uint32    1
    hdr_len   uint64    length of the JSON header in bytes
    header    hdr_len   UTF-8 JSON: {"meta": {...}, "tensors": [{"name", "shape", "offset"}...]}
    payload   ...       concatenated little-endian float64 arrays, row-major

``offset`` counts bytes from the start of the payload. Tensors are written in
sorted name order so identical contents give identical files.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"BIPOCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, tensors: dict[str, np.ndarray], meta: dict | None = None) -> None:
    entries = []
    chunks = []
    offset = 0
    for name in sorted(tensors):
        arr = np.asarray(tensors[name], dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.tobytes(order="C"))
        offset += arr.nbytes
    header = json.dumps({"meta": meta or {}, "tensors": entries}, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(header)))
        fh.write(header)
        for c in chunks:
            fh.write(c)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    if len(raw) < 20:
        raise CheckpointError(f"{path}: truncated header")
    version, hlen = struct.unpack("<IQ", raw[8:20])
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    try:
        header = json.loads(raw[20:20 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header") from exc
    payload = memoryview(raw)[20 + hlen:]
    out = {}
    for e in header["tensors"]:
        n = int(np.prod(e["shape"])) if e["shape"] else 1
        end = e["offset"] + 8 * n
        if end > len(payload):
            raise CheckpointError(f"{path}: payload truncated at tensor {e['name']!r}")
        out[e["name"]] = np.frombuffer(payload[e["offset"]:end], dtype="<f8").astype(np.float64).reshape(tuple(e["shape"]))
    return out, header["meta"]

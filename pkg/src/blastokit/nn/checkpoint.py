"""Binary checkpoint format.

Layout (all integers little-endian):

    magic "BLSK"
    u32 version (= 1)
    u32 tensor count
    per tensor:
        u16 name length, UTF-8 name
        u8  rank
        u64 x rank dims
        raw float32 payload (dims product * 4 bytes)
    u32 metadata length, UTF-8 JSON (epoch, seed, config hash, extras)

save -> load reproduces every tensor bit-exactly.  Corrupt magic, unsupported
version and truncation each raise their own error type; no partial model is
ever returned.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import (
    CheckpointError,
    CheckpointMagicError,
    CheckpointTruncatedError,
    CheckpointVersionError,
)

MAGIC = b"BLSK"
VERSION = 1


def save_checkpoint(tensors, metadata: dict, path) -> None:
    """Write named float32 tensors plus a JSON metadata block.

    tensors: iterable of (name, ndarray); arrays are stored as little-endian
    float32 in the given order.
    """
    items = list(tensors)
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", VERSION)
    blob += struct.pack("<I", len(items))
    for name, arr in items:
        arr = np.ascontiguousarray(arr, dtype="<f4")
        encoded = name.encode("utf-8")
        blob += struct.pack("<H", len(encoded))
        blob += encoded
        blob += struct.pack("<B", arr.ndim)
        for d in arr.shape:
            blob += struct.pack("<Q", d)
        blob += arr.tobytes()
    meta = json.dumps(metadata, sort_keys=True).encode("utf-8")
    blob += struct.pack("<I", len(meta))
    blob += meta
    Path(path).write_bytes(bytes(blob))


def load_checkpoint(path):
    """Read a checkpoint; returns (dict name -> float32 array, metadata dict)."""
    data = Path(path).read_bytes()
    view = memoryview(data)
    pos = 0

    def take(n: int, what: str) -> memoryview:
        nonlocal pos
        if pos + n > len(data):
            raise CheckpointTruncatedError(f"checkpoint truncated while reading {what}")
        chunk = view[pos : pos + n]
        pos += n
        return chunk

    if bytes(take(4, "magic")) != MAGIC:
        raise CheckpointMagicError("not a checkpoint file (bad magic bytes)")
    (version,) = struct.unpack("<I", take(4, "version"))
    if version != VERSION:
        raise CheckpointVersionError(f"unsupported checkpoint version {version}")
    (count,) = struct.unpack("<I", take(4, "tensor count"))
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2, "tensor name length"))
        name = bytes(take(name_len, "tensor name")).decode("utf-8")
        (rank,) = struct.unpack("<B", take(1, "tensor rank"))
        dims = struct.unpack(f"<{rank}Q", take(8 * rank, "tensor dims")) if rank else ()
        size = int(np.prod(dims, dtype=np.int64)) if rank else 1
        payload = take(4 * size, f"payload of {name!r}")
        tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
    (meta_len,) = struct.unpack("<I", take(4, "metadata length"))
    meta_raw = bytes(take(meta_len, "metadata"))
    if pos != len(data):
        raise CheckpointError(f"{len(data) - pos} trailing bytes after metadata")
    try:
        metadata = json.loads(meta_raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"metadata block is not valid JSON: {exc}") from exc
    return tensors, metadata

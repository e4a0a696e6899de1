"""Small shared utilities."""
from __future__ import annotations

import ctypes
import hashlib
import json
import sys

_M_TRIM_THRESHOLD = -1
_M_MMAP_THRESHOLD = -3
_allocator_tuned = False


def tune_allocator() -> None:
    """Keep large freed blocks on the heap instead of returning them to the OS.

    Training and explanation churn through many ~10-200 MB scratch arrays;
    with glibc defaults each reallocation is served by mmap and costs a full
    page-fault sweep.  Raising the mmap/trim thresholds makes those blocks
    reusable, which measured ~4x faster on allocation-heavy steps.  No-op off
    Linux/glibc.
    """
    global _allocator_tuned
    if _allocator_tuned or not sys.platform.startswith("linux"):
        return
    try:
        libc = ctypes.CDLL("libc.so.6", use_errno=True)
        libc.mallopt(_M_MMAP_THRESHOLD, 1 << 30)
        libc.mallopt(_M_TRIM_THRESHOLD, 1 << 30)
        _allocator_tuned = True
    except OSError:
        pass


def config_hash(config: dict) -> str:
    """Stable short hash of a configuration mapping."""
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def dump_json(obj, path=None) -> str:
    """Deterministic JSON: sorted keys, fixed separators, trailing newline."""
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text

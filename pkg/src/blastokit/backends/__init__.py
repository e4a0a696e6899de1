"""Kernel backend selection.

The loop-bound kernels (pooling, bilinear warp, SLIC steps, lasso coordinate
descent, batch-norm reductions) exist twice: a compiled Cython extension
(`_native`) and a pure-numpy fallback (`numpy_impl`).  The extension is
preferred when it was built; `BLASTOKIT_KERNELS=numpy|native` forces a
choice.  GEMM-bound operations (conv, LSTM, FC) use BLAS through numpy in
both cases and are not part of this interface.

`benchmarks/bench_kernels.py` compares the two implementations.
"""
from __future__ import annotations

import os

from . import numpy_impl

_choice = os.environ.get("BLASTOKIT_KERNELS", "auto")
if _choice not in ("auto", "native", "numpy"):
    raise RuntimeError(f"BLASTOKIT_KERNELS must be auto, native or numpy, got {_choice!r}")

kernels = None
if _choice in ("auto", "native"):
    try:
        from . import _native as kernels  # type: ignore[no-redef]
    except ImportError:
        if _choice == "native":
            raise RuntimeError("BLASTOKIT_KERNELS=native but the compiled extension is unavailable")
        kernels = None
if kernels is None:
    kernels = numpy_impl

BACKEND_NAME: str = kernels.NAME


def available_backends():
    """Modules for every importable backend (used by tests and benchmarks)."""
    found = [numpy_impl]
    try:
        from . import _native

        found.append(_native)
    except ImportError:
        pass
    return found

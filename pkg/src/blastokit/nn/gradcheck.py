"""Central finite-difference gradient verification (64-bit mode).

Layers are instantiated with dtype=float64 and their analytic backward
passes are compared against central differences of a random linear
projection of the output.  The relative error measure is

    || analytic - numeric ||_inf / (||analytic||_inf + ||numeric||_inf + tiny)
"""
from __future__ import annotations

import numpy as np


def finite_diff(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of scalar f() w.r.t. array x (mutated in place)."""
    grad = np.zeros_like(x)
    flat = x.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    num = np.abs(analytic - numeric).max()
    den = np.abs(analytic).max() + np.abs(numeric).max() + 1e-300
    return float(num / den)


def check_gradients(forward, backward, arrays, h: float = 1e-6,
                    tamper=None) -> float:
    """Max relative error across all checked arrays.

    forward()  -> output array (recomputed from the current array values)
    backward() -> list of analytic gradient arrays, one per entry of
                  ``arrays``, for loss = sum(output * projection)
    ``arrays`` are (name, ndarray) pairs probed by finite differences.
    ``tamper``, if given, maps (name, grad) -> grad and is applied to the
    analytic gradients (used by the self-check corruption hook).
    """
    out0 = forward()
    proj = np.random.Generator(np.random.Philox(12345)).standard_normal(out0.shape)

    def loss() -> float:
        return float((forward() * proj).sum())

    analytic = backward(proj)
    worst = 0.0
    for (name, arr), grad in zip(arrays, analytic):
        if tamper is not None:
            grad = tamper(name, grad)
        numeric = finite_diff(loss, arr, h)
        worst = max(worst, rel_error(grad, numeric))
    return worst

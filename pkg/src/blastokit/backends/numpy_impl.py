"""Pure-numpy implementations of the loop-bound kernels.

This is the fallback backend: same call signatures and semantics as the
compiled `_native` extension, vectorized with numpy instead of typed loops.
Feature maps are channels-last, (N, H, W, C).
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

NAME = "numpy"


# ---------------------------------------------------------------------------
# pooling
# ---------------------------------------------------------------------------

def maxpool_forward(x: np.ndarray, k: int, s: int):
    """Max pool, returning (out, argmax) with argmax as flat h*W + w source
    indices.  Ties resolve to the first window cell in row-major order."""
    n, h, w, c = x.shape
    oh = (h - k) // s + 1
    ow = (w - k) // s + 1
    win = sliding_window_view(x, (k, k), axis=(1, 2))[:, ::s, ::s]  # (N,oh,ow,C,k,k)
    win = win.reshape(n, oh, ow, c, k * k)
    local = win.argmax(axis=4)
    out = np.take_along_axis(win, local[..., None], axis=4)[..., 0]
    ky, kx = local // k, local % k
    oy = np.arange(oh)[None, :, None, None] * s
    ox = np.arange(ow)[None, None, :, None] * s
    idx = ((oy + ky) * w + (ox + kx)).astype(np.int64)
    return np.ascontiguousarray(out), idx


def maxpool_backward(dout: np.ndarray, idx: np.ndarray, h: int, w: int) -> np.ndarray:
    n, oh, ow, c = dout.shape
    dx = np.zeros((n, h * w, c), dtype=dout.dtype)
    ni = np.arange(n)[:, None, None, None]
    ci = np.arange(c)[None, None, None, :]
    np.add.at(dx, (ni, idx, ci), dout)
    return dx.reshape(n, h, w, c)


def avgpool_forward(x: np.ndarray, k: int, s: int) -> np.ndarray:
    n, h, w, c = x.shape
    oh = (h - k) // s + 1
    ow = (w - k) // s + 1
    win = sliding_window_view(x, (k, k), axis=(1, 2))[:, ::s, ::s]
    return np.ascontiguousarray(win.mean(axis=(4, 5)))


def avgpool_backward(dout: np.ndarray, k: int, s: int, h: int, w: int) -> np.ndarray:
    n, oh, ow, c = dout.shape
    dx = np.zeros((n, h, w, c), dtype=dout.dtype)
    g = dout / (k * k)
    for ky in range(k):
        for kx in range(k):
            dx[:, ky : ky + s * oh : s, kx : kx + s * ow : s, :] += g
    return dx


# ---------------------------------------------------------------------------
# bilinear sampling (resize / rotation inner loop)
# ---------------------------------------------------------------------------

def sample_bilinear(src: np.ndarray, ys: np.ndarray, xs: np.ndarray, fill=None) -> np.ndarray:
    """Sample src (H,W,C) at fractional coordinates (ys, xs), each (Ho,Wo).

    fill is None  -> coordinates are clamped to the valid range (resize).
    fill is (C,)  -> samples falling outside [0,H-1]x[0,W-1] take fill (rotate).
    """
    h, w, c = src.shape
    if fill is None:
        ys = np.clip(ys, 0.0, h - 1.0)
        xs = np.clip(xs, 0.0, w - 1.0)
        invalid = None
    else:
        invalid = (ys < 0.0) | (ys > h - 1.0) | (xs < 0.0) | (xs > w - 1.0)
        ys = np.clip(ys, 0.0, h - 1.0)
        xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.clip(np.floor(ys), 0, h - 2).astype(np.int64) if h > 1 else np.zeros_like(ys, np.int64)
    x0 = np.clip(np.floor(xs), 0, w - 2).astype(np.int64) if w > 1 else np.zeros_like(xs, np.int64)
    fy = (ys - y0)[..., None]
    fx = (xs - x0)[..., None]
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    out = (
        src[y0, x0] * (1 - fy) * (1 - fx)
        + src[y0, x1] * (1 - fy) * fx
        + src[y1, x0] * fy * (1 - fx)
        + src[y1, x1] * fy * fx
    )
    if invalid is not None:
        out[invalid] = np.asarray(fill, dtype=out.dtype)
    return out.astype(src.dtype, copy=False)


# ---------------------------------------------------------------------------
# SLIC inner steps
# ---------------------------------------------------------------------------

def slic_assign(lab: np.ndarray, centers: np.ndarray, spacing: float, compactness: float) -> np.ndarray:
    """One SLIC assignment step.

    lab: (H,W,3) color features; centers: (K,5) rows (l,a,b,y,x).
    Each pixel joins the nearest center within that center's 2S x 2S window
    under d^2 = d_color^2 + (compactness/spacing)^2 * d_spatial^2.
    Ties go to the lowest center index.
    """
    h, w, _ = lab.shape
    k = centers.shape[0]
    ratio2 = (compactness / spacing) ** 2
    best = np.full((h, w), np.inf, dtype=np.float64)
    labels = np.zeros((h, w), dtype=np.int64)
    rad = max(int(2 * spacing), 1)
    yy = np.arange(h, dtype=np.float64)
    xx = np.arange(w, dtype=np.float64)
    for ci in range(k):
        cl, ca, cb, cy, cx = centers[ci]
        y0, y1 = max(0, int(cy) - rad), min(h, int(cy) + rad + 1)
        x0, x1 = max(0, int(cx) - rad), min(w, int(cx) + rad + 1)
        if y0 >= y1 or x0 >= x1:
            continue
        patch = lab[y0:y1, x0:x1]
        dc = (
            (patch[..., 0] - cl) ** 2
            + (patch[..., 1] - ca) ** 2
            + (patch[..., 2] - cb) ** 2
        )
        ds = (yy[y0:y1, None] - cy) ** 2 + (xx[None, x0:x1] - cx) ** 2
        d = dc + ratio2 * ds
        sub_best = best[y0:y1, x0:x1]
        improved = d < sub_best
        sub_best[improved] = d[improved]
        labels[y0:y1, x0:x1][improved] = ci
    return labels


def slic_accumulate(lab: np.ndarray, labels: np.ndarray, k: int):
    """Per-segment sums of (l,a,b,y,x) and pixel counts."""
    h, w, _ = lab.shape
    flat = labels.ravel()
    counts = np.bincount(flat, minlength=k).astype(np.float64)
    sums = np.empty((k, 5), dtype=np.float64)
    for f in range(3):
        sums[:, f] = np.bincount(flat, weights=lab[..., f].ravel(), minlength=k)
    ygrid, xgrid = np.mgrid[0:h, 0:w]
    sums[:, 3] = np.bincount(flat, weights=ygrid.ravel().astype(np.float64), minlength=k)
    sums[:, 4] = np.bincount(flat, weights=xgrid.ravel().astype(np.float64), minlength=k)
    return sums, counts


# ---------------------------------------------------------------------------
# lasso coordinate descent over a geometric lambda path
# ---------------------------------------------------------------------------

def lasso_path(X: np.ndarray, y: np.ndarray, lambdas: np.ndarray, tol: float,
               max_sweeps: int, k_stop: int):
    """Cyclic coordinate descent on 0.5*||y - X b||^2 + lam*||b||_1.

    X and y are expected pre-scaled (weighted/centered) by the caller.
    Walks lambdas in order, warm-starting each step, and records the order
    in which coefficients first become nonzero.  Stops once k_stop
    coefficients have entered (or the path is exhausted).
    Returns (entry_order int64 array, final coefficients).
    """
    n, p = X.shape
    col_sq = np.einsum("ij,ij->j", X, X)
    beta = np.zeros(p, dtype=np.float64)
    r = y.astype(np.float64).copy()
    entered = np.zeros(p, dtype=bool)
    order: list[int] = []
    for lam in lambdas:
        for _ in range(max_sweeps):
            max_delta = 0.0
            for j in range(p):
                cj = col_sq[j]
                if cj <= 0.0:
                    continue
                bj = beta[j]
                rho = X[:, j] @ r + cj * bj
                nb = np.sign(rho) * max(abs(rho) - lam, 0.0) / cj
                if nb != bj:
                    r += X[:, j] * (bj - nb)
                    beta[j] = nb
                    max_delta = max(max_delta, abs(nb - bj))
                    if nb != 0.0 and not entered[j]:
                        entered[j] = True
                        order.append(j)
            if max_delta < tol:
                break
        if len(order) >= k_stop:
            break
    return np.asarray(order, dtype=np.int64), beta

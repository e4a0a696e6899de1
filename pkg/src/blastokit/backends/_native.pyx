# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: typed-loop versions of the numpy fallback.

Same signatures and semantics as `numpy_impl`; feature maps are
channels-last (N, H, W, C).  float32 and float64 are both supported so the
64-bit gradient-check mode runs through the same code.
"""
import numpy as np

cimport cython
cimport numpy as cnp
from libc.math cimport floor, sqrt, INFINITY

cnp.import_array()

NAME = "native"

ctypedef fused floating:
    float
    double


def maxpool_forward(const floating[:, :, :, ::1] x, int k, int s):
    cdef Py_ssize_t n = x.shape[0], h = x.shape[1], w = x.shape[2], c = x.shape[3]
    cdef Py_ssize_t oh = (h - k) // s + 1, ow = (w - k) // s + 1
    dtype = np.float32 if floating is float else np.float64
    out_arr = np.empty((n, oh, ow, c), dtype=dtype)
    idx_arr = np.empty((n, oh, ow, c), dtype=np.int64)
    cdef floating[:, :, :, ::1] out = out_arr
    cdef long long[:, :, :, ::1] idx = idx_arr
    cdef Py_ssize_t i, oy, ox, ci, ky, kx, by, bx
    cdef floating v, best
    cdef long long bidx
    for i in range(n):
        for oy in range(oh):
            by = oy * s
            for ox in range(ow):
                bx = ox * s
                for ci in range(c):
                    best = x[i, by, bx, ci]
                    bidx = by * w + bx
                    for ky in range(k):
                        for kx in range(k):
                            v = x[i, by + ky, bx + kx, ci]
                            if v > best:
                                best = v
                                bidx = (by + ky) * w + (bx + kx)
                    out[i, oy, ox, ci] = best
                    idx[i, oy, ox, ci] = bidx
    return out_arr, idx_arr


def maxpool_backward(const floating[:, :, :, ::1] dout, const long long[:, :, :, ::1] idx,
                     int h, int w):
    cdef Py_ssize_t n = dout.shape[0], oh = dout.shape[1], ow = dout.shape[2], c = dout.shape[3]
    dtype = np.float32 if floating is float else np.float64
    dx_arr = np.zeros((n, h * w, c), dtype=dtype)
    cdef floating[:, :, ::1] dx = dx_arr
    cdef Py_ssize_t i, oy, ox, ci
    for i in range(n):
        for oy in range(oh):
            for ox in range(ow):
                for ci in range(c):
                    dx[i, idx[i, oy, ox, ci], ci] += dout[i, oy, ox, ci]
    return dx_arr.reshape(n, h, w, c)


def avgpool_forward(const floating[:, :, :, ::1] x, int k, int s):
    cdef Py_ssize_t n = x.shape[0], h = x.shape[1], w = x.shape[2], c = x.shape[3]
    cdef Py_ssize_t oh = (h - k) // s + 1, ow = (w - k) // s + 1
    dtype = np.float32 if floating is float else np.float64
    out_arr = np.empty((n, oh, ow, c), dtype=dtype)
    cdef floating[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t i, oy, ox, ci, ky, kx, by, bx
    cdef double acc, scale = 1.0 / (k * k)
    for i in range(n):
        for oy in range(oh):
            by = oy * s
            for ox in range(ow):
                bx = ox * s
                for ci in range(c):
                    acc = 0.0
                    for ky in range(k):
                        for kx in range(k):
                            acc += x[i, by + ky, bx + kx, ci]
                    out[i, oy, ox, ci] = <floating> (acc * scale)
    return out_arr


def avgpool_backward(const floating[:, :, :, ::1] dout, int k, int s, int h, int w):
    cdef Py_ssize_t n = dout.shape[0], oh = dout.shape[1], ow = dout.shape[2], c = dout.shape[3]
    dtype = np.float32 if floating is float else np.float64
    dx_arr = np.zeros((n, h, w, c), dtype=dtype)
    cdef floating[:, :, :, ::1] dx = dx_arr
    cdef Py_ssize_t i, oy, ox, ci, ky, kx, by, bx
    cdef floating g
    cdef double scale = 1.0 / (k * k)
    for i in range(n):
        for oy in range(oh):
            by = oy * s
            for ox in range(ow):
                bx = ox * s
                for ci in range(c):
                    g = <floating> (dout[i, oy, ox, ci] * scale)
                    for ky in range(k):
                        for kx in range(k):
                            dx[i, by + ky, bx + kx, ci] += g
    return dx_arr


def sample_bilinear(const floating[:, :, ::1] src, const double[:, ::1] ys, const double[:, ::1] xs,
                    fill=None):
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1], c = src.shape[2]
    cdef Py_ssize_t oh = ys.shape[0], ow = ys.shape[1]
    dtype = np.float32 if floating is float else np.float64
    out_arr = np.empty((oh, ow, c), dtype=dtype)
    cdef floating[:, :, ::1] out = out_arr
    cdef bint has_fill = fill is not None
    fill_arr = np.zeros(c, dtype=dtype) if fill is None else np.asarray(fill, dtype=dtype)
    cdef floating[::1] fillv = fill_arr
    cdef Py_ssize_t i, j, ci, y0, x0, y1, x1
    cdef double yy, xx, fy, fx, w00, w01, w10, w11
    for i in range(oh):
        for j in range(ow):
            yy = ys[i, j]
            xx = xs[i, j]
            if has_fill and (yy < 0.0 or yy > h - 1.0 or xx < 0.0 or xx > w - 1.0):
                for ci in range(c):
                    out[i, j, ci] = fillv[ci]
                continue
            if yy < 0.0:
                yy = 0.0
            elif yy > h - 1.0:
                yy = h - 1.0
            if xx < 0.0:
                xx = 0.0
            elif xx > w - 1.0:
                xx = w - 1.0
            y0 = <Py_ssize_t> floor(yy)
            x0 = <Py_ssize_t> floor(xx)
            if y0 > h - 2:
                y0 = h - 2
            if y0 < 0:
                y0 = 0
            if x0 > w - 2:
                x0 = w - 2
            if x0 < 0:
                x0 = 0
            fy = yy - y0
            fx = xx - x0
            y1 = y0 + 1 if y0 + 1 < h else h - 1
            x1 = x0 + 1 if x0 + 1 < w else w - 1
            w00 = (1.0 - fy) * (1.0 - fx)
            w01 = (1.0 - fy) * fx
            w10 = fy * (1.0 - fx)
            w11 = fy * fx
            for ci in range(c):
                out[i, j, ci] = <floating> (
                    w00 * src[y0, x0, ci] + w01 * src[y0, x1, ci]
                    + w10 * src[y1, x0, ci] + w11 * src[y1, x1, ci]
                )
    return out_arr


def slic_assign(const double[:, :, ::1] lab, const double[:, ::1] centers, double spacing,
                double compactness):
    cdef Py_ssize_t h = lab.shape[0], w = lab.shape[1], k = centers.shape[0]
    cdef double ratio2 = (compactness / spacing) ** 2
    best_arr = np.full((h, w), np.inf, dtype=np.float64)
    labels_arr = np.zeros((h, w), dtype=np.int64)
    cdef double[:, ::1] best = best_arr
    cdef long long[:, ::1] labels = labels_arr
    cdef Py_ssize_t ci, y0, y1, x0, x1, i, j
    cdef Py_ssize_t rad = max(<Py_ssize_t> (2 * spacing), 1)
    cdef double cl, ca, cb, cy, cx, dl, da, db_, dy, dx, d
    for ci in range(k):
        cl = centers[ci, 0]
        ca = centers[ci, 1]
        cb = centers[ci, 2]
        cy = centers[ci, 3]
        cx = centers[ci, 4]
        y0 = max(0, <Py_ssize_t> cy - rad)
        y1 = min(h, <Py_ssize_t> cy + rad + 1)
        x0 = max(0, <Py_ssize_t> cx - rad)
        x1 = min(w, <Py_ssize_t> cx + rad + 1)
        for i in range(y0, y1):
            dy = i - cy
            for j in range(x0, x1):
                dl = lab[i, j, 0] - cl
                da = lab[i, j, 1] - ca
                db_ = lab[i, j, 2] - cb
                dx = j - cx
                d = dl * dl + da * da + db_ * db_ + ratio2 * (dy * dy + dx * dx)
                if d < best[i, j]:
                    best[i, j] = d
                    labels[i, j] = ci
    return labels_arr


def slic_accumulate(const double[:, :, ::1] lab, const long long[:, ::1] labels, int k):
    cdef Py_ssize_t h = lab.shape[0], w = lab.shape[1]
    sums_arr = np.zeros((k, 5), dtype=np.float64)
    counts_arr = np.zeros(k, dtype=np.float64)
    cdef double[:, ::1] sums = sums_arr
    cdef double[::1] counts = counts_arr
    cdef Py_ssize_t i, j
    cdef long long li
    for i in range(h):
        for j in range(w):
            li = labels[i, j]
            sums[li, 0] += lab[i, j, 0]
            sums[li, 1] += lab[i, j, 1]
            sums[li, 2] += lab[i, j, 2]
            sums[li, 3] += i
            sums[li, 4] += j
            counts[li] += 1.0
    return sums_arr, counts_arr


def lasso_path(const double[:, ::1] X, const double[::1] y, const double[::1] lambdas, double tol,
               int max_sweeps, int k_stop):
    cdef Py_ssize_t n = X.shape[0], p = X.shape[1], t = lambdas.shape[0]
    col_sq_arr = np.zeros(p, dtype=np.float64)
    beta_arr = np.zeros(p, dtype=np.float64)
    r_arr = np.empty(n, dtype=np.float64)
    entered_arr = np.zeros(p, dtype=np.int8)
    order_arr = np.empty(p, dtype=np.int64)
    cdef double[::1] col_sq = col_sq_arr, beta = beta_arr, r = r_arr
    cdef signed char[::1] entered = entered_arr
    cdef long long[::1] order = order_arr
    cdef Py_ssize_t i, j, li, sweep, n_order = 0
    cdef double lam, rho, bj, nb, max_delta, delta
    for i in range(n):
        r[i] = y[i]
    for j in range(p):
        for i in range(n):
            col_sq[j] += X[i, j] * X[i, j]
    for li in range(t):
        lam = lambdas[li]
        for sweep in range(max_sweeps):
            max_delta = 0.0
            for j in range(p):
                if col_sq[j] <= 0.0:
                    continue
                bj = beta[j]
                rho = col_sq[j] * bj
                for i in range(n):
                    rho += X[i, j] * r[i]
                if rho > lam:
                    nb = (rho - lam) / col_sq[j]
                elif rho < -lam:
                    nb = (rho + lam) / col_sq[j]
                else:
                    nb = 0.0
                if nb != bj:
                    for i in range(n):
                        r[i] += X[i, j] * (bj - nb)
                    beta[j] = nb
                    delta = nb - bj if nb > bj else bj - nb
                    if delta > max_delta:
                        max_delta = delta
                    if nb != 0.0 and not entered[j]:
                        entered[j] = 1
                        order[n_order] = j
                        n_order += 1
            if max_delta < tol:
                break
        if n_order >= k_stop:
            break
    return order_arr[:n_order].copy(), beta_arr

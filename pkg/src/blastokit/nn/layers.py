"""Layer kernels with hand-derived gradients.

Feature maps are channels-last, (N, H, W, C); dense activations are (N, F).
Every layer caches what its backward pass needs during forward; backward
takes the upstream gradient of the scalar loss w.r.t. the layer output,
accumulates parameter gradients into Param.grad, and returns the gradient
w.r.t. the layer input.

The production dtype is float32.  Constructing layers with dtype=float64
gives the verification mode used by the finite-difference gradient checks.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg.blas import dgemm, sgemm

from ..backends import kernels
from ..errors import ConfigError, DataError, ShapeError, UntrainedModelError


def _gemm_for(dtype):
    return sgemm if dtype == np.float32 else dgemm


class Param:
    """A named parameter tensor with paired gradient storage."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = value
        self.grad = np.zeros_like(value)

    @property
    def size(self) -> int:
        return self.value.size


class Layer:
    def params(self) -> list[Param]:
        return []

    def state_tensors(self) -> list[tuple[str, np.ndarray]]:
        """Non-trainable persistent state (e.g. batch-norm running stats)."""
        return []

    def _buf(self, key: str, shape, dtype, zero: bool = False) -> np.ndarray:
        """Reused per-layer scratch array.

        Large transients are recycled across steps because glibc caps the
        mmap threshold at 32 MiB: a fresh >32 MiB array is a fresh mmap and
        a full page-fault sweep every call.  Buffers are only valid within
        one forward/backward cycle of this layer.
        """
        bufs = getattr(self, "_scratch", None)
        if bufs is None:
            bufs = self._scratch = {}
        buf = bufs.get(key)
        if buf is None or buf.shape != tuple(shape) or buf.dtype != dtype:
            buf = np.zeros(shape, dtype) if zero else np.empty(shape, dtype)
            bufs[key] = buf
        return buf

    def release_scratch(self) -> None:
        getattr(self, "_scratch", {}).clear()


def he_uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Conv3x3(Layer):
    """3x3 cross-correlation, stride 1, zero 'same' padding, plus bias.

    Weights are stored as (3, 3, C_in, C_out).  The forward pass runs nine
    shifted GEMMs over a zero-padded flat (rows, C) buffer: for kernel tap
    (ky, kx) every interior output row p accumulates x_pad[p + s] @ W[ky,kx]
    with s = (ky-1)*Wp + (kx-1).  All GEMM operands are contiguous slices,
    which is what keeps single-core BLAS at full speed; the padded ring rows
    are discarded when slicing back to the interior.
    """

    def __init__(self, name: str, c_in: int, c_out: int, rng: np.random.Generator,
                 dtype=np.float32):
        self.name = name
        self.c_in = c_in
        self.c_out = c_out
        self.dtype = dtype
        self.w = Param(f"{name}.w", he_uniform(rng, (3, 3, c_in, c_out), 9 * c_in, dtype))
        self.b = Param(f"{name}.b", np.zeros(c_out, dtype=dtype))

    def params(self):
        return [self.w, self.b]

    @staticmethod
    def _spans(hp: int, wp: int):
        """(shift, row_start, row_stop) for the nine kernel taps."""
        total = hp * wp
        spans = []
        for ky in range(3):
            for kx in range(3):
                s = (ky - 1) * wp + (kx - 1)
                a = max(0, -s)
                b = total - max(0, s)
                spans.append((s, a, b))
        return spans

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        n, h, w, c = x.shape
        if c != self.c_in:
            raise ShapeError(f"{self.name}: expected {self.c_in} input channels, got {c}")
        hp, wp = h + 2, w + 2
        total = hp * wp
        gemm = _gemm_for(x.dtype)
        w9 = self.w.value.reshape(9, self.c_in, self.c_out)
        spans = self._spans(hp, wp)
        out = np.empty((n, h, w, self.c_out), dtype=x.dtype)
        xp = self._buf("xp", (total, self.c_in), x.dtype, zero=True)
        outp = self._buf("outp", (total, self.c_out), x.dtype)
        xp3 = xp.reshape(hp, wp, self.c_in)
        outp3 = outp.reshape(hp, wp, self.c_out)
        for i in range(n):
            xp3[1:-1, 1:-1] = x[i]
            # accumulate the nine taps inside BLAS; tap 0 (beta=0) already
            # covers every interior row, so the ring is the only garbage and
            # it is discarded by the interior slice below
            for k, (s, a, b) in enumerate(spans):
                gemm(1.0, w9[k].T, xp[a + s : b + s].T,
                     beta=0.0 if k == 0 else 1.0, c=outp[a:b].T, overwrite_c=1)
            np.add(outp3[1:-1, 1:-1], self.b.value, out=out[i])
        self._x = x
        return out

    def backward(self, dy: np.ndarray) -> np.ndarray:
        x = self._x
        n, h, w, _ = x.shape
        hp, wp = h + 2, w + 2
        total = hp * wp
        gemm = _gemm_for(x.dtype)
        w9 = self.w.value.reshape(9, self.c_in, self.c_out)
        dw9 = self.w.grad.reshape(9, self.c_in, self.c_out)
        spans = self._spans(hp, wp)
        self.b.grad += dy.sum(axis=(0, 1, 2))
        dx = np.empty_like(x)
        xp = self._buf("xp", (total, self.c_in), x.dtype, zero=True)
        dop = self._buf("dop", (total, self.c_out), x.dtype, zero=True)
        dxp = self._buf("dxp", (total, self.c_in), x.dtype)
        xp3 = xp.reshape(hp, wp, self.c_in)
        dop3 = dop.reshape(hp, wp, self.c_out)
        dxp3 = dxp.reshape(hp, wp, self.c_in)
        for i in range(n):
            xp3[1:-1, 1:-1] = x[i]
            dop3[1:-1, 1:-1] = dy[i]
            for k, (s, a, b) in enumerate(spans):
                # dW[k] += x_shift^T dout ; dx_shift += dout W[k]^T
                gemm(1.0, dop[a:b].T, xp[a + s : b + s].T, trans_b=1,
                     beta=1.0, c=dw9[k].T, overwrite_c=1)
                gemm(1.0, w9[k].T, dop[a:b].T, trans_a=1,
                     beta=0.0 if k == 0 else 1.0, c=dxp[a + s : b + s].T, overwrite_c=1)
            dx[i] = dxp3[1:-1, 1:-1]
        self._x = None
        return dx


class BatchNorm(Layer):
    """Per-channel batch normalization over batch x spatial positions.

    Train mode normalizes with batch statistics (eps 1e-5) and updates the
    running estimates with momentum 0.1; inference mode uses the running
    estimates and refuses to run before the first training step.
    """

    EPS = 1e-5
    MOMENTUM = 0.1

    def __init__(self, name: str, channels: int, dtype=np.float32):
        self.name = name
        self.channels = channels
        self.gamma = Param(f"{name}.gamma", np.ones(channels, dtype=dtype))
        self.beta = Param(f"{name}.beta", np.zeros(channels, dtype=dtype))
        self.running_mean = np.zeros(channels, dtype=np.float32)
        self.running_var = np.ones(channels, dtype=np.float32)
        self.updates = 0

    def params(self):
        return [self.gamma, self.beta]

    def state_tensors(self):
        return [
            (f"{self.name}.running_mean", self.running_mean),
            (f"{self.name}.running_var", self.running_var),
            (f"{self.name}.updates", np.array([self.updates], dtype=np.float32)),
        ]

    def load_state(self, tensors: dict[str, np.ndarray]) -> None:
        self.running_mean = tensors[f"{self.name}.running_mean"].astype(np.float32)
        self.running_var = tensors[f"{self.name}.running_var"].astype(np.float32)
        self.updates = int(tensors[f"{self.name}.updates"][0])

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        if x.shape[-1] != self.channels:
            raise ShapeError(f"{self.name}: expected {self.channels} channels, got {x.shape[-1]}")
        shape = x.shape
        flat = np.ascontiguousarray(x.reshape(-1, self.channels))
        m = flat.shape[0]
        if train:
            # stats from one centering pass: the centered sum of squares is
            # cancellation-free, so plain-dtype accumulation is enough
            mean = flat.mean(axis=0)
            xc = self._buf("xhat", flat.shape, flat.dtype)
            np.subtract(flat, mean, out=xc)
            var = np.einsum("ij,ij->j", xc, xc) / m
            inv_std = (1.0 / np.sqrt(var + self.EPS)).astype(flat.dtype)
            xc *= inv_std
            self._xhat = xc
            self._inv_std = inv_std
            y = xc * self.gamma.value
            y += self.beta.value
            mom = self.MOMENTUM
            self.running_mean[:] = (1 - mom) * self.running_mean + mom * mean
            self.running_var[:] = (1 - mom) * self.running_var + mom * var
            self.updates += 1
            return y.reshape(shape)
        if self.updates == 0:
            raise UntrainedModelError(
                f"{self.name}: inference requested before any training step"
            )
        inv = 1.0 / np.sqrt(self.running_var.astype(flat.dtype) + self.EPS)
        scale = (self.gamma.value * inv).astype(flat.dtype)
        shift = self.beta.value - self.running_mean.astype(flat.dtype) * scale
        y = flat * scale
        y += shift
        return y.reshape(shape)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        shape = dy.shape
        flat = np.ascontiguousarray(dy.reshape(-1, self.channels))
        m = flat.shape[0]
        xhat = self._xhat
        dbeta = flat.sum(axis=0)
        dgamma = np.einsum("ij,ij->j", flat, xhat)
        self.gamma.grad += dgamma
        self.beta.grad += dbeta
        # dx = g*inv * (dy - mean(dy) - xhat * mean(dy*xhat)), fused in place
        scale = self.gamma.value * self._inv_std
        dx = flat * scale
        dx -= scale * (dbeta / m)
        xhat *= scale * (dgamma / m)
        dx -= xhat
        self._xhat = None
        self._inv_std = None
        return dx.reshape(shape)


class ReLU(Layer):
    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        out = self._buf("out", x.shape, x.dtype)
        np.maximum(x, x.dtype.type(0), out=out)
        self._out = out  # mask recovered from the output sign; no extra cache
        return out

    def backward(self, dy: np.ndarray) -> np.ndarray:
        dx = dy * (self._out > 0)
        self._out = None
        return dx


class Pool(Layer):
    """Max or average pooling, no padding; output dim = (in - k)//stride + 1.

    Max backward routes each upstream value to the window argmax (first
    row-major cell on ties); average backward spreads it uniformly.
    """

    def __init__(self, kind: str, window: int, stride: int = 2):
        if kind not in ("max", "avg"):
            raise ConfigError(f"unknown pool kind {kind!r}")
        self.kind = kind
        self.window = window
        self.stride = stride

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        n, h, w, c = x.shape
        if h < self.window or w < self.window:
            raise ShapeError(
                f"pool window {self.window} exceeds input {h}x{w}"
            )
        self._in_hw = (h, w)
        x = np.ascontiguousarray(x)
        if self.kind == "max":
            out, idx = kernels.maxpool_forward(x, self.window, self.stride)
            self._idx = idx
            return out
        return kernels.avgpool_forward(x, self.window, self.stride)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        h, w = self._in_hw
        dy = np.ascontiguousarray(dy)
        if self.kind == "max":
            dx = kernels.maxpool_backward(dy, self._idx, h, w)
            self._idx = None
            return dx
        return kernels.avgpool_backward(dy, self.window, self.stride, h, w)


class DepthConcat(Layer):
    """Channel-axis concatenation of two same-sized maps."""

    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if a.shape[:-1] != b.shape[:-1]:
            raise ShapeError(f"depth concat: spatial mismatch {a.shape} vs {b.shape}")
        self._split = a.shape[-1]
        return np.concatenate([a, b], axis=-1)

    def backward(self, dy: np.ndarray):
        s = self._split
        return dy[..., :s], dy[..., s:]


class Dropout(Layer):
    """Inverted dropout: kept units scaled by 1/(1-rate); inference = identity."""

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate

    def forward(self, x: np.ndarray, train: bool = True,
                rng: np.random.Generator | None = None) -> np.ndarray:
        if not train or self.rate == 0.0:
            self._mask = None
            return x
        if rng is None:
            raise ConfigError("dropout in train mode requires an rng stream")
        keep = 1.0 - self.rate
        mask = (rng.random(x.shape) < keep).astype(x.dtype) / x.dtype.type(keep)
        self._mask = mask
        return x * mask

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if self._mask is None:
            return dy
        out = dy * self._mask
        self._mask = None
        return out


class LSTM(Layer):
    """Single-direction LSTM returning the final hidden state.

    Gate layout in the stacked 4H dimension is [input, forget, candidate,
    output]; h_0 = c_0 = 0.  Backward is full backpropagation through time.
    """

    def __init__(self, name: str, input_size: int, hidden: int, rng: np.random.Generator,
                 dtype=np.float32):
        self.name = name
        self.input_size = input_size
        self.hidden = hidden
        limit = 1.0 / np.sqrt(hidden)
        self.wx = Param(f"{name}.wx",
                        rng.uniform(-limit, limit, (4 * hidden, input_size)).astype(dtype))
        self.wh = Param(f"{name}.wh",
                        rng.uniform(-limit, limit, (4 * hidden, hidden)).astype(dtype))
        self.b = Param(f"{name}.b", np.zeros(4 * hidden, dtype=dtype))

    def params(self):
        return [self.wx, self.wh, self.b]

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        n, t, f = x.shape
        if f != self.input_size:
            raise ShapeError(f"{self.name}: expected feature size {self.input_size}, got {f}")
        hsz = self.hidden
        h = np.zeros((n, hsz), dtype=x.dtype)
        c = np.zeros((n, hsz), dtype=x.dtype)
        steps = []
        for ti in range(t):
            xt = x[:, ti, :]
            z = xt @ self.wx.value.T + h @ self.wh.value.T + self.b.value
            i = _sigmoid(z[:, :hsz])
            fgate = _sigmoid(z[:, hsz : 2 * hsz])
            g = np.tanh(z[:, 2 * hsz : 3 * hsz])
            o = _sigmoid(z[:, 3 * hsz :])
            c_new = fgate * c + i * g
            h_new = o * np.tanh(c_new)
            steps.append((xt, h, c, i, fgate, g, o, c_new))
            h, c = h_new, c_new
        self._steps = steps
        self._x_dtype_shape = (x.dtype, x.shape)
        return h

    def backward(self, dh: np.ndarray) -> np.ndarray:
        dtype, (n, t, f) = self._x_dtype_shape
        hsz = self.hidden
        dx = np.empty((n, t, f), dtype=dtype)
        dc = np.zeros((n, hsz), dtype=dtype)
        dh = dh.copy()
        for ti in range(t - 1, -1, -1):
            xt, h_prev, c_prev, i, fgate, g, o, c_new = self._steps[ti]
            tc = np.tanh(c_new)
            do = dh * tc
            dc = dc + dh * o * (1.0 - tc * tc)
            di = dc * g
            dg = dc * i
            df = dc * c_prev
            dz = np.concatenate(
                [di * i * (1 - i), df * fgate * (1 - fgate), dg * (1 - g * g), do * o * (1 - o)],
                axis=1,
            )
            self.wx.grad += dz.T @ xt
            self.wh.grad += dz.T @ h_prev
            self.b.grad += dz.sum(axis=0)
            dx[:, ti, :] = dz @ self.wx.value
            dh = dz @ self.wh.value
            dc = dc * fgate
        self._steps = None
        return dx


class Dense(Layer):
    """Affine map y = x W^T + b with weights (out, in)."""

    def __init__(self, name: str, f_in: int, f_out: int, rng: np.random.Generator,
                 dtype=np.float32):
        self.name = name
        self.f_in = f_in
        self.f_out = f_out
        self.w = Param(f"{name}.w", he_uniform(rng, (f_out, f_in), f_in, dtype))
        self.b = Param(f"{name}.b", np.zeros(f_out, dtype=dtype))

    def params(self):
        return [self.w, self.b]

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        if x.shape[1] != self.f_in:
            raise ShapeError(f"{self.name}: expected {self.f_in} features, got {x.shape[1]}")
        self._x = x
        return x @ self.w.value.T + self.b.value

    def backward(self, dy: np.ndarray) -> np.ndarray:
        self.w.grad += dy.T @ self._x
        self.b.grad += dy.sum(axis=0)
        dx = dy @ self.w.value
        self._x = None
        return dx


class SoftmaxXent:
    """Row-stabilized softmax + mean cross-entropy for one-hot labels.

    Gradient w.r.t. the logits is (p - y) / N.
    """

    def forward(self, logits: np.ndarray, labels: np.ndarray):
        if logits.shape != labels.shape:
            raise ShapeError(f"logits {logits.shape} vs labels {labels.shape}")
        _check_one_hot(labels)
        probs = softmax(logits)
        n = logits.shape[0]
        eps = np.finfo(logits.dtype).tiny
        loss = float(0.0 - np.log(np.maximum((probs * labels).sum(axis=1), eps)).mean())
        self._probs = probs
        self._labels = labels
        return probs, loss

    def backward(self) -> np.ndarray:
        n = self._probs.shape[0]
        return (self._probs - self._labels) / self._probs.dtype.type(n)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _check_one_hot(labels: np.ndarray) -> None:
    ok = np.all((labels == 0) | (labels == 1)) and np.all(labels.sum(axis=1) == 1)
    if not ok:
        raise DataError("labels must be one-hot rows")

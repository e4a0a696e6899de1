"""Functional op surface in N x C x H x W convention.

Each op returns its output plus a ``backward`` closure that maps the
upstream gradient to the gradients of the inputs/parameters (in the
documented order).  These wrappers adapt to the channels-last layer cores;
they are the surface exercised by the contract tests, the finite-difference
gradient checks and the self-check command.  The training path in
`blastokit.model` uses the layer classes directly.
"""
from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from ..rng import stream
from . import layers as L


def to_nhwc(x: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.transpose(x, (0, 2, 3, 1)))


def to_nchw(x: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.transpose(x, (0, 3, 1, 2)))


def conv2d(x: np.ndarray, weights: np.ndarray, bias: np.ndarray):
    """3x3 stride-1 'same' convolution.

    x: (N, C_in, H, W); weights: (C_out, C_in, 3, 3); bias: (C_out,).
    Returns (y, backward); backward(dy) -> (dx, dweights, dbias).
    """
    n, c_in, h, w = x.shape
    c_out, wc_in, kh, kw = weights.shape
    if (kh, kw) != (3, 3):
        raise ShapeError(f"kernel must be 3x3, got {kh}x{kw}")
    if wc_in != c_in:
        raise ShapeError(f"input has {c_in} channels but weights expect {wc_in}")
    layer = L.Conv3x3.__new__(L.Conv3x3)
    layer.name = "conv2d"
    layer.c_in = c_in
    layer.c_out = c_out
    layer.dtype = x.dtype
    layer.w = L.Param("conv2d.w", np.ascontiguousarray(weights.transpose(2, 3, 1, 0)))
    layer.b = L.Param("conv2d.b", np.ascontiguousarray(bias))
    y = layer.forward(to_nhwc(x))

    def backward(dy: np.ndarray):
        dx = layer.backward(np.ascontiguousarray(to_nhwc(dy)))
        dw = layer.w.grad.transpose(3, 2, 0, 1).copy()
        return to_nchw(dx), dw, layer.b.grad.copy()

    return to_nchw(y), backward


def batchnorm(x: np.ndarray, scale: np.ndarray, offset: np.ndarray,
              mode: str = "train", state: L.BatchNorm | None = None):
    """Per-channel batch norm over batch x spatial.

    x: (N, C, H, W).  ``state`` carries running statistics between calls;
    pass the object returned by a previous call to run inference.
    Returns (y, backward, state); backward(dy) -> (dx, dscale, doffset).
    """
    c = x.shape[1]
    if scale.shape != (c,) or offset.shape != (c,):
        raise ShapeError(f"scale/offset must have shape ({c},)")
    if state is None:
        state = L.BatchNorm("batchnorm", c, dtype=x.dtype)
    state.gamma.value = np.ascontiguousarray(scale)
    state.beta.value = np.ascontiguousarray(offset)
    state.gamma.grad = np.zeros_like(state.gamma.value)
    state.beta.grad = np.zeros_like(state.beta.value)
    y = state.forward(to_nhwc(x), train=(mode == "train"))

    def backward(dy: np.ndarray):
        dx = state.backward(np.ascontiguousarray(to_nhwc(dy)))
        return to_nchw(dx), state.gamma.grad.copy(), state.beta.grad.copy()

    return to_nchw(y), backward, state


def relu(x: np.ndarray):
    layer = L.ReLU()
    y = layer.forward(x)

    def backward(dy: np.ndarray):
        return (layer.backward(dy),)

    return y, backward


def pool(x: np.ndarray, kind: str, window: int, stride: int = 2):
    """Max/avg pooling of (N, C, H, W); no padding."""
    layer = L.Pool(kind, window, stride)
    y = layer.forward(to_nhwc(x))

    def backward(dy: np.ndarray):
        return (to_nchw(layer.backward(to_nhwc(dy))),)

    return to_nchw(y), backward


def depth_concat(a: np.ndarray, b: np.ndarray):
    layer = L.DepthConcat()
    y = layer.forward(to_nhwc(a), to_nhwc(b))

    def backward(dy: np.ndarray):
        da, db = layer.backward(to_nhwc(dy))
        return to_nchw(da), to_nchw(db)

    return to_nchw(y), backward


def dropout(x: np.ndarray, rate: float, mode: str, seed: int):
    layer = L.Dropout(rate)
    rng = stream(seed, "dropout")
    y = layer.forward(x, train=(mode == "train"), rng=rng)

    def backward(dy: np.ndarray):
        return (layer.backward(dy),)

    return y, backward


def lstm_forward(sequence: np.ndarray, wx: np.ndarray, wh: np.ndarray, b: np.ndarray):
    """LSTM over one sequence (T, F) with params (4H, F), (4H, H), (4H,).

    Returns (h_T, backward); backward(dh) -> (dsequence, dwx, dwh, db).
    """
    t, f = sequence.shape
    hidden = wh.shape[1]
    if wx.shape != (4 * hidden, f):
        raise ShapeError(f"input weights must be (4H, F) = ({4*hidden}, {f}), got {wx.shape}")
    layer = L.LSTM.__new__(L.LSTM)
    layer.name = "lstm"
    layer.input_size = f
    layer.hidden = hidden
    layer.wx = L.Param("lstm.wx", np.ascontiguousarray(wx))
    layer.wh = L.Param("lstm.wh", np.ascontiguousarray(wh))
    layer.b = L.Param("lstm.b", np.ascontiguousarray(b))
    h = layer.forward(sequence[None])

    def backward(dh: np.ndarray):
        dx = layer.backward(dh[None].astype(sequence.dtype))
        return dx[0], layer.wx.grad.copy(), layer.wh.grad.copy(), layer.b.grad.copy()

    return h[0], backward


def fully_connected(x: np.ndarray, weights: np.ndarray, bias: np.ndarray):
    """Affine map of a single feature vector (F_in,) -> (F_out,)."""
    layer = L.Dense.__new__(L.Dense)
    layer.name = "fc"
    layer.f_in = weights.shape[1]
    layer.f_out = weights.shape[0]
    layer.w = L.Param("fc.w", np.ascontiguousarray(weights))
    layer.b = L.Param("fc.b", np.ascontiguousarray(bias))
    y = layer.forward(x[None])

    def backward(dy: np.ndarray):
        dx = layer.backward(dy[None].astype(x.dtype))
        return dx[0], layer.w.grad.copy(), layer.b.grad.copy()

    return y[0], backward


def softmax_xent(logits: np.ndarray, labels: np.ndarray):
    """Returns (probabilities, mean loss, backward); backward() -> (dlogits,)."""
    op = L.SoftmaxXent()
    probs, loss = op.forward(logits, labels)

    def backward():
        return (op.backward(),)

    return probs, loss, backward

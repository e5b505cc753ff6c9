"""
Neural-network ops over Tensor: activations, softmax, layer norm, HWC
convolutions, align-corners bilinear sampling and the two training losses.
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from errors import DimensionError
from tensor import Tensor, as_tensor, make_result

LN_EPS = 1e-5
BCE_CLAMP = 1e-7


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return make_result(x.data * mask, (x,), lambda g: (g * mask,), "relu")


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    scale = np.where(x.data > 0, 1.0, slope).astype(x.data.dtype)
    return make_result(x.data * scale, (x,), lambda g: (g * scale,), "leaky_relu")


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    e = np.exp(-np.abs(d))
    out = np.where(d >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(d.dtype)
    return make_result(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def _backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return make_result(out, (x,), _backward, "softmax")


def layer_norm(x: Tensor, gain: Optional[Tensor] = None, bias: Optional[Tensor] = None,
               eps: float = LN_EPS) -> Tensor:
    """Normalizes over the last axis; gain/bias of shape [C] are optional."""
    if x.shape[-1] < 2:
        raise DimensionError(f"layer_norm needs a normalized axis of length >= 2, got {x.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered ** 2).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    out = xhat
    if gain is not None:
        out = out * gain.data
    if bias is not None:
        out = out + bias.data

    parents = tuple(t for t in (x, gain, bias) if t is not None)
    lead_axes = tuple(range(x.ndim - 1))

    def _backward(g):
        dxhat = g * gain.data if gain is not None else g
        dx = inv_std * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
        grads = [dx]
        if gain is not None:
            grads.append((g * xhat).sum(axis=lead_axes))
        if bias is not None:
            grads.append(g.sum(axis=lead_axes))
        return tuple(grads)

    return make_result(out, parents, _backward, "layer_norm")


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def _backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return make_result(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), _backward, "concat")


def gather_rows(table: Tensor, rows: np.ndarray) -> Tensor:
    rows = np.asarray(rows, dtype=np.int64)

    def _backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, rows, g)
        return (full,)

    return make_result(table.data[rows], (table,), _backward, "gather_rows")


def upsample2x(x: Tensor) -> Tensor:
    """Nearest-neighbour doubling of the two leading (spatial) axes of an HWC map."""
    H, W = x.shape[0], x.shape[1]
    out = np.repeat(np.repeat(x.data, 2, axis=0), 2, axis=1)

    def _backward(g):
        return (g.reshape(H, 2, W, 2, *g.shape[2:]).sum(axis=(1, 3)),)

    return make_result(out, (x,), _backward, "upsample2x")


def _conv_out(size: int, k: int, stride: int, pad: int, what: str) -> int:
    span = size + 2 * pad - k
    if span < 0:
        raise DimensionError(f"{what}: kernel {k} does not fit padded input {size}+2*{pad}")
    if span % stride != 0:
        raise DimensionError(f"{what}: stride {stride} does not tile padded input {size}+2*{pad} with kernel {k}")
    return span // stride + 1


def conv2d(x: Tensor, kernel: Tensor, bias: Optional[Tensor] = None, stride: int = 1, pad: int = 0) -> Tensor:
    """
    Cross-correlation of x [H,W,Cin] with kernel [kh,kw,Cin,Cout], zero padding.
    Output is [(H+2p-kh)/s+1, (W+2p-kw)/s+1, Cout]; the division must be exact.
    """
    if x.ndim != 3 or kernel.ndim != 4 or kernel.shape[2] != x.shape[2]:
        raise DimensionError(f"conv2d shapes disagree: input {x.shape}, kernel {kernel.shape}")
    H, W, Cin = x.shape
    kh, kw, _, Cout = kernel.shape
    Ho = _conv_out(H, kh, stride, pad, "conv2d")
    Wo = _conv_out(W, kw, stride, pad, "conv2d")

    xp = np.pad(x.data, ((pad, pad), (pad, pad), (0, 0)))
    windows = sliding_window_view(xp, (kh, kw), axis=(0, 1))[::stride, ::stride]
    cols = windows.transpose(0, 1, 3, 4, 2).reshape(Ho * Wo, kh * kw * Cin)
    kmat = kernel.data.reshape(kh * kw * Cin, Cout)
    out = cols @ kmat
    if bias is not None:
        out = out + bias.data
    out = out.reshape(Ho, Wo, Cout)

    def _backward(g):
        g2 = g.reshape(Ho * Wo, Cout)
        dk = (cols.T @ g2).reshape(kernel.shape)
        dcols = (g2 @ kmat.T).reshape(Ho, Wo, kh, kw, Cin)
        dxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                dxp[i:i + stride * Ho:stride, j:j + stride * Wo:stride] += dcols[:, :, i, j]
        dx = dxp[pad:pad + H, pad:pad + W]
        grads = [dx, dk]
        if bias is not None:
            grads.append(g2.sum(axis=0))
        return tuple(grads)

    parents = (x, kernel) if bias is None else (x, kernel, bias)
    return make_result(out, parents, _backward, "conv2d")


def conv_transpose2d(x: Tensor, kernel: Tensor, bias: Optional[Tensor] = None, stride: int = 2, pad: int = 0) -> Tensor:
    """
    Adjoint of conv2d: x [H,W,Cin], kernel [kh,kw,Cin,Cout].
    Output is [(H-1)s - 2p + kh, (W-1)s - 2p + kw, Cout].
    """
    if x.ndim != 3 or kernel.ndim != 4 or kernel.shape[2] != x.shape[2]:
        raise DimensionError(f"conv_transpose2d shapes disagree: input {x.shape}, kernel {kernel.shape}")
    H, W, Cin = x.shape
    kh, kw, _, Cout = kernel.shape
    Hf, Wf = (H - 1) * stride + kh, (W - 1) * stride + kw
    Ho, Wo = Hf - 2 * pad, Wf - 2 * pad
    if Ho <= 0 or Wo <= 0:
        raise DimensionError(f"conv_transpose2d: padding {pad} consumes the whole output")

    full = np.zeros((Hf, Wf, Cout), dtype=x.data.dtype)
    for i in range(kh):
        for j in range(kw):
            full[i:i + stride * H:stride, j:j + stride * W:stride] += x.data @ kernel.data[i, j]
    out = full[pad:pad + Ho, pad:pad + Wo]
    if bias is not None:
        out = out + bias.data

    def _backward(g):
        gf = np.zeros((Hf, Wf, Cout), dtype=g.dtype)
        gf[pad:pad + Ho, pad:pad + Wo] = g
        dx = np.zeros_like(x.data)
        dk = np.zeros_like(kernel.data)
        x2 = x.data.reshape(H * W, Cin)
        for i in range(kh):
            for j in range(kw):
                gs = gf[i:i + stride * H:stride, j:j + stride * W:stride]
                dx += gs @ kernel.data[i, j].T
                dk[i, j] = x2.T @ gs.reshape(H * W, Cout)
        grads = [dx, dk]
        if bias is not None:
            grads.append(g.reshape(-1, Cout).sum(axis=0))
        return tuple(grads)

    parents = (x, kernel) if bias is None else (x, kernel, bias)
    return make_result(np.ascontiguousarray(out), parents, _backward, "conv_transpose2d")


def _axis_cells(coord: np.ndarray, size: int):
    """Continuous texel coordinate -> (low index, high index, fraction, in-range mask)."""
    f = (np.clip(coord, -1.0, 1.0) + 1.0) * 0.5 * (size - 1)
    if size == 1:
        zero = np.zeros(coord.shape, dtype=np.int64)
        return zero, zero, np.zeros_like(f), np.zeros(coord.shape, dtype=bool)
    lo = np.clip(np.floor(f).astype(np.int64), 0, size - 2)
    inside = (coord >= -1.0) & (coord <= 1.0)
    return lo, lo + 1, f - lo, inside


def bilinear_sample(plane: Tensor, uv: Tensor) -> Tensor:
    """
    Samples plane [H,W,C] at uv [N,2] (u along columns, v along rows) with the
    align-corners convention: (-1,-1) is texel (0,0), (1,1) is texel (H-1,W-1).
    Out-of-range uv is clamped to the border. Returns [N,C].
    """
    uv = as_tensor(uv, plane)
    if plane.ndim != 3 or uv.ndim != 2 or uv.shape[1] != 2:
        raise DimensionError(f"bilinear_sample expects plane [H,W,C] and uv [N,2], got {plane.shape}, {uv.shape}")
    H, W, _ = plane.shape
    P = plane.data
    x0, x1, tx, in_u = _axis_cells(uv.data[:, 0], W)
    y0, y1, ty, in_v = _axis_cells(uv.data[:, 1], H)
    tx_, ty_ = tx[:, None], ty[:, None]

    p00, p01 = P[y0, x0], P[y0, x1]
    p10, p11 = P[y1, x0], P[y1, x1]
    top = (1.0 - tx_) * p00 + tx_ * p01
    bottom = (1.0 - tx_) * p10 + tx_ * p11
    out = (1.0 - ty_) * top + ty_ * bottom

    def _backward(g):
        dplane = None
        if plane.requires_grad:
            dplane = np.zeros_like(P)
            np.add.at(dplane, (y0, x0), g * ((1.0 - ty_) * (1.0 - tx_)))
            np.add.at(dplane, (y0, x1), g * ((1.0 - ty_) * tx_))
            np.add.at(dplane, (y1, x0), g * (ty_ * (1.0 - tx_)))
            np.add.at(dplane, (y1, x1), g * (ty_ * tx_))
        duv = None
        if uv.requires_grad:
            d_fx = ((1.0 - ty_) * (p01 - p00) + ty_ * (p11 - p10)) * g
            d_fy = (bottom - top) * g
            duv = np.stack([d_fx.sum(axis=1) * 0.5 * (W - 1) * in_u,
                            d_fy.sum(axis=1) * 0.5 * (H - 1) * in_v], axis=1)
        return dplane, duv

    return make_result(out, (plane, uv), _backward, "bilinear_sample")


def bce_loss(pred: Tensor, labels: np.ndarray, clamp: float = BCE_CLAMP) -> Tensor:
    """Mean binary cross-entropy on probabilities, clamped away from {0, 1}."""
    y = np.asarray(labels, dtype=pred.data.dtype).reshape(pred.shape)
    p = np.clip(pred.data, clamp, 1.0 - clamp)
    n = p.size
    loss = -np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    live = (pred.data > clamp) & (pred.data < 1.0 - clamp)

    def _backward(g):
        return (g * live * (-(y / p) + (1.0 - y) / (1.0 - p)) / n,)

    return make_result(np.asarray(loss), (pred,), _backward, "bce")


def l1_loss(pred: Tensor, labels: np.ndarray) -> Tensor:
    y = np.asarray(labels, dtype=pred.data.dtype)
    if y.shape != pred.shape:
        raise DimensionError(f"l1_loss shapes disagree: {pred.shape} vs {y.shape}")
    diff = pred.data - y

    def _backward(g):
        return (g * np.sign(diff) / diff.size,)

    return make_result(np.asarray(np.abs(diff).mean()), (pred,), _backward, "l1")


__all__ = ["relu", "leaky_relu", "sigmoid", "softmax", "layer_norm", "concat", "gather_rows",
           "upsample2x", "conv2d", "conv_transpose2d", "bilinear_sample", "bce_loss", "l1_loss",
           "LN_EPS", "BCE_CLAMP"]

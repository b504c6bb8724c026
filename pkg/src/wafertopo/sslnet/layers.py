"""Differentiable building blocks with explicit forward/backward passes.

All arrays are float64, batch-first: images (B, C, H, W), features (B, D).
Each forward returns (output, cache); each backward takes (grad_out, cache).
"""
from __future__ import annotations

import numpy as np


def _im2col(x: np.ndarray, k: int, pad: int) -> np.ndarray:
    """(B, C, H, W) -> (B, H*W, C*k*k) patches for stride-1 convolution."""
    b, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    windows = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
    # (B, C, H, W, k, k) -> (B, H, W, C, k, k)
    windows = windows.transpose(0, 2, 3, 1, 4, 5)
    return windows.reshape(b, h * w, c * k * k)


def conv3x3_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray):
    """3x3 stride-1 conv with zero padding 1; weight (F, C, 3, 3), bias (F,)."""
    b, c, h, w = x.shape
    f = weight.shape[0]
    cols = _im2col(x, 3, 1)  # (B, HW, C*9)
    wmat = weight.reshape(f, -1)  # (F, C*9)
    out = cols @ wmat.T + bias  # (B, HW, F)
    out = out.transpose(0, 2, 1).reshape(b, f, h, w)
    return out, (cols, wmat, x.shape)


def conv3x3_backward(grad: np.ndarray, cache):
    cols, wmat, xshape = cache
    b, c, h, w = xshape
    f = wmat.shape[0]
    g = grad.reshape(b, f, h * w).transpose(0, 2, 1)  # (B, HW, F)
    dbias = g.sum(axis=(0, 1))
    dwmat = np.einsum("bpf,bpk->fk", g, cols)
    dcols = g @ wmat  # (B, HW, C*9)
    # scatter patches back (col2im)
    dxp = np.zeros((b, c, h + 2, w + 2))
    dcols = dcols.reshape(b, h, w, c, 3, 3)
    for dy in range(3):
        for dx in range(3):
            dxp[:, :, dy : dy + h, dx : dx + w] += dcols[:, :, :, :, dy, dx].transpose(0, 3, 1, 2)
    dx = dxp[:, :, 1 : 1 + h, 1 : 1 + w]
    return dx, dwmat.reshape(f, c, 3, 3), dbias


def maxpool2_forward(x: np.ndarray):
    """2x2 stride-2 max pool; trailing odd row/col is dropped."""
    b, c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    xr = x[:, :, : 2 * h2, : 2 * w2].reshape(b, c, h2, 2, w2, 2)
    windows = xr.transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h2, w2, 4)
    arg = windows.argmax(axis=4)
    out = np.take_along_axis(windows, arg[..., None], axis=4)[..., 0]
    return out, (arg, x.shape)


def maxpool2_backward(grad: np.ndarray, cache):
    arg, xshape = cache
    b, c, h, w = xshape
    h2, w2 = h // 2, w // 2
    dwin = np.zeros((b, c, h2, w2, 4))
    np.put_along_axis(dwin, arg[..., None], grad[..., None], axis=4)
    dx = np.zeros(xshape)
    dx[:, :, : 2 * h2, : 2 * w2] = (
        dwin.reshape(b, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, 2 * h2, 2 * w2)
    )
    return dx


def gap_forward(x: np.ndarray):
    """Global average pool (B, C, H, W) -> (B, C)."""
    return x.mean(axis=(2, 3)), x.shape


def gap_backward(grad: np.ndarray, xshape):
    b, c, h, w = xshape
    return np.broadcast_to(grad[:, :, None, None], xshape) / (h * w)


def relu_forward(x: np.ndarray):
    mask = x > 0
    return x * mask, mask


def relu_backward(grad: np.ndarray, mask):
    return grad * mask


def affine_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray):
    """x (B, D_in), weight (D_out, D_in)."""
    return x @ weight.T + bias, (x, weight)


def affine_backward(grad: np.ndarray, cache):
    x, weight = cache
    return grad @ weight, grad.T @ x, grad.sum(axis=0)


def l2norm_forward(x: np.ndarray, eps: float = 0.0):
    """Row-wise L2 normalization; an all-zero row maps to e1 (convention)."""
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    zero = norms[:, 0] == 0.0
    out = np.divide(x, norms, out=np.zeros_like(x), where=norms > 0)
    if zero.any():
        out[zero, 0] = 1.0
    return out, (x, norms, out, zero)


def l2norm_backward(grad: np.ndarray, cache):
    x, norms, out, zero = cache
    # d/dx (x/|x|) = (I - y y^T)/|x|
    dots = (grad * out).sum(axis=1, keepdims=True)
    dx = np.divide(grad - out * dots, norms, out=np.zeros_like(grad), where=norms > 0)
    dx[zero] = 0.0  # the e1 convention is locally constant
    return dx

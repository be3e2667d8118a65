"""Numpy kernels for 1-D layers, each with an explicit backward.

Arrays are laid out ``(batch, channels, length)``.  A 2-D ``(channels,
length)`` input is accepted by the convolution kernels and treated as a batch
of one.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

PADDING_MODES = ("same", "causal", "valid")


def conv_padding(kernel: int, dilation: int, mode: str) -> tuple[int, int]:
    total = (kernel - 1) * dilation
    if mode == "same":
        return total // 2, total - total // 2
    if mode == "causal":
        return total, 0
    if mode == "valid":
        return 0, 0
    raise ValueError(f"unknown padding mode {mode!r}; expected one of {PADDING_MODES}")


def receptive_field(kernel: int, dilation: int) -> int:
    return (kernel - 1) * dilation + 1


def _as_batch(x):
    x = np.asarray(x)
    return (x[None], True) if x.ndim == 2 else (x, False)


def _im2col(xp: np.ndarray, kernel: int, dilation: int, n_out: int) -> np.ndarray:
    B, C, _ = xp.shape
    cols = np.empty((B, C, kernel, n_out), dtype=xp.dtype)
    for j in range(kernel):
        cols[:, :, j, :] = xp[:, :, j * dilation : j * dilation + n_out]
    return cols.reshape(B, C * kernel, n_out)


def conv1d_forward(x, weight, bias=None, dilation: int = 1, padding: str = "same", return_cols=False):
    """``y[o, n] = bias[o] + sum_{c,k} w[o, c, k] x[c, n + (k - anchor) d]``.

    ``anchor`` is ``(K-1)//2`` for ``same``, ``K-1`` for ``causal``; for
    ``valid`` the output starts at the first fully-covered position.
    """
    x, squeeze = _as_batch(x)
    weight = np.asarray(weight)
    O, C, K = weight.shape
    if x.shape[1] != C:
        raise ValueError(f"input has {x.shape[1]} channels, weight expects in_channels={C}")
    left, right = conv_padding(K, dilation, padding)
    xp = np.pad(x, ((0, 0), (0, 0), (left, right))) if left or right else x
    n_out = xp.shape[-1] - (K - 1) * dilation
    if n_out < 1:
        raise ValueError(
            f"input length {x.shape[-1]} shorter than receptive field {receptive_field(K, dilation)}"
        )
    if K == 1:
        cols = xp
        y = np.matmul(weight[:, :, 0], xp)
    else:
        cols = _im2col(xp, K, dilation, n_out)
        y = np.matmul(weight.reshape(O, C * K), cols)
    if bias is not None:
        y += np.asarray(bias)[None, :, None]
    if squeeze:
        y = y[0]
    return (y, cols) if return_cols else y


def conv1d_backward(grad_out, x, weight, dilation: int = 1, padding: str = "same", cols=None):
    """Gradients ``(grad_x, grad_w, grad_b)`` of :func:`conv1d_forward`."""
    x, squeeze = _as_batch(x)
    g, _ = _as_batch(grad_out)
    weight = np.asarray(weight)
    O, C, K = weight.shape
    left, right = conv_padding(K, dilation, padding)
    n_out = x.shape[-1] + left + right - (K - 1) * dilation
    if g.shape != (x.shape[0], O, n_out):
        raise ValueError(f"grad_out shape {g.shape} != expected {(x.shape[0], O, n_out)}")
    if cols is None:
        xp = np.pad(x, ((0, 0), (0, 0), (left, right))) if left or right else x
        cols = xp if K == 1 else _im2col(xp, K, dilation, n_out)
    grad_b = g.sum(axis=(0, 2))
    grad_w = np.matmul(g, cols.transpose(0, 2, 1)).sum(axis=0).reshape(O, C, K)
    gcols = np.matmul(weight.reshape(O, C * K).T, g)
    if K == 1:
        gxp = gcols
    else:
        gcols = gcols.reshape(x.shape[0], C, K, n_out)
        gxp = np.zeros((x.shape[0], C, x.shape[-1] + left + right), dtype=g.dtype)
        for j in range(K):
            gxp[:, :, j * dilation : j * dilation + n_out] += gcols[:, :, j, :]
    grad_x = gxp[:, :, left : left + x.shape[-1]]
    if squeeze:
        grad_x = grad_x[0]
    return grad_x, grad_w, grad_b


sigmoid = expit


def gated_unit(x_f, x_g):
    """WaveNet gate ``tanh(x_f) * sigmoid(x_g)``."""
    x_f = np.asarray(x_f)
    x_g = np.asarray(x_g)
    if x_f.shape != x_g.shape:
        raise ValueError(f"filter/gate shape mismatch: {x_f.shape} vs {x_g.shape}")
    return np.tanh(x_f) * sigmoid(x_g)


def gated_unit_backward(grad_out, x_f, x_g, cache=None):
    """``cache`` may hold ``(tanh(x_f), sigmoid(x_g))`` from the forward pass."""
    t, s = cache if cache is not None else (np.tanh(x_f), sigmoid(x_g))
    return grad_out * (1 - t * t) * s, grad_out * t * s * (1 - s)


def avg_pool(x, factor: int):
    B, C, N = x.shape
    if N % factor:
        raise ValueError(f"length {N} not divisible by pooling factor {factor}")
    return x.reshape(B, C, N // factor, factor).mean(axis=-1)


def avg_pool_backward(grad_out, factor: int):
    return np.repeat(grad_out, factor, axis=-1) / factor


def upsample_nearest(x, factor: int):
    return np.repeat(x, factor, axis=-1)


def upsample_nearest_backward(grad_out, factor: int):
    B, C, N = grad_out.shape
    return grad_out.reshape(B, C, N // factor, factor).sum(axis=-1)


def mse_loss(pred, target):
    """Mean of squared differences and its gradient with respect to ``pred``."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size

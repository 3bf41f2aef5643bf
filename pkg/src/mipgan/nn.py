"""Numpy channel-last (NHWC) neural-net primitives with explicit backward passes.

Convolution and its transpose share one im2col/col2im pair: the transposed
convolution forward is exactly the conv input-gradient (col2im of x @ W) and
vice versa, so both directions are adjoint by construction. Channel-last
layout keeps the im2col gather and col2im scatter memcpy-friendly and lets
matmul results reshape into image tensors without transposing; col2im
scatters with one strided slice-add per kernel offset instead of add.at.
Convolution weights are (K, K, C_in, C_out); transposed weights (C_in, K, K, C_out).

All functions are pure: they never mutate inputs and return whatever state
they produce (e.g. batch-norm running statistics) explicitly.
"""

from __future__ import annotations

import numpy as np


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def same_pad_1d(size: int, kernel: int, stride: int) -> tuple[int, int]:
    """Padding (before, after) so the output length is ceil(size / stride)."""
    out = ceil_div(size, stride)
    total = max(0, (out - 1) * stride + kernel - size)
    return total // 2, total - total // 2


def _pad2d(x, pad_h, pad_w):
    if pad_h == (0, 0) and pad_w == (0, 0):
        return x
    return np.pad(x, ((0, 0), pad_h, pad_w, (0, 0)))


def _im2col(x_padded, kernel: int, stride: int, out_h: int, out_w: int):
    """Gather all kernel windows into a contiguous (N*OH*OW, K*K*C) matrix."""
    n, _, _, c = x_padded.shape
    sn, sh, sw, sc = x_padded.strides
    win = np.lib.stride_tricks.as_strided(
        x_padded,
        shape=(n, out_h, out_w, kernel, kernel, c),
        strides=(sn, stride * sh, stride * sw, sh, sw, sc),
        writeable=False,
    )
    return np.ascontiguousarray(win).reshape(n * out_h * out_w, kernel * kernel * c)


def _col2im(cols, out_shape, kernel: int, stride: int, out_h: int, out_w: int):
    """Adjoint of _im2col: scatter-add a (N*OH*OW, K*K*C) matrix to (N, H, W, C)."""
    n, c = out_shape[0], out_shape[3]
    cols = cols.reshape(n, out_h, out_w, kernel, kernel, c)
    out = np.zeros(out_shape, dtype=cols.dtype)
    for i in range(kernel):
        row_end = i + stride * (out_h - 1) + 1
        for j in range(kernel):
            col_end = j + stride * (out_w - 1) + 1
            out[:, i:row_end:stride, j:col_end:stride, :] += cols[:, :, :, i, j, :]
    return out


# ---------------------------------------------------------------------------
# Convolution (weights (K, K, C_in, C_out)). The im2col matrix built in the
# forward pass is cached and reused by the backward pass, so the gather
# happens once per layer and step.


def conv2d_forward(x, weight, bias, stride: int, pad_h, pad_w):
    kernel, _, in_c, out_c = weight.shape
    xp = _pad2d(x, pad_h, pad_w)
    out_h = (xp.shape[1] - kernel) // stride + 1
    out_w = (xp.shape[2] - kernel) // stride + 1
    cols = _im2col(xp, kernel, stride, out_h, out_w)
    y = (cols @ weight.reshape(-1, out_c)).reshape(x.shape[0], out_h, out_w, out_c)
    y += bias
    cache = (cols, xp.shape, x.shape, pad_h, pad_w, stride, kernel, out_h, out_w)
    return y, cache


def conv2d_backward(dy, weight, cache, need_dx: bool = True):
    cols, xp_shape, x_shape, pad_h, pad_w, stride, kernel, out_h, out_w = cache
    out_c = weight.shape[3]
    dy_mat = dy.reshape(-1, out_c)
    d_bias = dy_mat.sum(axis=0)
    d_weight = (cols.T @ dy_mat).reshape(weight.shape)
    if not need_dx:
        return None, d_weight, d_bias
    dcols = dy_mat @ weight.reshape(-1, out_c).T
    dxp = _col2im(dcols, xp_shape, kernel, stride, out_h, out_w)
    dx = dxp[
        :,
        pad_h[0] : pad_h[0] + x_shape[1],
        pad_w[0] : pad_w[0] + x_shape[2],
        :,
    ]
    return np.ascontiguousarray(dx), d_weight, d_bias


# ---------------------------------------------------------------------------
# Transposed convolution (weights (C_in, K, K, C_out)); output size
# (H-1)*stride - pad_total + kernel per axis. Forward is col2im of x @ W,
# the exact adjoint of the convolution above.


def conv_transpose2d_forward(x, weight, bias, stride: int, pad_h, pad_w):
    n, h, w, in_c = x.shape
    _, kernel, _, out_c = weight.shape
    full_h = (h - 1) * stride + kernel
    full_w = (w - 1) * stride + kernel
    x_mat = x.reshape(-1, in_c)
    cols = x_mat @ weight.reshape(in_c, -1)
    yp = _col2im(cols, (n, full_h, full_w, out_c), kernel, stride, h, w)
    y = yp[
        :,
        pad_h[0] : full_h - pad_h[1],
        pad_w[0] : full_w - pad_w[1],
        :,
    ]
    y = np.ascontiguousarray(y)
    y += bias
    cache = (x_mat, x.shape, pad_h, pad_w, stride, kernel)
    return y, cache


def conv_transpose2d_backward(dy, weight, cache):
    x_mat, x_shape, pad_h, pad_w, stride, kernel = cache
    n, h, w, in_c = x_shape
    dyp = _pad2d(dy, pad_h, pad_w)
    dcols = _im2col(dyp, kernel, stride, h, w)  # (N*H*W, K*K*O)
    d_bias = dy.sum(axis=(0, 1, 2))
    d_weight = (x_mat.T @ dcols).reshape(weight.shape)
    dx = (dcols @ weight.reshape(in_c, -1).T).reshape(n, h, w, in_c)
    return dx, d_weight, d_bias


# ---------------------------------------------------------------------------
# Dense (weights (in, out))


def dense_forward(x, weight, bias):
    return x @ weight + bias, x


def dense_backward(dy, weight, cache):
    x = cache
    return dy @ weight.T, x.T @ dy, dy.sum(axis=0)


# ---------------------------------------------------------------------------
# Batch normalization over (N, H, W) per trailing channel. Running statistics
# follow new = momentum * old + (1 - momentum) * batch, with biased variance.


def batchnorm_forward(x, gamma, beta, running_mean, running_var, momentum, eps, train):
    axes = (0, 1, 2)
    if train:
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        new_mean = momentum * running_mean + (1.0 - momentum) * mean
        new_var = momentum * running_var + (1.0 - momentum) * var
    else:
        mean, var = running_mean, running_var
        new_mean, new_var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x - mean) * inv_std
    y = gamma * x_hat + beta
    cache = (x_hat, inv_std, gamma, train)
    return y, (new_mean, new_var), cache


def batchnorm_backward(dy, cache):
    x_hat, inv_std, gamma, train = cache
    d_gamma = (dy * x_hat).sum(axis=(0, 1, 2))
    d_beta = dy.sum(axis=(0, 1, 2))
    if not train:
        dx = dy * (gamma * inv_std)
        return dx, d_gamma, d_beta
    dx_hat = dy * gamma
    dx = (
        dx_hat
        - dx_hat.mean(axis=(0, 1, 2))
        - x_hat * (dx_hat * x_hat).mean(axis=(0, 1, 2))
    ) * inv_std
    return dx, d_gamma, d_beta


# ---------------------------------------------------------------------------
# Activations


def relu_forward(x):
    y = np.maximum(x, 0)
    return y, x


def relu_backward(dy, cache):
    return dy * (cache > 0)


def leaky_relu_forward(x, slope):
    factor = np.where(x > 0, x.dtype.type(1), x.dtype.type(slope))
    return x * factor, factor


def leaky_relu_backward(dy, cache):
    return dy * cache


def tanh_forward(x):
    y = np.tanh(x)
    return y, y


def tanh_backward(dy, cache):
    return dy * (1.0 - cache * cache)


def sigmoid_forward(x):
    y = np.empty_like(x)
    pos = x >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    y[~pos] = ex / (1.0 + ex)
    return y, y


def sigmoid_backward(dy, cache):
    return dy * cache * (1.0 - cache)


def dropout_forward(x, rate, rng, train):
    """Inverted dropout; identity in eval mode or when the rate is zero."""
    if not train or rate <= 0.0:
        return x, None
    draw_dtype = x.dtype if x.dtype in (np.float32, np.float64) else np.float64
    keep = (rng.random(x.shape, dtype=draw_dtype) >= rate).astype(x.dtype)
    keep *= np.asarray(1.0 / (1.0 - rate), dtype=x.dtype)
    return x * keep, keep


def dropout_backward(dy, cache):
    if cache is None:
        return dy
    return dy * cache


# ---------------------------------------------------------------------------
# Embedding lookup (table (num_classes, dim))


def embedding_forward(ids, table):
    return table[ids], (ids, table.shape)


def embedding_backward(dy, cache):
    ids, shape = cache
    d_table = np.zeros(shape, dtype=dy.dtype)
    np.add.at(d_table, ids, dy)
    return d_table

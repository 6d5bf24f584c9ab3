"""
layers.py:

Forward and backward passes of the network building blocks on (B, C, H, W) float64 arrays. Every forward function
returns its output and a cache; the matching backward function takes the upstream gradient and the cache and returns
the gradients of the inputs and parameters.

Convolutions gather sliding windows and contract them with the kernel through einsum.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BATCH_NORM_EPSILON = 1e-5


def _windows(x, kernel):
    """(B, C, H, W) -> (B, C, H', W', kh, kw) view of all kernel-sized windows"""
    return sliding_window_view(x, kernel, axis=(2, 3))


def conv2d_forward(x, weight, bias=None):
    """
    Stride 1 convolution with "same" zero padding for odd square kernels.

    :param x: input (B, C, H, W)
    :param weight: kernel (O, C, k, k)
    :param bias: optional bias (O,)
    :return: output (B, O, H, W) and cache
    """
    pad = weight.shape[-1] // 2
    padded = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    windows = _windows(padded, weight.shape[-2:])
    out = np.einsum("bchwij,ocij->bohw", windows, weight, optimize=True)
    if bias is not None:
        out = out + bias[None, :, None, None]
    return out, (windows, weight, pad, bias is not None)


def conv2d_backward(dout, cache):
    """
    :return: dx, dweight, dbias (None when the convolution has no bias)
    """
    windows, weight, pad, has_bias = cache
    dweight = np.einsum("bchwij,bohw->ocij", windows, dout, optimize=True)
    dbias = dout.sum(axis=(0, 2, 3)) if has_bias else None
    # Gradient of a same-padded correlation: full correlation of dout with the flipped kernel
    kernel = weight.shape[-1]
    back_pad = kernel - 1 - pad
    padded = np.pad(dout, ((0, 0), (0, 0), (back_pad, back_pad), (back_pad, back_pad))) if back_pad else dout
    dx = np.einsum("bohwij,ocij->bchw", _windows(padded, weight.shape[-2:]), weight[:, :, ::-1, ::-1], optimize=True)
    return dx, dweight, dbias


def batch_norm_forward(x, gamma, beta, mean=None, var=None):
    """
    Per-channel normalization. Batch statistics are used unless mean and var are supplied.

    :return: output, cache and the (mean, var) statistics used
    """
    if mean is None:
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
    inv_std = 1.0 / np.sqrt(var + BATCH_NORM_EPSILON)
    normalized = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
    out = gamma[None, :, None, None] * normalized + beta[None, :, None, None]
    return out, (normalized, gamma, inv_std), (mean, var)


def batch_norm_backward(dout, cache):
    """Backward pass through batch statistics. :return: dx, dgamma, dbeta"""
    normalized, gamma, inv_std = cache
    count = dout.shape[0] * dout.shape[2] * dout.shape[3]
    dbeta = dout.sum(axis=(0, 2, 3))
    dgamma = (dout * normalized).sum(axis=(0, 2, 3))
    dnormalized = dout * gamma[None, :, None, None]
    dx = (
        inv_std[None, :, None, None]
        / count
        * (
            count * dnormalized
            - dnormalized.sum(axis=(0, 2, 3))[None, :, None, None]
            - normalized * (dnormalized * normalized).sum(axis=(0, 2, 3))[None, :, None, None]
        )
    )
    return dx, dgamma, dbeta


def relu_forward(x):
    return np.maximum(x, 0.0), x > 0


def relu_backward(dout, cache):
    return dout * cache


def max_pool_forward(x):
    """
    2x2 stride 2 max pooling. The gradient is routed to the first maximum of each window.
    """
    batch, channels, height, width = x.shape
    blocks = x.reshape(batch, channels, height // 2, 2, width // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    blocks = blocks.reshape(batch, channels, height // 2, width // 2, 4)
    winners = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, winners[..., None], axis=-1)[..., 0]
    return out, (winners, x.shape)


def max_pool_backward(dout, cache):
    winners, shape = cache
    batch, channels, height, width = shape
    routed = np.zeros(dout.shape + (4,))
    np.put_along_axis(routed, winners[..., None], dout[..., None], axis=-1)
    routed = routed.reshape(batch, channels, height // 2, width // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return routed.reshape(shape)


def conv_transpose_forward(x, weight, bias):
    """
    2x2 stride 2 transposed convolution.

    :param x: input (B, C, H, W)
    :param weight: kernel (C, O, 2, 2)
    :param bias: bias (O,)
    :return: output (B, O, 2H, 2W) and cache
    """
    batch, _, height, width = x.shape
    out = np.einsum("bchw,coij->bohiwj", x, weight, optimize=True)
    out = out.reshape(batch, weight.shape[1], 2 * height, 2 * width) + bias[None, :, None, None]
    return out, (x, weight)


def conv_transpose_backward(dout, cache):
    """:return: dx, dweight, dbias"""
    x, weight = cache
    batch, _, height, width = x.shape
    blocks = dout.reshape(batch, weight.shape[1], height, 2, width, 2)
    dx = np.einsum("bohiwj,coij->bchw", blocks, weight, optimize=True)
    dweight = np.einsum("bchw,bohiwj->coij", x, blocks, optimize=True)
    return dx, dweight, dout.sum(axis=(0, 2, 3))


def log_softmax(logits, axis=1):
    shifted = logits - logits.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def softmax(logits, axis=1):
    return np.exp(log_softmax(logits, axis=axis))

# Licensed under the MIT License

"""Numeric core: seeded initialization and the convolution, activation,
pooling and resizing primitives used by the decomposer and the consistency
module.

Real tensors are ``float64`` arrays and complex tensors are ``complex128``
arrays (interleaved real/imaginary pairs in memory). Feature maps use the
``[T, C, H, W]`` layout. All functions are pure and return new arrays.
"""

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import ndimage, special

from .errors import ShapeError, ValidationError, shape_mismatch

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1

Scheme = Literal["uniform-scaled", "zeros", "ones"]


@dataclass(frozen=True)
class InitSpec:
    """Recipe for a deterministic initial tensor.

    Attributes
    ----------
    seed : int
        64-bit unsigned seed of the SplitMix64 stream.
    scheme : str
        One of ``"uniform-scaled"``, ``"zeros"`` or ``"ones"``.
    scale : float
        Half-width of the uniform interval ``[-scale, +scale]``.
    """

    seed: int
    scheme: Scheme = "uniform-scaled"
    scale: float = 1.0


def splitmix64(seed: int, n: int) -> np.ndarray:
    """Return the first ``n`` outputs of a SplitMix64 stream as ``uint64``."""
    if n < 0:
        raise ValidationError(f"cannot draw {n} values")
    state = np.uint64(seed & _MASK64)
    with np.errstate(over="ignore"):
        z = state + np.arange(1, n + 1, dtype=np.uint64) * _GAMMA
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        z = z ^ (z >> np.uint64(31))
    return z


def uniform(seed: int, n: int) -> np.ndarray:
    """Return ``n`` floats in ``[0, 1)`` drawn as ``(value >> 11) * 2**-53``."""
    bits = splitmix64(seed, n) >> np.uint64(11)
    return bits.astype(np.float64) * 2.0**-53


def init_tensor(spec: InitSpec, shape) -> np.ndarray:
    """Create a tensor of the given shape from an :class:`InitSpec`.

    Identical (seed, scheme, scale, shape) give bit-identical tensors on
    every platform.
    """
    shape = tuple(int(s) for s in shape)
    if spec.scheme == "zeros":
        return np.zeros(shape)
    if spec.scheme == "ones":
        return np.ones(shape)
    if spec.scheme != "uniform-scaled":
        raise ValidationError(f"unknown init scheme {spec.scheme!r}")
    u = uniform(spec.seed, int(np.prod(shape, dtype=np.int64)))
    return ((2.0 * u - 1.0) * spec.scale).reshape(shape)


def _require_rank(x: np.ndarray, rank: int, name: str):
    if x.ndim != rank:
        raise ShapeError(f"{name} must have rank {rank}, got shape {x.shape}")


def _require_odd(kernel_shape, name: str):
    if any(k % 2 == 0 for k in kernel_shape):
        raise ValidationError(f"{name} kernel extents must be odd, got {tuple(kernel_shape)}")


def depthwise_conv2d(x: np.ndarray, kernels: np.ndarray) -> np.ndarray:
    """Convolve every channel of ``x[T, C, H, W]`` with its own kernel.

    Parameters
    ----------
    x : np.ndarray
        Input features ``[T, C, H, W]``.
    kernels : np.ndarray
        One ``[kh, kw]`` kernel per channel, ``[C, kh, kw]``; extents odd.

    Returns
    -------
    np.ndarray
        Zero same-padded cross-correlation, same shape as ``x``.
    """
    _require_rank(x, 4, "depthwise_conv2d input")
    _require_rank(kernels, 3, "depthwise_conv2d kernels")
    if x.shape[1] != kernels.shape[0]:
        raise shape_mismatch("depthwise_conv2d channels", x.shape, kernels.shape)
    _require_odd(kernels.shape[1:], "depthwise_conv2d")
    out = np.empty(x.shape)
    for c in range(x.shape[1]):
        out[:, c] = ndimage.correlate(
            x[:, c], kernels[c][np.newaxis], mode="constant", cval=0.0
        )
    return out


def grouped_pointwise_conv(x: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Grouped 1x1 convolution.

    Channels are split into ``G`` contiguous groups and each group is mixed
    by its own ``[C/G, C/G]`` matrix (``out = W @ in``) at every pixel.
    """
    _require_rank(x, 4, "grouped_pointwise_conv input")
    _require_rank(weights, 3, "grouped_pointwise_conv weights")
    t, c, h, w = x.shape
    g, n_out, n_in = weights.shape
    if c % g != 0:
        raise ValidationError(f"{c} channels are not divisible into {g} groups")
    if n_out != c // g or n_in != c // g:
        raise shape_mismatch("grouped_pointwise_conv weights", weights.shape, (g, c // g, c // g))
    grouped = x.reshape(t, g, c // g, h, w)
    out = np.einsum("gij,tgjhw->tgihw", weights, grouped)
    return out.reshape(t, c, h, w)


def pointwise_conv(x: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Full 1x1 convolution mapping ``C_in`` to ``C_out`` channels, ``weights[C_out, C_in]``."""
    _require_rank(x, 4, "pointwise_conv input")
    _require_rank(weights, 2, "pointwise_conv weights")
    if weights.shape[1] != x.shape[1]:
        raise shape_mismatch("pointwise_conv channels", x.shape, weights.shape)
    return np.einsum("oi,tihw->tohw", weights, x)


def conv3d_residual(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Depthwise 3D convolution over ``(T, H, W)`` plus identity.

    The real kernel ``[C, kt, kh, kw]`` is applied to the real and the
    imaginary plane independently, so the map is complex-linear with real
    coefficients. Returns ``conv(x) + x``.
    """
    _require_rank(x, 4, "conv3d_residual input")
    _require_rank(kernel, 4, "conv3d_residual kernel")
    if x.shape[1] != kernel.shape[0]:
        raise shape_mismatch("conv3d_residual channels", x.shape, kernel.shape)
    _require_odd(kernel.shape[1:], "conv3d_residual")
    x = np.asarray(x, dtype=np.complex128)
    out = np.empty(x.shape, dtype=np.complex128)
    for c in range(x.shape[1]):
        re = ndimage.correlate(x[:, c].real, kernel[c], mode="constant", cval=0.0)
        im = ndimage.correlate(x[:, c].imag, kernel[c], mode="constant", cval=0.0)
        out[:, c] = (re + x[:, c].real) + 1j * (im + x[:, c].imag)
    return out


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax along ``axis`` (max subtraction)."""
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(x - np.max(x, axis=axis, keepdims=True))
    return z / np.sum(z, axis=axis, keepdims=True)


def sigmoid_gate(x: np.ndarray) -> np.ndarray:
    """Element-wise logistic function."""
    return special.expit(np.asarray(x, dtype=np.float64))


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def mlp2(x: np.ndarray, w1: np.ndarray, w2: np.ndarray) -> np.ndarray:
    """Bias-free two-layer perceptron ``relu(x @ w1) @ w2`` on row vectors."""
    if x.shape[-1] != w1.shape[0] or w1.shape[1] != w2.shape[0]:
        raise shape_mismatch("mlp layers", (x.shape[-1],) + w1.shape, w2.shape)
    return relu(x @ w1) @ w2


def to_tokens(x: np.ndarray) -> np.ndarray:
    """Flatten one frame ``[C, H, W]`` into token rows ``[H*W, C]``."""
    c, h, w = x.shape
    return x.reshape(c, h * w).T


def global_avg_pool(x: np.ndarray) -> np.ndarray:
    """Mean over the spatial axes of ``x[T, C, H, W]``, giving ``[T, C]``.

    Pixels are summed in row-major order (numpy pairwise summation over the
    flattened ``H*W`` axis), which is fixed for a given shape.
    """
    _require_rank(x, 4, "global_avg_pool input")
    t, c, h, w = x.shape
    if h * w < 1:
        raise ShapeError(f"global_avg_pool needs a non-empty spatial extent, got {x.shape}")
    return np.sum(x.reshape(t, c, h * w), axis=-1) / float(h * w)


def _resize_axis(n_in: int, n_out: int):
    scale = n_in / n_out
    src = (np.arange(n_out) + 0.5) * scale - 0.5
    src = np.maximum(src, 0.0)
    i0 = np.minimum(np.floor(src).astype(np.int64), n_in - 1)
    i1 = np.minimum(i0 + 1, n_in - 1)
    lam = src - i0
    return i0, i1, lam


def bilinear_resize(x: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize of ``x[T, C, H, W]`` on the half-pixel grid.

    Source coordinates are ``(dst + 0.5) * in / out - 0.5``, clamped at the
    borders (align-corners-false convention). Equal sizes return an exact
    copy.
    """
    _require_rank(x, 4, "bilinear_resize input")
    if out_h < 1 or out_w < 1:
        raise ValidationError(f"output size must be positive, got {out_h}x{out_w}")
    _, _, h, w = x.shape
    if (h, w) == (out_h, out_w):
        return np.array(x, dtype=np.float64, copy=True)
    r0, r1, ry = _resize_axis(h, out_h)
    c0, c1, cx = _resize_axis(w, out_w)
    rows = x[:, :, r0, :] * (1.0 - ry)[:, None] + x[:, :, r1, :] * ry[:, None]
    return rows[:, :, :, c0] * (1.0 - cx) + rows[:, :, :, c1] * cx

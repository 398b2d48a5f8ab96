"""Differentiable operations.

Only what the networks need. Elementwise binary ops require equal shapes or a
Python/0-d scalar operand; the broadcasting cases (bias add, per-channel
scaling, pairwise score sums) are dedicated ops.
"""
from __future__ import annotations

import numbers

import numpy as np

from .. import _kernels
from .tensor import Tensor, as_tensor


class DimensionError(ValueError):
    """Operand shapes do not fit the operation."""


def _is_scalar(x) -> bool:
    return isinstance(x, numbers.Number) or (isinstance(x, np.ndarray) and x.ndim == 0)


def _const(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.dtype))


def _check_same(a: Tensor, b: Tensor, name: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{name}: shapes {a.shape} and {b.shape} differ")


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b) -> Tensor:
    if _is_scalar(b):
        a = as_tensor(a)
        return Tensor._make(a.data + b, (a,), lambda g: (g,), "add_scalar")
    if _is_scalar(a):
        return add(b, a)
    a, b = as_tensor(a), _const(b, as_tensor(a))
    _check_same(a, b, "add")
    return Tensor._make(a.data + b.data, (a, b), lambda g: (g, g), "add")


def neg(a: Tensor) -> Tensor:
    return Tensor._make(-a.data, (a,), lambda g: (-g,), "neg")


def sub(a, b) -> Tensor:
    if _is_scalar(b):
        return add(a, -b)
    return add(a, neg(as_tensor(b)))


def mul(a, b) -> Tensor:
    if _is_scalar(b):
        a = as_tensor(a)
        s = b
        return Tensor._make(a.data * s, (a,), lambda g: (g * s,), "mul_scalar")
    if _is_scalar(a):
        return mul(b, a)
    a, b = as_tensor(a), _const(b, as_tensor(a))
    _check_same(a, b, "mul")
    ad, bd = a.data, b.data
    return Tensor._make(ad * bd, (a, b), lambda g: (g * bd, g * ad), "mul")


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    return Tensor._make(y, (a,), lambda g: (g * y,), "exp")


def log(a: Tensor) -> Tensor:
    x = a.data
    return Tensor._make(np.log(x), (a,), lambda g: (g / x,), "log")


def abs(a: Tensor) -> Tensor:  # noqa: A001 - mirrors numpy naming
    x = a.data
    return Tensor._make(np.abs(x), (a,), lambda g: (g * np.sign(x),), "abs")


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clip to ``[lo, hi]``; gradient is zero where clipping is active."""
    x = a.data
    inside = (x >= lo) & (x <= hi)
    return Tensor._make(np.clip(x, lo, hi), (a,), lambda g: (g * inside,), "clamp")


# ---------------------------------------------------------------------------
# reductions and shape ops


def sum(a: Tensor, axis=None, keepdims=False) -> Tensor:  # noqa: A001
    shape = a.shape

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape),)

    return Tensor._make(np.sum(a.data, axis=axis, keepdims=keepdims), (a,), bw, "sum")


def mean(a: Tensor, axis=None, keepdims=False) -> Tensor:
    if axis is None:
        count = a.size
    else:
        axes = (axis,) if isinstance(axis, int) else axis
        count = int(np.prod([a.shape[i] for i in axes]))
    return mul(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def reshape(a: Tensor, shape) -> Tensor:
    old = a.shape
    return Tensor._make(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),), "reshape")


def transpose(a: Tensor, axes=None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inv = tuple(np.argsort(axes))
    return Tensor._make(a.data.transpose(axes), (a,), lambda g: (g.transpose(inv),), "transpose")


def getitem(a: Tensor, idx) -> Tensor:
    shape, dtype = a.shape, a.dtype

    def bw(g):
        out = np.zeros(shape, dtype=dtype)
        np.add.at(out, idx, g)
        return (out,)

    return Tensor._make(a.data[idx], (a,), bw, "getitem")


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor._make(np.concatenate([t.data for t in tensors], axis=axis), tensors, bw, "concat")


# ---------------------------------------------------------------------------
# linear algebra


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes; leading axes broadcast."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError("matmul operands must be at least 2-D")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: inner extents {a.shape} @ {b.shape} differ")
    ad, bd = a.data, b.data

    def bw(g):
        ga = _unbroadcast(g @ np.swapaxes(bd, -1, -2), ad.shape)
        gb = _unbroadcast(np.swapaxes(ad, -1, -2) @ g, bd.shape)
        return ga, gb

    return Tensor._make(ad @ bd, (a, b), bw, "matmul")


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map along the last axis: ``x @ weight.T + bias``."""
    x = as_tensor(x)
    if x.shape[-1] != weight.shape[1]:
        raise DimensionError(f"linear: input width {x.shape[-1]} != weight d_in {weight.shape[1]}")
    xd, wd = x.data, weight.data
    y = xd @ wd.T
    parents = [x, weight]
    if bias is not None:
        if bias.shape != (wd.shape[0],):
            raise DimensionError(f"linear: bias shape {bias.shape} != ({wd.shape[0]},)")
        y = y + bias.data
        parents.append(bias)
    lead = int(np.prod(xd.shape[:-1]))

    def bw(g):
        g2 = g.reshape(lead, -1)
        out = [g @ wd if x.requires_grad else None, g2.T @ xd.reshape(lead, -1) if weight.requires_grad else None]
        if bias is not None:
            out.append(g2.sum(axis=0))
        return out

    return Tensor._make(y, parents, bw, "linear")


def outer_sum(a: Tensor, b: Tensor) -> Tensor:
    """``out[..., p, q] = a[..., p] + b[..., q]``."""
    if a.shape[:-1] != b.shape[:-1]:
        raise DimensionError(f"outer_sum: leading shapes {a.shape} vs {b.shape}")
    y = a.data[..., :, None] + b.data[..., None, :]
    return Tensor._make(y, (a, b), lambda g: (g.sum(axis=-1), g.sum(axis=-2)), "outer_sum")


def channel_scale(x: Tensor, s: Tensor) -> Tensor:
    """Scale ``x[n, c, :, :]`` by ``s[n, c]``."""
    if x.shape[:2] != s.shape:
        raise DimensionError(f"channel_scale: {x.shape} vs scales {s.shape}")
    xd, sd = x.data, s.data

    def bw(g):
        return g * sd[:, :, None, None], (g * xd).sum(axis=(2, 3))

    return Tensor._make(xd * sd[:, :, None, None], (x, s), bw, "channel_scale")


# ---------------------------------------------------------------------------
# convolution and pooling (NCHW; a 3-D input is treated as a batch of one)


def _batched(x: Tensor):
    if x.ndim == 3:
        return reshape(x, (1,) + x.shape), True
    if x.ndim != 4:
        raise DimensionError(f"expected (C,H,W) or (N,C,H,W), got {x.shape}")
    return x, False


def _unbatch(y: Tensor, squeeze: bool) -> Tensor:
    return reshape(y, y.shape[1:]) if squeeze else y


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation with square kernels, ``kernel`` shaped (C_out, C_in, k, k)."""
    x, squeeze = _batched(as_tensor(x))
    n, c, h, w = x.shape
    co, ci, k, k2 = kernel.shape
    if k != k2:
        raise DimensionError("conv2d: kernel must be square")
    if ci != c:
        raise DimensionError(f"conv2d: input has {c} channels, kernel expects {ci}")
    if stride < 1 or padding < 0:
        raise ValueError("conv2d: stride must be >= 1 and padding >= 0")
    if h + 2 * padding < k or w + 2 * padding < k:
        raise DimensionError(f"conv2d: padded input {(h, w)} smaller than kernel {k}")
    ho = (h + 2 * padding - k) // stride + 1
    wo = (w + 2 * padding - k) // stride + 1
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    hp, wp = xp.shape[2], xp.shape[3]
    cols = _kernels.im2col(np.ascontiguousarray(xp), k, stride, ho, wo).reshape(c * k * k, n * ho * wo)
    wmat = kernel.data.reshape(co, -1)
    y = wmat @ cols
    if bias is not None:
        y += bias.data[:, None]
    y = np.ascontiguousarray(y.reshape(co, n, ho, wo).transpose(1, 0, 2, 3))
    parents = [x, kernel] + ([bias] if bias is not None else [])

    def bw(g):
        g2 = g.transpose(1, 0, 2, 3).reshape(co, n * ho * wo)
        gw = (g2 @ cols.T).reshape(kernel.shape) if kernel.requires_grad else None
        gx = None
        if x.requires_grad:
            gcols = (wmat.T @ g2).reshape(c, k, k, n, ho, wo)
            gxp = _kernels.col2im(gcols, hp, wp, stride)
            gx = gxp[:, :, padding : padding + h, padding : padding + w] if padding else gxp
        out = [gx, gw]
        if bias is not None:
            out.append(g2.sum(axis=1))
        return out

    return _unbatch(Tensor._make(y, parents, bw, "conv2d"), squeeze)


def conv_transpose2d(x: Tensor, kernel: Tensor, bias: Tensor | None = None, stride: int = 2) -> Tensor:
    """Transposed convolution producing exactly ``stride`` times the input size.

    ``kernel`` is shaped (C_in, C_out, k, k) with ``k - stride`` even; padding
    ``(k - stride) // 2`` makes the output ``(H * stride, W * stride)``. With
    matching stride/padding this is the adjoint of :func:`conv2d`.
    """
    if stride < 1:
        raise ValueError(f"conv_transpose2d: stride must be positive, got {stride}")
    x, squeeze = _batched(as_tensor(x))
    n, c, h, w = x.shape
    ci, co, k, _ = kernel.shape
    if ci != c:
        raise DimensionError(f"conv_transpose2d: input has {c} channels, kernel expects {ci}")
    if k < stride or (k - stride) % 2:
        raise ValueError(f"conv_transpose2d: kernel {k} incompatible with stride {stride}")
    pad = (k - stride) // 2
    hp, wp = (h - 1) * stride + k, (w - 1) * stride + k
    ho, wo = h * stride, w * stride
    xm = x.data.transpose(1, 0, 2, 3).reshape(c, n * h * w)
    wmat = kernel.data.reshape(c, co * k * k)
    cols = (wmat.T @ xm).reshape(co, k, k, n, h, w)
    full = _kernels.col2im(cols, hp, wp, stride)
    y = full[:, :, pad : pad + ho, pad : pad + wo]
    if bias is not None:
        y = y + bias.data[None, :, None, None]
    y = np.ascontiguousarray(y)
    parents = [x, kernel] + ([bias] if bias is not None else [])

    def bw(g):
        gp = np.pad(g, ((0, 0), (0, 0), (pad, hp - ho - pad), (pad, wp - wo - pad)))
        gcols = _kernels.im2col(np.ascontiguousarray(gp), k, stride, h, w).reshape(co * k * k, n * h * w)
        gx = (wmat @ gcols).reshape(c, n, h, w).transpose(1, 0, 2, 3) if x.requires_grad else None
        gw = (xm @ gcols.T).reshape(kernel.shape) if kernel.requires_grad else None
        out = [gx, gw]
        if bias is not None:
            out.append(g.sum(axis=(0, 2, 3)))
        return out

    return _unbatch(Tensor._make(y, parents, bw, "conv_transpose2d"), squeeze)


def maxpool2d(x: Tensor, window: int = 2) -> Tensor:
    x, squeeze = _batched(as_tensor(x))
    n, c, h, w = x.shape
    if h % window or w % window:
        raise DimensionError(f"maxpool2d: extent {(h, w)} not divisible by window {window}")
    y, idx = _kernels.maxpool_forward(np.ascontiguousarray(x.data), window)

    def bw(g):
        return (_kernels.maxpool_backward(np.ascontiguousarray(g), idx, window),)

    return _unbatch(Tensor._make(y, (x,), bw, "maxpool2d"), squeeze)


def global_avg_pool(x: Tensor) -> Tensor:
    """Spatial mean per channel: (N,C,H,W) -> (N,C), (C,H,W) -> (C,)."""
    if x.ndim not in (3, 4):
        raise DimensionError(f"global_avg_pool expects 3-D or 4-D input, got {x.shape}")
    return mean(x, axis=(-2, -1))


# ---------------------------------------------------------------------------
# activations


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return Tensor._make(x.data * mask, (x,), lambda g: (g * mask,), "relu")


def leaky_relu(x: Tensor, alpha: float = 0.2) -> Tensor:
    if not 0 < alpha < 1:
        raise ValueError(f"leaky_relu: alpha must lie in (0, 1), got {alpha}")
    slope = np.where(x.data > 0, 1.0, alpha).astype(x.dtype)
    return Tensor._make(x.data * slope, (x,), lambda g: (g * slope,), "leaky_relu")


def _softplus(x: np.ndarray) -> np.ndarray:
    big = x > 20.0
    return np.where(big, x, np.log1p(np.exp(np.minimum(x, 20.0))))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softplus(x: Tensor) -> Tensor:
    xd = x.data
    return Tensor._make(_softplus(xd), (x,), lambda g: (g * _sigmoid(xd),), "softplus")


def mish(x: Tensor) -> Tensor:
    """``x * tanh(softplus(x))``."""
    xd = x.data
    t = np.tanh(_softplus(xd))

    def bw(g):
        return (g * (t + xd * (1.0 - t * t) * _sigmoid(xd)),)

    return Tensor._make(xd * t, (x,), bw, "mish")


def sigmoid(x: Tensor) -> Tensor:
    y = _sigmoid(x.data)
    return Tensor._make(y, (x,), lambda g: (g * y * (1.0 - y),), "sigmoid")


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return Tensor._make(y, (x,), lambda g: (g * (1.0 - y * y),), "tanh")


ACTIVATIONS = {
    "relu": relu,
    "leaky_relu": leaky_relu,
    "mish": mish,
    "sigmoid": sigmoid,
    "tanh": tanh,
}


def activation(x: Tensor, kind: str, alpha: float = 0.2) -> Tensor:
    if kind == "leaky_relu":
        return leaky_relu(x, alpha)
    try:
        return ACTIVATIONS[kind](x)
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    if x.shape[axis] < 1:
        raise DimensionError("softmax over an empty axis")
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return Tensor._make(y, (x,), bw, "softmax")


def cosine_similarity(a: Tensor, b: Tensor, axis: int = -1) -> Tensor:
    """Cosine of the angle along ``axis``; zero (with zero gradient) if a norm vanishes."""
    _check_same(a, b, "cosine_similarity")
    ad, bd = a.data, b.data
    na = np.sqrt((ad * ad).sum(axis=axis, keepdims=True))
    nb = np.sqrt((bd * bd).sum(axis=axis, keepdims=True))
    ok = (na > 0) & (nb > 0)
    na_s = np.where(ok, na, 1.0)
    nb_s = np.where(ok, nb, 1.0)
    dot = (ad * bd).sum(axis=axis, keepdims=True)
    cos = np.where(ok, dot / (na_s * nb_s), 0.0)

    def bw(g):
        gk = np.expand_dims(g, axis)
        ga = np.where(ok, gk * (bd / (na_s * nb_s) - cos * ad / (na_s * na_s)), 0.0)
        gb = np.where(ok, gk * (ad / (na_s * nb_s) - cos * bd / (nb_s * nb_s)), 0.0)
        return ga.astype(ad.dtype), gb.astype(bd.dtype)

    return Tensor._make(np.squeeze(cos, axis=axis).astype(ad.dtype), (a, b), bw, "cosine_similarity")

"""Differentiable tensor operations.

Broadcasting is deliberately narrow. Besides identical shapes, a binary
operation accepts exactly three patterns, and the result always has the shape
of the larger operand:

- a scalar (every dimension 1, or no dimensions),
- a trailing-shape operand broadcast along leading axes, e.g. ``(C,)`` onto
  ``(B, C)``,
- a same-rank operand with singleton axes, e.g. ``(B, C, 1, 1)`` onto
  ``(B, C, H, W)``.

Anything else raises ``ShapeError``.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from advstyle_lab.core.tensor import Tensor, record
from advstyle_lab.errors import DomainError, ShapeError

Operand = Union[Tensor, float, int, np.ndarray]
Axis = Union[None, int, Sequence[int]]


def as_tensor(value: Operand, like: Optional[Tensor] = None) -> Tensor:
    """Wrap a constant, matching the dtype of ``like`` when given."""
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else np.float64
    return Tensor(np.asarray(value, dtype=dtype))


def _expands(small: Tuple[int, ...], big: Tuple[int, ...]) -> bool:
    if math.prod(small) == 1 and len(small) <= len(big):
        return True
    if len(small) < len(big) and big[len(big) - len(small):] == small:
        return True
    if len(small) == len(big):
        return all(s == b or s == 1 for s, b in zip(small, big))
    return False


def _result_shape(op: str, a: Tuple[int, ...], b: Tuple[int, ...]) -> Tuple[int, ...]:
    if a == b:
        return a
    if _expands(b, a):
        return a
    if _expands(a, b):
        return b
    raise ShapeError(op, a, b, "unsupported broadcast")


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    lead = grad.ndim - len(shape)
    if lead > 0:
        grad = grad.sum(axis=tuple(range(lead)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _binary_operands(a: Operand, b: Operand) -> Tuple[Tensor, Tensor]:
    like = a if isinstance(a, Tensor) else b if isinstance(b, Tensor) else None
    return as_tensor(a, like), as_tensor(b, like)


def add(a: Operand, b: Operand) -> Tensor:
    a, b = _binary_operands(a, b)
    _result_shape("add", a.shape, b.shape)

    def rule(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return record("add", a.data + b.data, (a, b), rule)


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = _binary_operands(a, b)
    _result_shape("sub", a.shape, b.shape)

    def rule(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return record("sub", a.data - b.data, (a, b), rule)


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = _binary_operands(a, b)
    _result_shape("mul", a.shape, b.shape)

    def rule(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return record("mul", a.data * b.data, (a, b), rule)


def div(a: Operand, b: Operand) -> Tensor:
    a, b = _binary_operands(a, b)
    _result_shape("div", a.shape, b.shape)
    if np.any(b.data == 0):
        raise DomainError("div: division by exact zero")

    def rule(g):
        ga = _unbroadcast(g / b.data, a.shape)
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape)
        return ga, gb

    return record("div", a.data / b.data, (a, b), rule)


def neg(a: Tensor) -> Tensor:
    return record("neg", -a.data, (a,), lambda g: (-g,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)

    def rule(g):
        return g @ b.data.T, a.data.T @ g

    return record("matmul", a.data @ b.data, (a, b), rule)


def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, padding: int = 1) -> Tensor:
    """Stride-1 cross-correlation of ``x`` (B,Ci,H,W) with ``weight`` (Co,Ci,kh,kw)."""
    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1]:
        raise ShapeError("conv2d", x.shape, weight.shape)
    if bias is not None and bias.shape != (weight.shape[0],):
        raise ShapeError("conv2d", weight.shape, bias.shape, "bias must be (out_channels,)")
    kh, kw = weight.shape[2], weight.shape[3]
    p = padding
    xp = np.pad(x.data, ((0, 0), (0, 0), (p, p), (p, p)))
    if xp.shape[2] < kh or xp.shape[3] < kw:
        raise ShapeError("conv2d", x.shape, weight.shape, "kernel larger than padded input")
    cols = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    out = np.tensordot(cols, weight.data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data[None, :, None, None]
    out = np.ascontiguousarray(out)
    ho, wo = out.shape[2], out.shape[3]

    def rule(g):
        gw = np.tensordot(g, cols, axes=([0, 2, 3], [0, 2, 3]))
        dcols = np.tensordot(g, weight.data, axes=([1], [0]))
        gxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                gxp[:, :, i:i + ho, j:j + wo] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        gx = gxp[:, :, p:p + x.shape[2], p:p + x.shape[3]]
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return record("conv2d", out, inputs, rule)


def maxpool2d(x: Tensor, size: int = 2) -> Tensor:
    """Non-overlapping max pooling; trailing rows/columns that do not fill a window are dropped."""
    if x.ndim != 4:
        raise ShapeError("maxpool2d", x.shape, (size, size), "expected B x C x H x W")
    b, c, h, w = x.shape
    ho, wo = h // size, w // size
    if ho == 0 or wo == 0:
        raise ShapeError("maxpool2d", x.shape, (size, size), "spatial size underflow")
    windows = (
        x.data[:, :, : ho * size, : wo * size]
        .reshape(b, c, ho, size, wo, size)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(b, c, ho, wo, size * size)
    )
    idx = windows.argmax(axis=-1)[..., None]
    out = np.take_along_axis(windows, idx, axis=-1)[..., 0]

    def rule(g):
        gw = np.zeros_like(windows)
        np.put_along_axis(gw, idx, g[..., None], axis=-1)
        gx = np.zeros_like(x.data)
        gx[:, :, : ho * size, : wo * size] = (
            gw.reshape(b, c, ho, wo, size, size)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(b, c, ho * size, wo * size)
        )
        return (gx,)

    return record("maxpool2d", out, (x,), rule)


def relu(x: Tensor) -> Tensor:
    # Derivative at exactly 0 is 0.
    mask = x.data > 0
    return record("relu", np.where(mask, x.data, 0).astype(x.dtype), (x,), lambda g: (g * mask,))


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    if math.prod(shape) != x.size:
        raise ShapeError("reshape", x.shape, shape)
    return record("reshape", x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def broadcast_to(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    if x.shape != shape and not _expands(x.shape, shape):
        raise ShapeError("broadcast", x.shape, shape, "unsupported broadcast")
    out = np.broadcast_to(x.data.reshape(_aligned(x.shape, shape)), shape).copy()
    return record("broadcast", out, (x,), lambda g: (_unbroadcast(g, x.shape),))


def _aligned(small: Tuple[int, ...], big: Tuple[int, ...]) -> Tuple[int, ...]:
    if math.prod(small) == 1:
        return (1,) * len(big)
    return (1,) * (len(big) - len(small)) + small


def _normalize_axis(op: str, shape: Tuple[int, ...], axis: Axis) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(len(shape)))
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    normalized = []
    for a in axes:
        if not -len(shape) <= a < len(shape):
            raise ShapeError(op, shape, (a,), "axis out of range")
        normalized.append(a % len(shape))
    return tuple(sorted(set(normalized)))


def _expand_reduced(g: np.ndarray, shape: Tuple[int, ...], axes: Tuple[int, ...], keepdims: bool) -> np.ndarray:
    if not keepdims:
        g = np.expand_dims(g, axes)
    return np.broadcast_to(g, shape)


def sum(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    axes = _normalize_axis("sum", x.shape, axis)
    out = np.asarray(x.data.sum(axis=axes, keepdims=keepdims))

    def rule(g):
        return (_expand_reduced(g, x.shape, axes, keepdims).copy(),)

    return record("sum", out, (x,), rule)


def mean(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axis("mean", x.shape, axis)
    count = math.prod(x.shape[a] for a in axes)
    out = np.asarray(x.data.mean(axis=axes, keepdims=keepdims))

    def rule(g):
        return (_expand_reduced(g, x.shape, axes, keepdims) / count,)

    return record("mean", out, (x,), rule)


def var(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    """Population variance (divides by N)."""
    axes = _normalize_axis("var", x.shape, axis)
    count = math.prod(x.shape[a] for a in axes)
    centered = x.data - x.data.mean(axis=axes, keepdims=True)
    out = np.asarray((centered * centered).mean(axis=axes, keepdims=keepdims))

    def rule(g):
        return (_expand_reduced(g, x.shape, axes, keepdims) * (2.0 / count) * centered,)

    return record("var", out, (x,), rule)


def sqrt(x: Tensor) -> Tensor:
    if np.any(x.data < 0):
        raise DomainError("sqrt: negative input")
    out = np.sqrt(x.data)

    def rule(g):
        # Subgradient 0 at exactly 0 keeps zero-variance channels finite.
        gx = np.zeros_like(out)
        np.divide(0.5 * g, out, out=gx, where=out > 0)
        return (gx,)

    return record("sqrt", out, (x,), rule)


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean cross-entropy of ``logits`` (B,K) against integer ``labels`` (B,)."""
    labels = np.asarray(labels).astype(np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError("softmax_cross_entropy", logits.shape, labels.shape)
    if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise DomainError("softmax_cross_entropy: label outside [0, K)")
    batch = logits.shape[0]
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    rows = np.arange(batch)
    out = np.asarray(-log_probs[rows, labels].mean(), dtype=logits.dtype)

    def rule(g):
        probs = np.exp(log_probs)
        probs[rows, labels] -= 1.0
        return (probs * (g / batch),)

    return record("softmax_cross_entropy", out, (logits,), rule)


def grl(v: Tensor, lam: float) -> Tensor:
    """Gradient reversal: identity forward, ``-lam`` times the upstream gradient backward."""
    if lam < 0:
        raise DomainError(f"grl: lambda must be non-negative, got {lam}")
    return record("grl", v.data.copy(), (v,), lambda g: (-lam * g,))


def index_select(x: Tensor, index: np.ndarray) -> Tensor:
    """Rows of ``x`` picked along axis 0."""
    index = np.asarray(index, dtype=np.int64)
    if index.ndim != 1 or (index.size and (index.min() < 0 or index.max() >= x.shape[0])):
        raise ShapeError("index_select", x.shape, index.shape, "index out of range")

    def rule(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, index, g)
        return (gx,)

    return record("index_select", x.data[index], (x,), rule)


def norm(x: Tensor) -> Tensor:
    """Euclidean norm over every element."""
    return sqrt(sum(mul(x, x)))


def avgpool_global(x: Tensor) -> Tensor:
    """Global average pooling, B x C x H x W -> B x C."""
    if x.ndim != 4:
        raise ShapeError("avgpool_global", x.shape, (), "expected B x C x H x W")
    return mean(x, axis=(2, 3))

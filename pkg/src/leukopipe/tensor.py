"""Dense float64 tensors with reverse-mode differentiation.

Small by design: just enough operations to express the patch-transformer
extractor, the convolutional spatial blocks, and the final classifier at
desk scale. Everything is float64 and CPU-only. Operations are recorded
on a global tape; ``backward`` replays the tape once in reverse.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import special

from .errors import (
    ContractError,
    DimensionError,
    InsufficientBatchError,
    ParameterError,
)

Array = np.ndarray


class Tensor:
    """A dense n-dimensional float64 array, optionally tracked for gradients.

    ``grad`` is populated (and accumulated across ``backward`` calls) only
    for tensors with ``requires_grad=True``.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Array | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar; all dispatch to the module-level primitives
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __neg__(self):
        return mul(self, Tensor(-1.0))

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))

    def __getitem__(self, idx):
        return getitem(self, idx)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes: Sequence[int] | None = None) -> "Tensor":
        return transpose(self, axes)

    @property
    def T(self) -> "Tensor":
        return transpose(self, None)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tmean(self, axis=axis, keepdims=keepdims)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class TapeNode:
    """One recorded primitive: its inputs, output, and a pullback."""

    __slots__ = ("inputs", "output", "backward_fn")

    def __init__(self, inputs: tuple[Tensor, ...], output: Tensor,
                 backward_fn: Callable[[Array], Iterable[Array | None]]):
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn


class Tape:
    """Execution-ordered record of primitives.

    Nodes are appended as operations execute, so parents always precede
    children; a single reverse sweep visits each node exactly once.
    """

    def __init__(self):
        self.nodes: list[TapeNode] = []
        self.recording = True

    def reset(self) -> None:
        self.nodes.clear()


_TAPE = Tape()


def tape() -> Tape:
    return _TAPE


class no_grad:
    """Context manager that suspends tape recording."""

    def __enter__(self):
        self._prev = _TAPE.recording
        _TAPE.recording = False
        return self

    def __exit__(self, *exc):
        _TAPE.recording = self._prev
        return False


def _apply(inputs: tuple[Tensor, ...], out_data: Array,
           backward_fn: Callable[[Array], Iterable[Array | None]]) -> Tensor:
    out = Tensor(out_data)
    if _TAPE.recording and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        _TAPE.nodes.append(TapeNode(inputs, out, backward_fn))
    return out


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``grad`` of every requires_grad leaf.

    ``loss`` must be a scalar. Repeated calls without clearing gradients
    accumulate, matching the usual reverse-mode convention.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward expects a scalar loss, got shape {loss.shape}")
    pending: dict[int, Array] = {id(loss): np.ones_like(loss.data)}
    holders: dict[int, Tensor] = {id(loss): loss}
    for node in reversed(_TAPE.nodes):
        gout = pending.pop(id(node.output), None)
        holders.pop(id(node.output), None)
        if gout is None:
            continue
        for inp, g in zip(node.inputs, node.backward_fn(gout)):
            if g is None or not inp.requires_grad:
                continue
            key = id(inp)
            if key in pending:
                pending[key] = pending[key] + g
            else:
                pending[key] = g
                holders[key] = inp
    for key, g in pending.items():
        leaf = holders[key]
        leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, extent in enumerate(shape):
        if extent == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# elementwise and structural primitives


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data
    return _apply((a, b), out, lambda g: (_unbroadcast(g, a.shape),
                                          _unbroadcast(g, b.shape)))


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = a.data - b.data
    return _apply((a, b), out, lambda g: (_unbroadcast(g, a.shape),
                                          _unbroadcast(-g, b.shape)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data

    def pullback(g: Array):
        return (_unbroadcast(g * b.data, a.shape),
                _unbroadcast(g * a.data, b.shape))

    return _apply((a, b), out, pullback)


def texp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return _apply((a,), out, lambda g: (g * out,))


def tlog(a: Tensor) -> Tensor:
    out = np.log(a.data)
    return _apply((a,), out, lambda g: (g / a.data,))


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = a.data.reshape(shape)
    return _apply((a,), out, lambda g: (g.reshape(a.shape),))


def transpose(a: Tensor, axes: Sequence[int] | None = None) -> Tensor:
    axes_t = tuple(axes) if axes is not None else tuple(reversed(range(a.ndim)))
    inv = np.argsort(axes_t)
    out = a.data.transpose(axes_t)
    return _apply((a,), out, lambda g: (g.transpose(inv),))


def getitem(a: Tensor, idx) -> Tensor:
    out = a.data[idx]

    def pullback(g: Array):
        da = np.zeros_like(a.data)
        da[idx] += g
        return (da,)

    return _apply((a,), out, pullback)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = list(parts)
    out = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def pullback(g: Array):
        grads = []
        sl = [slice(None)] * g.ndim
        for i in range(len(parts)):
            sl[axis] = slice(offsets[i], offsets[i + 1])
            grads.append(g[tuple(sl)])
        return grads

    return _apply(tuple(parts), out, pullback)


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def pullback(g: Array):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.shape).copy(),)

    return _apply((a,), out, pullback)


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = a.data.size
    else:
        count = a.data.shape[axis]
    out = a.data.mean(axis=axis, keepdims=keepdims)

    def pullback(g: Array):
        if axis is None:
            return (np.broadcast_to(g / count, a.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg / count, a.shape).copy(),)

    return _apply((a,), out, pullback)


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul inner dimensions disagree: {a.shape} x {b.shape}")
    out = a.data @ b.data

    def pullback(g: Array):
        return (g @ b.data.T, a.data.T @ g)

    return _apply((a, b), out, pullback)


# ---------------------------------------------------------------------------
# activations


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.data, 0.0)
    mask = a.data > 0.0
    return _apply((a,), out, lambda g: (g * mask,))


def gelu(a: Tensor) -> Tensor:
    """Exact Gaussian-CDF form: x * Phi(x)."""
    x = a.data
    cdf = 0.5 * (1.0 + special.erf(x / math.sqrt(2.0)))
    out = x * cdf

    def pullback(g: Array):
        pdf = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        return (g * (cdf + x * pdf),)

    return _apply((a,), out, pullback)


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return _apply((a,), out, lambda g: (g * out * (1.0 - out),))


_ACTIVATIONS = {"relu": relu, "gelu": gelu, "sigmoid": sigmoid}


def activation(a: Tensor, kind: str) -> Tensor:
    """Elementwise nonlinearity; ``kind`` is one of relu, gelu, sigmoid."""
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ParameterError(f"unknown activation kind '{kind}'") from None
    return fn(a)


def softmax(a: Tensor) -> Tensor:
    """Row-stochastic softmax over the last axis, computed with max-subtraction."""
    x = a.data
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def pullback(g: Array):
        dot = (g * out).sum(axis=-1, keepdims=True)
        return (out * (g - dot),)

    return _apply((a,), out, pullback)


# ---------------------------------------------------------------------------
# normalization


def layernorm(a: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Standardize each slice along the last axis, then apply the affine."""
    d = a.shape[-1]
    mu = a.data.mean(axis=-1, keepdims=True)
    var = a.data.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (a.data - mu) * inv_std
    out = gamma.data * xhat + beta.data

    def pullback(g: Array):
        dxhat = g * gamma.data
        dx = (inv_std / d) * (d * dxhat
                              - dxhat.sum(axis=-1, keepdims=True)
                              - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True))
        axes = tuple(range(g.ndim - 1))
        dgamma = (g * xhat).sum(axis=axes)
        dbeta = g.sum(axis=axes)
        return (dx, dgamma, dbeta)

    return _apply((a, gamma, beta), out, pullback)


def batchnorm(a: Tensor, gamma: Tensor, beta: Tensor,
              running_mean: Array, running_var: Array,
              eps: float = 1e-5, momentum: float = 0.1,
              training: bool = True) -> Tensor:
    """Per-channel standardization of a (batch, channel, h, w) tensor.

    Training mode standardizes over batch and spatial axes and updates the
    running statistics in place (exponential average, unbiased variance).
    Inference mode standardizes with the running statistics.
    """
    if a.ndim != 4:
        raise DimensionError(f"batchnorm expects (b, c, h, w), got {a.shape}")
    b = a.shape[0]
    if training:
        if b < 2:
            raise InsufficientBatchError(f"training-mode batchnorm needs batch >= 2, got {b}")
        axes = (0, 2, 3)
        m = b * a.shape[2] * a.shape[3]
        mu = a.data.mean(axis=axes)
        var = a.data.var(axis=axes)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var * (m / max(m - 1, 1))
    else:
        mu = running_mean
        var = running_var
    c = a.shape[1]
    mu_b = mu.reshape(1, c, 1, 1)
    inv_std = (1.0 / np.sqrt(var + eps)).reshape(1, c, 1, 1)
    xhat = (a.data - mu_b) * inv_std
    out = gamma.data.reshape(1, c, 1, 1) * xhat + beta.data.reshape(1, c, 1, 1)

    def pullback(g: Array):
        gamma_b = gamma.data.reshape(1, c, 1, 1)
        dgamma = (g * xhat).sum(axis=(0, 2, 3))
        dbeta = g.sum(axis=(0, 2, 3))
        dxhat = g * gamma_b
        if training:
            m_local = a.shape[0] * a.shape[2] * a.shape[3]
            dx = (inv_std / m_local) * (
                m_local * dxhat
                - dxhat.sum(axis=(0, 2, 3), keepdims=True)
                - xhat * (dxhat * xhat).sum(axis=(0, 2, 3), keepdims=True))
        else:
            dx = dxhat * inv_std
        return (dx, dgamma, dbeta)

    return _apply((a, gamma, beta), out, pullback)


# ---------------------------------------------------------------------------
# convolution and pooling


def _im2col_indices(c: int, h: int, w: int, oh: int, ow: int):
    ci = np.repeat(np.arange(c), 9)
    ki = np.tile(np.repeat(np.arange(3), 3), c)
    kj = np.tile(np.tile(np.arange(3), 3), c)
    oi = np.repeat(np.arange(oh), ow)
    oj = np.tile(np.arange(ow), oh)
    ii = ki[:, None] + oi[None, :]
    jj = kj[:, None] + oj[None, :]
    return ci, ii, jj


def conv2d(a: Tensor, kernels: Tensor, padding: str = "same") -> Tensor:
    """Cross-correlate (b, c, h, w) with (f, c, 3, 3) kernels.

    ``padding='same'`` keeps the spatial extents, ``'valid'`` shrinks them
    by two. No kernel flip is performed.
    """
    if a.ndim != 4:
        raise DimensionError(f"conv2d expects input (b, c, h, w), got {a.shape}")
    if kernels.ndim != 4 or kernels.shape[2:] != (3, 3):
        raise DimensionError(f"conv2d expects kernels (f, c, 3, 3), got {kernels.shape}")
    if kernels.shape[1] != a.shape[1]:
        raise DimensionError(
            f"conv2d channel mismatch: input {a.shape} vs kernels {kernels.shape}")
    if padding not in ("same", "valid"):
        raise ParameterError(f"conv2d padding must be 'same' or 'valid', got '{padding}'")
    b, c, h, w = a.shape
    f = kernels.shape[0]
    pad = 1 if padding == "same" else 0
    if padding == "valid" and (h < 3 or w < 3):
        raise DimensionError(f"conv2d valid padding needs spatial extents >= 3, got {a.shape}")
    padded = np.pad(a.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    oh, ow = h + 2 * pad - 2, w + 2 * pad - 2
    ci, ii, jj = _im2col_indices(c, h, w, oh, ow)
    cols = padded[:, ci[:, None], ii, jj]          # (b, c*9, oh*ow)
    kmat = kernels.data.reshape(f, c * 9)
    out = (kmat @ cols).reshape(b, f, oh, ow)

    def pullback(g: Array):
        gmat = g.reshape(b, f, oh * ow)
        dk = np.einsum("bfl,bkl->fk", gmat, cols).reshape(kernels.shape)
        dcols = kmat.T @ gmat                       # (b, c*9, oh*ow)
        dpad = np.zeros_like(padded)
        np.add.at(dpad,
                  (np.arange(b)[:, None, None], ci[None, :, None], ii[None], jj[None]),
                  dcols)
        da = dpad[:, :, pad:pad + h, pad:pad + w] if pad else dpad
        return (da, dk)

    return _apply((a, kernels), out, pullback)


def maxpool2d(a: Tensor) -> Tensor:
    """2x2 max pooling with stride 2; spatial extents halve (floor).

    Gradient flows to the first maximal element of each window in
    row-major order.
    """
    if a.ndim != 4:
        raise DimensionError(f"maxpool2d expects (b, c, h, w), got {a.shape}")
    b, c, h, w = a.shape
    if h < 2 or w < 2:
        raise DimensionError(f"maxpool2d needs spatial extents >= 2, got {a.shape}")
    h2, w2 = h // 2, w // 2
    cropped = a.data[:, :, :h2 * 2, :w2 * 2]
    windows = (cropped.reshape(b, c, h2, 2, w2, 2)
               .transpose(0, 1, 2, 4, 3, 5)
               .reshape(b, c, h2, w2, 4))
    arg = windows.argmax(axis=-1)                   # first max, row-major
    out = np.take_along_axis(windows, arg[..., None], axis=-1)[..., 0]

    def pullback(g: Array):
        dwin = np.zeros_like(windows)
        np.put_along_axis(dwin, arg[..., None], g[..., None], axis=-1)
        dcrop = (dwin.reshape(b, c, h2, w2, 2, 2)
                 .transpose(0, 1, 2, 4, 3, 5)
                 .reshape(b, c, h2 * 2, w2 * 2))
        da = np.zeros_like(a.data)
        da[:, :, :h2 * 2, :w2 * 2] = dcrop
        return (da,)

    return _apply((a,), out, pullback)


# ---------------------------------------------------------------------------
# regularization


def dropout(a: Tensor, rate: float, rng: np.random.Generator,
            training: bool = True) -> Tensor:
    """Zero each element with probability ``rate`` and rescale survivors.

    Identity at inference time and for ``rate == 0``.
    """
    if not 0.0 <= rate < 1.0:
        raise ParameterError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return _apply((a,), a.data.copy(), lambda g: (g,))
    keep = rng.random(a.shape) >= rate
    scale = 1.0 / (1.0 - rate)
    out = a.data * keep * scale
    return _apply((a,), out, lambda g: (g * keep * scale,))

"""Minimal reverse-mode autodiff over numpy arrays.

A Tensor wraps one ndarray and records the op that produced it; backward()
topologically sorts the tape and accumulates gradients. Only the ops this
project needs exist. Reductions use numpy's fixed left-to-right order, so
forward and backward are bit-stable for fixed inputs.
"""

from __future__ import annotations

from typing import Iterable, List, Optional, Sequence

import numpy as np


class GradientError(RuntimeError):
    """Raised when backward produces a non-finite gradient."""


class Tensor:
    __slots__ = ("data", "grad", "_backward", "_prev", "_opname")

    def __init__(self, data, prev: tuple = (), opname: str = "leaf"):
        self.data = np.asarray(data)
        self.grad: Optional[np.ndarray] = None
        self._backward = None
        self._prev = prev
        self._opname = opname

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self._opname})"

    # -- operator sugar --
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _wrap(other))

    def backward(self) -> None:
        """Accumulate gradients of this (scalar) value into the whole tape."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        topo: List[Tensor] = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._prev:
                if id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                if not np.all(np.isfinite(node.grad)):
                    raise GradientError(f"non-finite gradient at op {node._opname}")


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def constant(x) -> Tensor:
    return Tensor(np.asarray(x))


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = g.copy() if isinstance(g, np.ndarray) else np.asarray(g)
    else:
        t.grad = t.grad + g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcasted gradient back to the original operand shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, s) in enumerate(zip(g.shape, shape)) if s == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data, (a, b), "add")

    def bw(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))
    out._backward = bw
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data - b.data, (a, b), "sub")

    def bw(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(-g, b.data.shape))
    out._backward = bw
    return out


def neg(a: Tensor) -> Tensor:
    out = Tensor(-a.data, (a,), "neg")
    out._backward = lambda g: _accum(a, -g)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data, (a, b), "mul")

    def bw(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))
    out._backward = bw
    return out


def div(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data / b.data, (a, b), "div")

    def bw(g):
        _accum(a, _unbroadcast(g / b.data, a.data.shape))
        _accum(b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))
    out._backward = bw
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data @ b.data, (a, b), "matmul")

    def bw(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)
    out._backward = bw
    return out


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    out = Tensor(y, (a,), "tanh")
    out._backward = lambda g: _accum(a, g * (1.0 - y * y))
    return out


def sigmoid(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        y = 1.0 / (1.0 + np.exp(-a.data))
    out = Tensor(y, (a,), "sigmoid")
    out._backward = lambda g: _accum(a, g * y * (1.0 - y))
    return out


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    out = Tensor(a.data * mask, (a,), "relu")
    out._backward = lambda g: _accum(a, g * mask)
    return out


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    out = Tensor(y, (a,), "exp")
    out._backward = lambda g: _accum(a, g * y)
    return out


def log(a: Tensor) -> Tensor:
    out = Tensor(np.log(a.data), (a,), "log")
    out._backward = lambda g: _accum(a, g / a.data)
    return out


def sqrt(a: Tensor) -> Tensor:
    y = np.sqrt(a.data)
    out = Tensor(y, (a,), "sqrt")
    out._backward = lambda g: _accum(a, g * 0.5 / y)
    return out


def square(a: Tensor) -> Tensor:
    out = Tensor(a.data * a.data, (a,), "square")
    out._backward = lambda g: _accum(a, g * 2.0 * a.data)
    return out


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims), (a,), "sum")
    ndim = a.data.ndim

    def bw(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            axes = axis if isinstance(axis, tuple) else (axis,)
            for ax in sorted(ax % ndim for ax in axes):
                g = np.expand_dims(g, ax)
        _accum(a, np.broadcast_to(g, a.data.shape))
    out._backward = bw
    return out


def tmean(a: Tensor, axis=None) -> Tensor:
    n = a.data.size if axis is None else a.data.shape[axis]
    return mul(tsum(a, axis=axis), constant(np.asarray(1.0 / n, dtype=a.data.dtype)))


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis),
                 tuple(tensors), "concat")
    sizes = [t.data.shape[axis] for t in tensors]

    def bw(g):
        splits = np.split(g, np.cumsum(sizes)[:-1], axis=axis)
        for t, gs in zip(tensors, splits):
            _accum(t, gs)
    out._backward = bw
    return out


def gather_columns(a: Tensor, idx: np.ndarray) -> Tensor:
    out = Tensor(a.data[..., idx], (a,), "gather_columns")

    def bw(g):
        full = np.zeros_like(a.data)
        np.add.at(full, (..., idx), g)
        _accum(a, full)
    out._backward = bw
    return out


def scatter_columns(a: Tensor, idx: np.ndarray, total: int) -> Tensor:
    shape = a.data.shape[:-1] + (total,)
    data = np.zeros(shape, dtype=a.data.dtype)
    data[..., idx] = a.data
    out = Tensor(data, (a,), "scatter_columns")
    out._backward = lambda g: _accum(a, g[..., idx])
    return out


def take_per_row(a: Tensor, idx: np.ndarray) -> Tensor:
    """out[i] = a[i, idx[i]] for a 2D tensor."""
    rows = np.arange(a.data.shape[0])
    out = Tensor(a.data[rows, idx], (a,), "take_per_row")

    def bw(g):
        full = np.zeros_like(a.data)
        np.add.at(full, (rows, idx), g)
        _accum(a, full)
    out._backward = bw
    return out


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    mask = (a.data >= lo) & (a.data <= hi)
    out = Tensor(np.clip(a.data, lo, hi), (a,), "clamp")
    out._backward = lambda g: _accum(a, g * mask)
    return out


def minimum(a: Tensor, b: Tensor) -> Tensor:
    amin = a.data <= b.data
    out = Tensor(np.minimum(a.data, b.data), (a, b), "minimum")

    def bw(g):
        _accum(a, _unbroadcast(g * amin, a.data.shape))
        _accum(b, _unbroadcast(g * (~amin), b.data.shape))
    out._backward = bw
    return out


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Stable log-softmax built from primitive ops (detached max shift)."""
    shift = constant(a.data.max(axis=axis, keepdims=True))
    z = sub(a, shift)
    lse = log(tsum(exp(z), axis=axis, keepdims=True))
    return sub(z, lse)

"""Minimal reverse-mode autodiff over numpy arrays.

Just enough primitives for the encoder stack and its loss: broadcasting
add/mul, batched matmul, softmax, layer norm, relu, sigmoid, log, slicing,
concat, reductions.  Gradients accumulate in float64 and every primitive
is finite-difference checked in the test suite.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum grad down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_backward", "needs_grad")

    def __init__(self, data, parents=(), requires_grad=True):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._backward = None
        self.needs_grad = requires_grad or bool(parents)

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"

    # ---- graph construction -------------------------------------------------

    def __add__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        out = Tensor(self.data + other.data, (self, other))

        def backward(g):
            if self.needs_grad:
                self._accum(_unbroadcast(g, self.data.shape))
            if other.needs_grad:
                other._accum(_unbroadcast(g, other.data.shape))
        out._backward = backward
        return out

    def __sub__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        out = Tensor(self.data - other.data, (self, other))

        def backward(g):
            if self.needs_grad:
                self._accum(_unbroadcast(g, self.data.shape))
            if other.needs_grad:
                other._accum(_unbroadcast(-g, other.data.shape))
        out._backward = backward
        return out

    def __mul__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        out = Tensor(self.data * other.data, (self, other))

        def backward(g):
            if self.needs_grad:
                self._accum(_unbroadcast(g * other.data, self.data.shape))
            if other.needs_grad:
                other._accum(_unbroadcast(g * self.data, other.data.shape))
        out._backward = backward
        return out

    def scale(self, k: float):
        out = Tensor(self.data * k, (self,))

        def backward(g):
            self._accum(g * k)
        out._backward = backward
        return out

    def __matmul__(self, other):
        a, b = self.data, other.data
        # stacked @ 2D collapses to a single gemm
        collapse = a.ndim > 2 and b.ndim == 2
        if collapse:
            value = (a.reshape(-1, a.shape[-1]) @ b).reshape(*a.shape[:-1], b.shape[-1])
        else:
            value = np.matmul(a, b)
        out = Tensor(value, (self, other))

        def backward(g):
            if self.needs_grad:
                if collapse:
                    self._accum((g.reshape(-1, g.shape[-1]) @ b.T).reshape(a.shape))
                else:
                    self._accum(_unbroadcast(np.matmul(g, np.swapaxes(b, -1, -2)),
                                             a.shape))
            if other.needs_grad:
                if collapse:
                    other._accum(a.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1]))
                else:
                    other._accum(_unbroadcast(np.matmul(np.swapaxes(a, -1, -2), g),
                                              b.shape))
        out._backward = backward
        return out

    def transpose_last(self):
        out = Tensor(np.swapaxes(self.data, -1, -2), (self,))

        def backward(g):
            self._accum(np.swapaxes(g, -1, -2))
        out._backward = backward
        return out

    def relu(self):
        mask = self.data > 0
        out = Tensor(self.data * mask, (self,))

        def backward(g):
            self._accum(g * mask)
        out._backward = backward
        return out

    def sigmoid(self):
        y = 1.0 / (1.0 + np.exp(-self.data))
        out = Tensor(y, (self,))

        def backward(g):
            self._accum(g * y * (1.0 - y))
        out._backward = backward
        return out

    def log(self):
        out = Tensor(np.log(self.data), (self,))

        def backward(g):
            self._accum(g / self.data)
        out._backward = backward
        return out

    def clamp(self, lo: float, hi: float):
        """Value clamp; gradient passes only inside the open interval."""
        mask = (self.data > lo) & (self.data < hi)
        out = Tensor(np.clip(self.data, lo, hi), (self,))

        def backward(g):
            self._accum(g * mask)
        out._backward = backward
        return out

    def softmax_last(self):
        z = self.data - self.data.max(axis=-1, keepdims=True)
        e = np.exp(z)
        y = e / e.sum(axis=-1, keepdims=True)
        out = Tensor(y, (self,))

        def backward(g):
            dot = (g * y).sum(axis=-1, keepdims=True)
            self._accum(y * (g - dot))
        out._backward = backward
        return out

    def layer_norm(self, gain: "Tensor", bias: "Tensor", eps: float = 1e-5):
        """Normalize over the last axis then apply the affine pair."""
        mu = self.data.mean(axis=-1, keepdims=True)
        var = self.data.var(axis=-1, keepdims=True)
        inv = 1.0 / np.sqrt(var + eps)
        xhat = (self.data - mu) * inv
        out = Tensor(xhat * gain.data + bias.data, (self, gain, bias))
        d = self.data.shape[-1]

        def backward(g):
            reduce_axes = tuple(range(g.ndim - 1))
            gain._accum((g * xhat).sum(axis=reduce_axes))
            bias._accum(g.sum(axis=reduce_axes))
            gx = g * gain.data
            m1 = gx.mean(axis=-1, keepdims=True)
            m2 = (gx * xhat).mean(axis=-1, keepdims=True)
            self._accum((gx - m1 - xhat * m2) * inv)
        out._backward = backward
        return out

    def standardize_last(self, eps: float = 1e-5):
        """Parameter-free row standardization over the last axis."""
        mu = self.data.mean(axis=-1, keepdims=True)
        var = self.data.var(axis=-1, keepdims=True)
        inv = 1.0 / np.sqrt(var + eps)
        xhat = (self.data - mu) * inv
        out = Tensor(xhat, (self,))

        def backward(g):
            m1 = g.mean(axis=-1, keepdims=True)
            m2 = (g * xhat).mean(axis=-1, keepdims=True)
            self._accum((g - m1 - xhat * m2) * inv)
        out._backward = backward
        return out

    def mean_axis(self, axis: int):
        out = Tensor(self.data.mean(axis=axis), (self,))
        n = self.data.shape[axis]

        def backward(g):
            self._accum(np.repeat(np.expand_dims(g / n, axis), n, axis=axis))
        out._backward = backward
        return out

    def mean(self):
        out = Tensor(self.data.mean(), (self,))
        n = self.data.size

        def backward(g):
            self._accum(np.full(self.data.shape, float(g) / n))
        out._backward = backward
        return out

    def slice_last(self, start: int, stop: int):
        out = Tensor(self.data[..., start:stop], (self,))

        def backward(g):
            full = np.zeros(self.data.shape)
            full[..., start:stop] = g
            self._accum(full)
        out._backward = backward
        return out

    def reshape(self, *shape):
        out = Tensor(self.data.reshape(*shape), (self,))

        def backward(g):
            self._accum(g.reshape(self.data.shape))
        out._backward = backward
        return out

    # ---- backprop -----------------------------------------------------------

    def _accum(self, g):
        # first contribution is stored by reference; accumulation always
        # rebinds (never mutates in place), so sharing g across nodes is safe
        if self.grad is None:
            self.grad = g
        else:
            self.grad = self.grad + g

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() expects a scalar loss")
        topo: list[Tensor] = []
        visited: set[int] = set()
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
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.ones(self.data.shape)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)


def concat_last(tensors: list[Tensor]) -> Tensor:
    out = Tensor(np.concatenate([t.data for t in tensors], axis=-1), tuple(tensors))
    widths = [t.data.shape[-1] for t in tensors]

    def backward(g):
        offset = 0
        for t, w in zip(tensors, widths):
            t._accum(g[..., offset:offset + w])
            offset += w
    out._backward = backward
    return out

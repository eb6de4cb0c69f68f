"""Reverse-mode automatic differentiation over float64 numpy arrays.

Small tape-based engine sized for this package's models: dense matmuls,
elementwise math with broadcasting, row gathers for embedding lookups,
row softmax, and numerically stable log-sum-exp reductions. Gradients
are validated against central finite differences in the test suite.
"""

from __future__ import annotations

import contextlib

import numpy as np

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (inference mode)."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad and _grad_enabled
        self.grad = None
        self._parents = parents if self.requires_grad else ()
        self._backward = backward if self.requires_grad else None

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar tensor")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                stack.append((parent, False))

        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is None or node.grad is None:
                continue
            for parent, grad in zip(node._parents, node._backward(node.grad)):
                if grad is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.data)
                parent.grad += grad

    # -- operator sugar ------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcasted gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _make(data, parents, backward) -> Tensor:
    requires = _grad_enabled and any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=requires, parents=parents, backward=backward)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data

    def backward(grad):
        return _unbroadcast(grad, a.shape), _unbroadcast(grad, b.shape)

    return _make(out_data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data * b.data

    def backward(grad):
        return (
            _unbroadcast(grad * b.data, a.shape),
            _unbroadcast(grad * a.data, b.shape),
        )

    return _make(out_data, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data / b.data

    def backward(grad):
        return (
            _unbroadcast(grad / b.data, a.shape),
            _unbroadcast(-grad * a.data / (b.data**2), b.shape),
        )

    return _make(out_data, (a, b), backward)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data @ b.data

    def backward(grad):
        return grad @ b.data.T, a.data.T @ grad

    return _make(out_data, (a, b), backward)


def transpose(a) -> Tensor:
    a = as_tensor(a)

    def backward(grad):
        return (grad.T,)

    return _make(a.data.T, (a,), backward)


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.tanh(a.data)

    def backward(grad):
        return (grad * (1.0 - out_data**2),)

    return _make(out_data, (a,), backward)


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out_data = _stable_sigmoid(a.data)

    def backward(grad):
        return (grad * out_data * (1.0 - out_data),)

    return _make(out_data, (a,), backward)


def exp(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.exp(a.data)

    def backward(grad):
        return (grad * out_data,)

    return _make(out_data, (a,), backward)


def log(a) -> Tensor:
    a = as_tensor(a)

    def backward(grad):
        return (grad / a.data,)

    return _make(np.log(a.data), (a,), backward)


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.sqrt(a.data)

    def backward(grad):
        return (grad / (2.0 * out_data),)

    return _make(out_data, (a,), backward)


def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(grad):
        if axis is None:
            return (np.broadcast_to(grad, a.shape).copy(),)
        expanded = grad if keepdims else np.expand_dims(grad, axis)
        return (np.broadcast_to(expanded, a.shape).copy(),)

    return _make(out_data, (a,), backward)


def take_rows(a, indices) -> Tensor:
    """Gather rows (embedding lookup); duplicate indices accumulate grads."""
    a = as_tensor(a)
    indices = np.asarray(indices, dtype=np.intp)
    out_data = a.data[indices]

    def backward(grad):
        full = np.zeros_like(a.data)
        np.add.at(full, indices, grad)
        return (full,)

    return _make(out_data, (a,), backward)


def get(a, key) -> Tensor:
    """Single-element or slice indexing."""
    a = as_tensor(a)
    out_data = np.asarray(a.data[key])

    def backward(grad):
        full = np.zeros_like(a.data)
        full[key] = grad
        return (full,)

    return _make(out_data, (a,), backward)


def row_softmax(a) -> Tensor:
    """Softmax along the last axis."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    exped = np.exp(shifted)
    out_data = exped / exped.sum(axis=-1, keepdims=True)

    def backward(grad):
        inner = (grad * out_data).sum(axis=-1, keepdims=True)
        return (out_data * (grad - inner),)

    return _make(out_data, (a,), backward)


def logsumexp(a, axis=None) -> Tensor:
    a = as_tensor(a)
    maxes = a.data.max(axis=axis, keepdims=True)
    out_keep = maxes + np.log(np.exp(a.data - maxes).sum(axis=axis, keepdims=True))
    out_data = out_keep.reshape(()) if axis is None else np.squeeze(out_keep, axis=axis)

    def backward(grad):
        softmax = np.exp(a.data - out_keep)
        if axis is None:
            return (softmax * grad,)
        return (softmax * np.expand_dims(grad, axis),)

    return _make(out_data, (a,), backward)


def logaddexp(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = np.logaddexp(a.data, b.data)

    def backward(grad):
        wa = _stable_sigmoid(a.data - b.data)
        return (
            _unbroadcast(grad * wa, a.shape),
            _unbroadcast(grad * (1.0 - wa), b.shape),
        )

    return _make(out_data, (a, b), backward)


def concat_rows(tensors) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=0)
    sizes = [t.data.shape[0] for t in tensors]

    def backward(grad):
        grads = []
        offset = 0
        for size in sizes:
            grads.append(grad[offset : offset + size])
            offset += size
        return tuple(grads)

    return _make(out_data, tuple(tensors), backward)

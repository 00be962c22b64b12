"""Minimal reverse-mode autodiff over numpy buffers.

Tensors carry their value, an accumulated gradient and the graph linkage
needed for backward(). Every differentiable op is registered so the gradient
checker can sweep the full op set against central finite differences.
"""
from __future__ import annotations

import numpy as np

from ..errors import ShapeError


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, parents=(), backward=None):
        self.data = np.asarray(data)
        if self.data.dtype.kind != "f":
            self.data = self.data.astype(np.float32)
        self.grad = None
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad_graph(self) -> None:
        for node in _toposort(self):
            node.grad = None

    def backward(self) -> None:
        if self.data.size != 1:
            raise ShapeError("backward() requires a scalar output")
        order = _toposort(self)
        for node in order:
            node.grad = np.zeros_like(node.data)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    # operator sugar -------------------------------------------------------
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

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __matmul__(self, other):
        return matmul(self, _wrap(other))

    def __neg__(self):
        return mul(self, Tensor(np.array(-1.0, dtype=self.data.dtype)))

    def __getitem__(self, idx):
        return take(self, idx)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _toposort(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum grad down to `shape` (reverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# primitive ops
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data, (a, b))

    def backward(g):
        a.grad += _unbroadcast(g, a.data.shape)
        b.grad += _unbroadcast(g, b.data.shape)

    out._backward = backward
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data - b.data, (a, b))

    def backward(g):
        a.grad += _unbroadcast(g, a.data.shape)
        b.grad -= _unbroadcast(g, b.data.shape)

    out._backward = backward
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data, (a, b))

    def backward(g):
        a.grad += _unbroadcast(g * b.data, a.data.shape)
        b.grad += _unbroadcast(g * a.data, b.data.shape)

    out._backward = backward
    return out


def div(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data / b.data, (a, b))

    def backward(g):
        a.grad += _unbroadcast(g / b.data, a.data.shape)
        b.grad += _unbroadcast(-g * a.data / (b.data**2), b.data.shape)

    out._backward = backward
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data @ b.data, (a, b))

    def backward(g):
        if b.data.ndim == 1:
            a.grad += np.outer(g, b.data) if a.data.ndim == 2 else g * b.data
            b.grad += a.data.T @ g if a.data.ndim == 2 else g * a.data
        elif a.data.ndim == 1:
            a.grad += g @ b.data.T
            b.grad += np.outer(a.data, g)
        else:
            a.grad += g @ np.swapaxes(b.data, -1, -2)
            b.grad += _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape)

    out._backward = backward
    return out


def relu(a: Tensor) -> Tensor:
    out = Tensor(np.maximum(a.data, 0.0), (a,))

    def backward(g):
        a.grad += g * (a.data > 0.0)

    out._backward = backward
    return out


def tanh(a: Tensor) -> Tensor:
    val = np.tanh(a.data)
    out = Tensor(val, (a,))

    def backward(g):
        a.grad += g * (1.0 - val**2)

    out._backward = backward
    return out


def sigmoid(a: Tensor) -> Tensor:
    val = 1.0 / (1.0 + np.exp(-a.data))
    out = Tensor(val, (a,))

    def backward(g):
        a.grad += g * val * (1.0 - val)

    out._backward = backward
    return out


def exp(a: Tensor) -> Tensor:
    val = np.exp(a.data)
    out = Tensor(val, (a,))

    def backward(g):
        a.grad += g * val

    out._backward = backward
    return out


def log(a: Tensor) -> Tensor:
    out = Tensor(np.log(a.data), (a,))

    def backward(g):
        a.grad += g / a.data

    out._backward = backward
    return out


def sqrt(a: Tensor) -> Tensor:
    val = np.sqrt(a.data)
    out = Tensor(val, (a,))

    def backward(g):
        a.grad += g * 0.5 / val

    out._backward = backward
    return out


def absolute(a: Tensor) -> Tensor:
    out = Tensor(np.abs(a.data), (a,))

    def backward(g):
        a.grad += g * np.sign(a.data)

    out._backward = backward
    return out


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    out = Tensor(np.clip(a.data, lo, hi), (a,))

    def backward(g):
        a.grad += g * ((a.data >= lo) & (a.data <= hi))

    out._backward = backward
    return out


def tsum(a: Tensor, axis=None, keepdims=False) -> Tensor:
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims), (a,))

    def backward(g):
        if axis is None:
            a.grad += np.broadcast_to(g, a.data.shape)
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            a.grad += np.broadcast_to(gg, a.data.shape)

    out._backward = backward
    return out


def tmean(a: Tensor, axis=None, keepdims=False) -> Tensor:
    n = a.data.size if axis is None else a.data.shape[axis]
    return tsum(a, axis=axis, keepdims=keepdims) * Tensor(np.array(1.0 / n, dtype=a.data.dtype))


def tmax(a: Tensor, axis: int) -> Tensor:
    """Max over one axis; gradient routed to the first argmax (deterministic)."""
    val = a.data.max(axis=axis)
    idx = a.data.argmax(axis=axis)
    out = Tensor(val, (a,))

    def backward(g):
        grad = np.zeros_like(a.data)
        grid = np.indices(idx.shape)
        index = list(grid)
        index.insert(axis if axis >= 0 else a.data.ndim + axis, idx)
        grad[tuple(index)] = g
        a.grad += grad

    out._backward = backward
    return out


def concat(tensors: list[Tensor], axis: int = -1) -> Tensor:
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors))
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            t.grad += g[tuple(sl)]

    out._backward = backward
    return out


def reshape(a: Tensor, shape: tuple) -> Tensor:
    out = Tensor(a.data.reshape(shape), (a,))

    def backward(g):
        a.grad += g.reshape(a.data.shape)

    out._backward = backward
    return out


def take(a: Tensor, idx) -> Tensor:
    out = Tensor(a.data[idx], (a,))

    def backward(g):
        grad = np.zeros_like(a.data)
        np.add.at(grad, idx, g)
        a.grad += grad

    out._backward = backward
    return out


def square(a: Tensor) -> Tensor:
    return mul(a, a)


# ---------------------------------------------------------------------------
# op registry + gradient checking
# ---------------------------------------------------------------------------

def _reg_inputs(rng, *shapes):
    return [Tensor(rng.standard_normal(s).astype(np.float64)) for s in shapes]


REGISTERED_OPS: list[tuple[str, object, object]] = [
    ("add", lambda rng: _reg_inputs(rng, (4, 3), (4, 3)), lambda xs: add(xs[0], xs[1])),
    ("add_broadcast", lambda rng: _reg_inputs(rng, (4, 3), (3,)), lambda xs: add(xs[0], xs[1])),
    ("sub", lambda rng: _reg_inputs(rng, (4, 3), (4, 3)), lambda xs: sub(xs[0], xs[1])),
    ("mul", lambda rng: _reg_inputs(rng, (4, 3), (4, 3)), lambda xs: mul(xs[0], xs[1])),
    ("div", lambda rng: [Tensor(rng.standard_normal((4, 3))),
                         Tensor(rng.standard_normal((4, 3)) + 3.0)], lambda xs: div(xs[0], xs[1])),
    ("matmul", lambda rng: _reg_inputs(rng, (4, 5), (5, 3)), lambda xs: matmul(xs[0], xs[1])),
    ("matvec", lambda rng: _reg_inputs(rng, (4, 5), (5,)), lambda xs: matmul(xs[0], xs[1])),
    ("relu", lambda rng: [Tensor(rng.standard_normal((4, 3)) + 0.05)], lambda xs: relu(xs[0])),
    ("tanh", lambda rng: _reg_inputs(rng, (4, 3)), lambda xs: tanh(xs[0])),
    ("sigmoid", lambda rng: _reg_inputs(rng, (4, 3)), lambda xs: sigmoid(xs[0])),
    ("exp", lambda rng: _reg_inputs(rng, (4, 3)), lambda xs: exp(xs[0])),
    ("log", lambda rng: [Tensor(np.abs(rng.standard_normal((4, 3))) + 0.5)], lambda xs: log(xs[0])),
    ("sqrt", lambda rng: [Tensor(np.abs(rng.standard_normal((4, 3))) + 0.5)], lambda xs: sqrt(xs[0])),
    ("abs", lambda rng: [Tensor(rng.standard_normal((4, 3)) + 0.05)], lambda xs: absolute(xs[0])),
    ("clamp", lambda rng: [Tensor(rng.standard_normal((4, 3)) * 3.0)],
     lambda xs: clamp(xs[0], -1.0, 1.0)),
    ("sum", lambda rng: _reg_inputs(rng, (4, 3)), lambda xs: tsum(xs[0])),
    ("sum_axis", lambda rng: _reg_inputs(rng, (4, 3)), lambda xs: tsum(xs[0], axis=0)),
    ("mean", lambda rng: _reg_inputs(rng, (4, 3)), lambda xs: tmean(xs[0])),
    ("max_axis", lambda rng: _reg_inputs(rng, (6, 3)), lambda xs: tmax(xs[0], axis=0)),
    ("concat", lambda rng: _reg_inputs(rng, (4, 3), (4, 2)), lambda xs: concat(xs, axis=1)),
    ("reshape", lambda rng: _reg_inputs(rng, (4, 3)), lambda xs: reshape(xs[0], (3, 4))),
    ("take", lambda rng: _reg_inputs(rng, (6, 3)), lambda xs: take(xs[0], slice(1, 4))),
]


def grad_check(apply_fn, inputs: list[Tensor], eps: float = 1e-3) -> float:
    """Max relative error of reverse-mode grads vs central finite differences.

    Inputs should be float64 tensors; the forward is evaluated in that
    precision. The comparison uses |analytic - numeric| / max(1, |numeric|).
    """
    inputs = [Tensor(t.data.astype(np.float64)) for t in inputs]
    out = apply_fn(inputs)
    loss = tsum(mul(out, out)) if out.data.size != 1 else out
    loss.backward()
    analytic = [t.grad.copy() for t in inputs]

    def f_scalar() -> float:
        o = apply_fn(inputs)
        val = (o.data**2).sum() if o.data.size != 1 else float(o.data)
        return float(val)

    worst = 0.0
    for t, grad in zip(inputs, analytic):
        flat = t.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = f_scalar()
            flat[i] = orig - eps
            f_minus = f_scalar()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            err = abs(grad.reshape(-1)[i] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, err)
    return worst


def check_registered_ops(seed: int = 0, eps: float = 1e-3) -> dict[str, float]:
    """Gradient-check every registered op; returns name -> max relative error."""
    rng = np.random.default_rng(seed)
    results = {}
    for name, make_inputs, apply_fn in REGISTERED_OPS:
        results[name] = grad_check(apply_fn, make_inputs(rng), eps=eps)
    return results

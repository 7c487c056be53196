"""Dense float64 tensors with reverse-mode automatic differentiation.

Every op builds its output eagerly and, when any input requires a gradient,
records a closure that pushes the output gradient back to its inputs.
``Tensor.backward`` walks the recorded graph in reverse topological order.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class NonFiniteError(FloatingPointError):
    """Raised when a tensor that must be finite holds NaN or Inf."""


def _as_array(x) -> np.ndarray:
    if isinstance(x, np.ndarray) and x.dtype == np.float64:
        return x
    return np.asarray(x, dtype=np.float64)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    ndiff = grad.ndim - len(shape)
    if ndiff > 0:
        grad = grad.sum(axis=tuple(range(ndiff)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")
    __array_priority__ = 100.0

    def __init__(self, data, requires_grad: bool = False, _parents: tuple = (), op: str = ""):
        self.data = _as_array(data)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents = _parents
        self._backward: Callable[[np.ndarray], None] | None = None
        self.op = op

    # -- basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op!r}, requires_grad={self.requires_grad})"

    def __len__(self) -> int:
        return self.data.shape[0]

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def check_finite(self, what: str = "tensor") -> "Tensor":
        if not np.all(np.isfinite(self.data)):
            raise NonFiniteError(f"{what} contains NaN or Inf")
        return self

    def zero_grad(self) -> None:
        self.grad = None

    # -- graph plumbing ---------------------------------------------------
    @staticmethod
    def _make(data: np.ndarray, parents: tuple, op: str, backward) -> "Tensor":
        needs = _GRAD_ENABLED and any(p.requires_grad for p in parents)
        out = Tensor(data, requires_grad=needs, op=op)
        if needs:
            out._parents = parents
            out._backward = backward
        return out

    def _accum(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self, grad: np.ndarray | None = None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self._accum(_as_array(grad))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                # interior gradients are not needed once propagated
                if node._parents:
                    node.grad = None if node is not self else node.grad

    # -- elementwise arithmetic ------------------------------------------
    def __add__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        a, b = self, other

        def bw(g):
            a._accum(_unbroadcast(g, a.shape))
            b._accum(_unbroadcast(g, b.shape))

        return Tensor._make(a.data + b.data, (a, b), "add", bw)

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        a = self
        return Tensor._make(-a.data, (a,), "neg", lambda g: a._accum(-g))

    def __sub__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        a, b = self, other

        def bw(g):
            a._accum(_unbroadcast(g, a.shape))
            b._accum(_unbroadcast(-g, b.shape))

        return Tensor._make(a.data - b.data, (a, b), "sub", bw)

    def __rsub__(self, other) -> "Tensor":
        return Tensor(other) - self

    def __mul__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        a, b = self, other

        def bw(g):
            if a.requires_grad:
                a._accum(_unbroadcast(g * b.data, a.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(g * a.data, b.shape))

        return Tensor._make(a.data * b.data, (a, b), "mul", bw)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        a, b = self, other

        def bw(g):
            if a.requires_grad:
                a._accum(_unbroadcast(g / b.data, a.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

        return Tensor._make(a.data / b.data, (a, b), "div", bw)

    def __rtruediv__(self, other) -> "Tensor":
        return Tensor(other) / self

    def __pow__(self, exponent: float) -> "Tensor":
        if isinstance(exponent, Tensor):
            raise TypeError("only scalar exponents are supported")
        a, e = self, float(exponent)
        return Tensor._make(
            a.data**e, (a,), "pow", lambda g: a._accum(g * e * a.data ** (e - 1.0))
        )

    def __matmul__(self, other) -> "Tensor":
        return matmul(self, other)

    # -- unary maths -------------------------------------------------------
    def exp(self) -> "Tensor":
        a = self
        out = np.exp(a.data)
        return Tensor._make(out, (a,), "exp", lambda g: a._accum(g * out))

    def log(self) -> "Tensor":
        a = self
        return Tensor._make(np.log(a.data), (a,), "log", lambda g: a._accum(g / a.data))

    def sqrt(self) -> "Tensor":
        a = self
        out = np.sqrt(a.data)
        return Tensor._make(out, (a,), "sqrt", lambda g: a._accum(g * 0.5 / out))

    def tanh(self) -> "Tensor":
        a = self
        out = np.tanh(a.data)
        return Tensor._make(out, (a,), "tanh", lambda g: a._accum(g * (1.0 - out * out)))

    def relu(self) -> "Tensor":
        a = self
        pos = a.data > 0
        return Tensor._make(a.data * pos, (a,), "relu", lambda g: a._accum(g * pos))

    def gelu(self) -> "Tensor":
        # tanh approximation
        a = self
        x = a.data
        c = np.sqrt(2.0 / np.pi)
        x2 = x * x
        inner = c * (x + 0.044715 * x2 * x)
        t = np.tanh(inner)
        out = 0.5 * x * (1.0 + t)

        def bw(g):
            dinner = c * (1.0 + 3 * 0.044715 * x2)
            a._accum(g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner))

        return Tensor._make(out, (a,), "gelu", bw)

    # -- reductions --------------------------------------------------------
    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        a = self
        out = a.data.sum(axis=axis, keepdims=keepdims)

        def bw(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            a._accum(np.broadcast_to(g, a.shape))

        return Tensor._make(out, (a,), "sum", bw)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        if axis is None:
            n = self.data.size
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            n = int(np.prod([self.shape[ax] for ax in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    # -- shape ops ---------------------------------------------------------
    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self
        return Tensor._make(
            a.data.reshape(shape), (a,), "reshape", lambda g: a._accum(g.reshape(a.shape))
        )

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        a = self
        inv = np.argsort(axes)
        return Tensor._make(
            a.data.transpose(axes), (a,), "transpose", lambda g: a._accum(g.transpose(inv))
        )

    def swapaxes(self, i: int, j: int) -> "Tensor":
        axes = list(range(self.ndim))
        axes[i], axes[j] = axes[j], axes[i]
        return self.transpose(tuple(axes))

    @property
    def T(self) -> "Tensor":
        return self.transpose()

    def __getitem__(self, idx) -> "Tensor":
        a = self
        if isinstance(idx, Tensor):
            idx = idx.data.astype(np.int64)
        out = a.data[idx]

        parts = idx if isinstance(idx, tuple) else (idx,)
        basic = all(p is None or p is Ellipsis or isinstance(p, (slice, int, np.integer)) for p in parts)

        def bw(g):
            full = np.zeros_like(a.data)
            if basic:
                full[idx] += g  # basic indexing never repeats an element
            else:
                np.add.at(full, idx, g)
            a._accum(full)

        return Tensor._make(np.array(out, copy=True), (a,), "getitem", bw)


# ---------------------------------------------------------------------------
# free functions


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64, copy=True), requires_grad=requires_grad)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product ``a @ b`` with numpy broadcasting over leading dims."""
    a = a if isinstance(a, Tensor) else Tensor(a)
    b = b if isinstance(b, Tensor) else Tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError(f"matmul needs >=2-d operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def bw(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape))
        if b.requires_grad:
            if b.ndim == 2 and a.ndim > 2:
                # shared weight: one flat product instead of a batched product plus a sum
                b._accum(a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1]))
            else:
                b._accum(_unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape))

    return Tensor._make(a.data @ b.data, (a, b), "matmul", bw)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [t if isinstance(t, Tensor) else Tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def bw(g):
        for t, piece in zip(tensors, np.split(g, sizes, axis=axis)):
            t._accum(piece)

    return Tensor._make(out, tuple(tensors), "concat", bw)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [t if isinstance(t, Tensor) else Tensor(t) for t in tensors]
    out = np.stack([t.data for t in tensors], axis=axis)

    def bw(g):
        for i, t in enumerate(tensors):
            t._accum(np.take(g, i, axis=axis))

    return Tensor._make(out, tuple(tensors), "stack", bw)


def where(cond: np.ndarray, a: Tensor, b: Tensor) -> Tensor:
    """Select ``a`` where ``cond`` else ``b``; the unselected side gets exactly zero gradient."""
    a = a if isinstance(a, Tensor) else Tensor(a)
    b = b if isinstance(b, Tensor) else Tensor(b)
    cond = np.asarray(cond, dtype=bool)
    out = np.where(cond, a.data, b.data)

    def bw(g):
        if a.requires_grad:
            a._accum(_unbroadcast(np.where(cond, g, 0.0), a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(np.where(cond, 0.0, g), b.shape))

    return Tensor._make(out, (a, b), "where", bw)


def take(weight: Tensor, index: np.ndarray, axis: int = 0) -> Tensor:
    """Gather slices of ``weight`` along ``axis`` (embedding lookup when axis=0)."""
    index = np.asarray(index, dtype=np.int64)
    out = np.take(weight.data, index, axis=axis)

    def bw(g):
        full = np.zeros_like(weight.data)
        if axis == 0 and index.size <= 64:
            # few large slices: a one-hot matmul is much faster than a scatter-add
            onehot = np.zeros((index.size, weight.shape[0]))
            onehot[np.arange(index.size), index.reshape(-1)] = 1.0
            full += (onehot.T @ g.reshape(index.size, -1)).reshape(weight.shape)
        elif axis == 0:
            np.add.at(full, index, g)
        else:
            moved = np.moveaxis(full, axis, 0)
            np.add.at(moved, index, np.moveaxis(g, list(range(axis, axis + index.ndim)),
                                                 list(range(index.ndim))))
        weight._accum(full)

    return Tensor._make(out, (weight,), "take", bw)


def parameters_of(tensors: Iterable[Tensor]) -> list[Tensor]:
    return [t for t in tensors if t.requires_grad]

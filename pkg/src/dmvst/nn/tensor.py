"""Define-by-run reverse-mode autodiff over numpy float64 arrays.

Every operation on a :class:`Tensor` that tracks gradients records its parents
and a closure mapping the output gradient to parent gradients.  The graph is
rebuilt on every forward pass and walked once in reverse topological order by
:meth:`Tensor.backward`.
"""
from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import RankError, ShapeError

DTYPE = np.float64

BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def _result(data: np.ndarray, parents: tuple[Tensor, ...], backward: BackwardFn) -> Tensor:
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        out.name = None
        out.requires_grad = any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = parents
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

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
        return float(self.data)

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    def __len__(self) -> int:
        return len(self.data)

    # -- reverse pass -------------------------------------------------------------

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into ``.grad`` of every tracked leaf."""
        if self.data.size != 1:
            raise RankError(f"backward() needs a scalar, got shape {self.shape}")
        if not self.requires_grad:
            raise RankError("backward() called on a tensor that does not track gradients")

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

        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    # -- elementwise arithmetic ---------------------------------------------------

    def __add__(self, other) -> Tensor:
        other = as_tensor(other)
        a, b = self.data.shape, other.data.shape
        return Tensor._result(
            self.data + other.data,
            (self, other),
            lambda g: (_unbroadcast(g, a), _unbroadcast(g, b)),
        )

    __radd__ = __add__

    def __neg__(self) -> Tensor:
        return Tensor._result(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other) -> Tensor:
        other = as_tensor(other)
        a, b = self.data.shape, other.data.shape
        return Tensor._result(
            self.data - other.data,
            (self, other),
            lambda g: (_unbroadcast(g, a), _unbroadcast(-g, b)),
        )

    def __rsub__(self, other) -> Tensor:
        return as_tensor(other) - self

    def __mul__(self, other) -> Tensor:
        other = as_tensor(other)
        x, y = self.data, other.data
        return Tensor._result(
            x * y,
            (self, other),
            lambda g: (_unbroadcast(g * y, x.shape), _unbroadcast(g * x, y.shape)),
        )

    __rmul__ = __mul__

    def __truediv__(self, other) -> Tensor:
        other = as_tensor(other)
        x, y = self.data, other.data
        out = x / y
        return Tensor._result(
            out,
            (self, other),
            lambda g: (_unbroadcast(g / y, x.shape), _unbroadcast(-g * out / y, y.shape)),
        )

    def __rtruediv__(self, other) -> Tensor:
        return as_tensor(other) / self

    def __pow__(self, exponent: float) -> Tensor:
        if isinstance(exponent, Tensor):
            raise TypeError("only scalar exponents are supported")
        x = self.data
        return Tensor._result(
            x**exponent, (self,), lambda g: (g * exponent * x ** (exponent - 1),)
        )

    def __matmul__(self, other) -> Tensor:
        return matmul(self, other)

    # -- shape manipulation -----------------------------------------------------

    def reshape(self, *shape) -> Tensor:
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        src = self.data.shape
        return Tensor._result(self.data.reshape(shape), (self,), lambda g: (g.reshape(src),))

    def transpose(self, *axes) -> Tensor:
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        elif len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inverse = tuple(np.argsort(axes))
        return Tensor._result(
            self.data.transpose(axes), (self,), lambda g: (g.transpose(inverse),)
        )

    @property
    def T(self) -> Tensor:
        return self.transpose()

    def __getitem__(self, index) -> Tensor:
        src = self.data.shape
        basic = _is_basic_index(index)

        def backward(g):
            full = np.zeros(src, dtype=DTYPE)
            if basic:
                full[index] = g
            else:
                np.add.at(full, index, g)
            return (full,)

        return Tensor._result(self.data[index], (self,), backward)

    # -- reductions ---------------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> Tensor:
        src = self.data.shape

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, src).copy(),)

        return Tensor._result(self.data.sum(axis=axis, keepdims=keepdims), (self,), backward)

    def mean(self, axis=None, keepdims: bool = False) -> Tensor:
        if axis is None:
            n = self.data.size
        else:
            axes = (axis,) if isinstance(axis, int) else axis
            n = int(np.prod([self.data.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    # -- elementwise nonlinearities ---------------------------------------------

    def relu(self) -> Tensor:
        x = self.data
        mask = x > 0
        return Tensor._result(np.where(mask, x, 0.0), (self,), lambda g: (g * mask,))

    def sigmoid(self) -> Tensor:
        out = 0.5 * (1.0 + np.tanh(0.5 * self.data))
        return Tensor._result(out, (self,), lambda g: (g * out * (1.0 - out),))

    def tanh(self) -> Tensor:
        out = np.tanh(self.data)
        return Tensor._result(out, (self,), lambda g: (g * (1.0 - out * out),))

    def exp(self) -> Tensor:
        out = np.exp(self.data)
        return Tensor._result(out, (self,), lambda g: (g * out,))

    def log(self) -> Tensor:
        x = self.data
        return Tensor._result(np.log(x), (self,), lambda g: (g / x,))

    def abs(self) -> Tensor:
        # subgradient 0 at the kink
        x = self.data
        return Tensor._result(np.abs(x), (self,), lambda g: (g * np.sign(x),))


def _is_basic_index(index) -> bool:
    parts = index if isinstance(index, tuple) else (index,)
    return all(isinstance(p, (int, np.integer, slice)) or p is None or p is Ellipsis for p in parts)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def parameter(data, name: str | None = None) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    x, y = a.data, b.data
    if x.ndim == 0 or y.ndim == 0:
        raise ShapeError("matmul operands must be at least 1-D")
    if x.shape[-1] != y.shape[0 if y.ndim == 1 else -2]:
        raise ShapeError(f"matmul shape mismatch: {x.shape} @ {y.shape}")

    def backward(g):
        xv = x[None, :] if x.ndim == 1 else x
        yv = y[:, None] if y.ndim == 1 else y
        gv = g
        if x.ndim == 1:
            gv = np.expand_dims(gv, -2)
        if y.ndim == 1:
            gv = np.expand_dims(gv, -1)
        gx = gv @ np.swapaxes(yv, -1, -2)
        gy = np.swapaxes(xv, -1, -2) @ gv
        if x.ndim == 1:
            gx = gx.reshape(gx.shape[:-2] + (gx.shape[-1],))
        if y.ndim == 1:
            gy = gy.reshape(gy.shape[:-1])
        return _unbroadcast(gx, x.shape), _unbroadcast(gy, y.shape)

    return Tensor._result(x @ y, (a, b), backward)


def concat(tensors: Iterable, axis: int = -1) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    if not parts:
        raise ShapeError("concat of an empty list")
    datas = [p.data for p in parts]
    ax = axis % datas[0].ndim
    bounds = np.cumsum([d.shape[ax] for d in datas])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=ax))

    return Tensor._result(np.concatenate(datas, axis=ax), tuple(parts), backward)


def stack(tensors: Iterable, axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]

    def backward(g):
        return tuple(np.moveaxis(g, axis, 0))

    return Tensor._result(np.stack([p.data for p in parts], axis=axis), tuple(parts), backward)

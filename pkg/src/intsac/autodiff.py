"""Minimal define-by-run reverse-mode autodiff over float64 numpy arrays.

Every op builds a fresh node holding its payload, its parents and a closure
mapping the upstream gradient to one gradient per parent.  ``backward`` walks
the graph once in reverse topological order; calling it a second time on the
same root raises.

Parameters are leaf tensors with ``requires_grad=True``.  Their ``.grad``
slot accumulates across backward calls until an optimizer step zeros it.
"""

from __future__ import annotations

import contextlib
import math
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "ShapeError",
    "DomainError",
    "GraphReuseError",
    "tensor",
    "parameter",
    "no_grad",
    "matmul",
    "linear",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "exp",
    "log",
    "tanh",
    "relu",
    "square",
    "clip",
    "sum",
    "mean",
    "minimum",
    "inner",
    "concat",
    "softmax",
    "log_softmax",
    "detach",
    "Mlp",
    "Adam",
]


class ShapeError(ValueError):
    """Operands have incompatible shapes."""

    def __init__(self, op: str, a: tuple, b: tuple):
        super().__init__(f"{op}: incompatible shapes {a} and {b}")
        self.op = op
        self.shapes = (a, b)


class DomainError(ValueError):
    """An input lies outside the mathematical domain of an op."""


class GraphReuseError(RuntimeError):
    """backward() was called twice on the same graph."""


_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Build no graph inside the block; results are plain constants."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """A node of the differentiation graph.

    ``data`` is the float64 payload, ``grad`` the gradient slot (same shape,
    ``None`` until something flows in).
    """

    __slots__ = ("data", "grad", "requires_grad", "parents", "_backward", "_consumed", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None
        self._consumed = False
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def is_leaf(self) -> bool:
        return not self.parents

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({self.data!r}{flag})"

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _raise_item(self.shape)

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        """Accumulate d(self)/d(node) into every ancestor that requires grad."""
        if self._consumed:
            raise GraphReuseError("backward() already ran on this graph; rebuild it with a new forward pass")
        if grad is None:
            if self.data.size != 1:
                raise ShapeError("backward", self.shape, ())
            grad = np.ones_like(self.data)
        else:
            grad = np.broadcast_to(np.asarray(grad, dtype=np.float64), self.shape).copy()
        self._consumed = True

        order = _topo_order(self)
        grads: dict[int, np.ndarray] = {id(self): grad}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.is_leaf:
                if node.requires_grad:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            node.grad = g
            for parent, pg in zip(node.parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, idx):
        return _index(self, idx)


def _raise_item(shape):
    raise ShapeError("item", shape, ())


def _topo_order(root: Tensor) -> list[Tensor]:
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
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def tensor(data, requires_grad: bool = False) -> Tensor:
    return data if isinstance(data, Tensor) else Tensor(data, requires_grad=requires_grad)


def parameter(data, name: str | None = None) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.parents = parents
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# --- elementwise binary -------------------------------------------------


def _binary(op: str, fn, a: Tensor, b: Tensor) -> np.ndarray:
    try:
        return fn(a.data, b.data)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape) from None


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    sa, sb = a.shape, b.shape
    return _make(_binary("add", np.add, a, b), (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    sa, sb = a.shape, b.shape
    return _make(
        _binary("sub", np.subtract, a, b), (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb))
    )


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    ad, bd = a.data, b.data
    return _make(
        _binary("mul", np.multiply, a, b),
        (a, b),
        lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)),
    )


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    ad, bd = a.data, b.data
    out = _binary("div", np.divide, a, b)
    return _make(
        out,
        (a, b),
        lambda g: (_unbroadcast(g / bd, ad.shape), _unbroadcast(-g * out / bd, bd.shape)),
    )


def minimum(a, b) -> Tensor:
    """Elementwise min; ties send the gradient to ``a``."""
    a, b = _as_tensor(a), _as_tensor(b)
    take_a = _binary("minimum", np.less_equal, a, b)
    sa, sb = a.shape, b.shape
    return _make(
        np.where(take_a, a.data, b.data),
        (a, b),
        lambda g: (_unbroadcast(g * take_a, sa), _unbroadcast(g * ~take_a, sb)),
    )


# --- unary ----------------------------------------------------------------


def neg(a) -> Tensor:
    a = _as_tensor(a)
    return _make(-a.data, (a,), lambda g: (-g,))


def exp(a) -> Tensor:
    a = _as_tensor(a)
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = _as_tensor(a)
    if np.any(a.data <= 0):
        raise DomainError(f"log of non-positive value (min {a.data.min()!r})")
    ad = a.data
    return _make(np.log(ad), (a,), lambda g: (g / ad,))


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    out = np.tanh(a.data)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),))


def relu(a) -> Tensor:
    a = _as_tensor(a)
    mask = a.data > 0
    return _make(a.data * mask, (a,), lambda g: (g * mask,))


def square(a) -> Tensor:
    a = _as_tensor(a)
    ad = a.data
    return _make(ad * ad, (a,), lambda g: (2.0 * g * ad,))


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp to [lo, hi]; zero gradient where the clamp is active."""
    a = _as_tensor(a)
    inside = (a.data >= lo) & (a.data <= hi)
    return _make(np.clip(a.data, lo, hi), (a,), lambda g: (g * inside,))


def detach(a) -> Tensor:
    """Same payload, cut from the graph: no gradient reaches ``a`` through it."""
    a = _as_tensor(a)
    return Tensor(a.data)


# --- reductions / structure -------------------------------------------------


def sum(a, axis: int | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = _as_tensor(a)
    shape = a.shape

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape),)

    return _make(np.sum(a.data, axis=axis, keepdims=keepdims), (a,), back)


def mean(a, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    n = a.data.size if axis is None else a.shape[axis]
    return mul(sum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def inner(a, b, axis: int = -1) -> Tensor:
    """Inner product along ``axis`` (keeps that axis with length 1)."""
    return sum(mul(a, b), axis=axis, keepdims=True)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    ad, bd = a.data, b.data
    return _make(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g))


def linear(x, w, b) -> Tensor:
    """x @ w + b with ``b`` a ``[1, out]`` row; one node instead of two."""
    x, w, b = _as_tensor(x), _as_tensor(w), _as_tensor(b)
    if x.data.ndim != 2 or w.data.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeError("linear", x.shape, w.shape)
    xd, wd = x.data, w.data
    return _make(xd @ wd + b.data, (x, w, b), lambda g: (g @ wd.T, xd.T @ g, g.sum(axis=0, keepdims=True)))


def concat(parts: Sequence, axis: int = -1) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    try:
        data = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError:
        raise ShapeError("concat", parts[0].shape, parts[-1].shape) from None
    bounds = np.cumsum([p.shape[axis] for p in parts])[:-1]
    return _make(data, tuple(parts), lambda g: tuple(np.split(g, bounds, axis=axis)))


def _index(a: Tensor, idx) -> Tensor:
    shape = a.shape

    def back(g):
        full = np.zeros(shape)
        np.add.at(full, idx, g)
        return (full,)

    return _make(a.data[idx], (a,), back)


def columns(a, start: int, stop: int) -> Tensor:
    """Column slice ``a[:, start:stop]`` with a cheap backward."""
    a = _as_tensor(a)
    shape = a.shape

    def back(g):
        full = np.zeros(shape)
        full[:, start:stop] = g
        return (full,)

    return _make(a.data[:, start:stop], (a,), back)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    old = a.shape
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


# --- softmax family ---------------------------------------------------------


def _check_finite(x: np.ndarray, op: str):
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{op}: non-finite input")


def softmax(a, axis: int = -1) -> Tensor:
    """Max-shifted softmax along ``axis``."""
    a = _as_tensor(a)
    _check_finite(a.data, "softmax")
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)
    return _make(s, (a,), lambda g: (s * (g - (g * s).sum(axis=axis, keepdims=True)),))


def log_softmax(a, axis: int = -1) -> Tensor:
    a = _as_tensor(a)
    _check_finite(a.data, "log_softmax")
    z = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    out = z - lse
    p = np.exp(out)
    return _make(out, (a,), lambda g: (g - p * g.sum(axis=axis, keepdims=True),))


# --- networks ---------------------------------------------------------------

_ACTIVATIONS = {"tanh": tanh, "relu": relu, "identity": None}


def xavier_uniform(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


class Mlp:
    """Dense feed-forward net; rows of the input are independent samples.

    ``sizes`` lists every layer width including input and output.  Hidden
    layers use ``activation``; the last layer uses ``output_activation``.
    """

    def __init__(
        self,
        sizes: Sequence[int],
        rng: np.random.Generator,
        activation: str = "relu",
        output_activation: str = "identity",
        name: str = "mlp",
    ):
        if len(sizes) < 2:
            raise ValueError("an Mlp needs at least input and output sizes")
        for tag in (activation, output_activation):
            if tag not in _ACTIVATIONS:
                raise ValueError(f"unknown activation {tag!r}")
        self.sizes = tuple(int(s) for s in sizes)
        self.layers: list[tuple[Tensor, Tensor, str]] = []
        for i, (m, n) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            act = output_activation if i == len(self.sizes) - 2 else activation
            w = parameter(xavier_uniform(m, n, rng), name=f"{name}.{i}.weight")
            b = parameter(np.zeros((1, n)), name=f"{name}.{i}.bias")
            self.layers.append((w, b, act))

    def parameters(self) -> list[Tensor]:
        return [p for w, b, _ in self.layers for p in (w, b)]

    def named_parameters(self) -> dict[str, Tensor]:
        return {p.name: p for p in self.parameters()}

    def __call__(self, x, frozen: bool = False) -> Tensor:
        """Forward pass.  With ``frozen`` the parameters act as constants."""
        h = _as_tensor(x)
        if h.data.ndim != 2 or h.shape[1] != self.sizes[0]:
            raise ShapeError("Mlp", h.shape, (None, self.sizes[0]))
        for w, b, act in self.layers:
            if frozen:
                w, b = detach(w), detach(b)
            h = linear(h, w, b)
            fn = _ACTIVATIONS[act]
            if fn is not None:
                h = fn(h)
        return h

    def copy_from(self, other: "Mlp"):
        for p, q in zip(self.parameters(), other.parameters()):
            p.data = q.data.copy()


class Adam:
    """Adam with bias correction; ``step`` zeros the gradients it consumed."""

    def __init__(
        self,
        params: Iterable[Tensor],
        lr: float = 3e-4,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        self.params = list(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        if all(p.grad is None for p in self.params):
            raise RuntimeError("Adam.step() called with no gradients; run backward() first")
        b1, b2 = self.betas
        self.t += 1
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                continue
            m = self.m[i]
            v = self.v[i]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p.data = p.data - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            p.grad = None

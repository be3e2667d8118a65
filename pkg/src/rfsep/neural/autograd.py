"""A small reverse-mode autodiff over numpy arrays.

Each :class:`Tensor` records its parents and a closure that pushes its
gradient back to them.  ``backward`` walks the graph in reverse topological
order.  Only the operations needed by the separator models are provided.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager

import numpy as np

from . import functional as Fn

_state = threading.local()


def grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextmanager
def no_grad():
    """Build no graph inside the block, so intermediates are freed at once."""
    prev = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, _parents=(), name=""):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    def _accumulate(self, g):
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ValueError("grad must be given for non-scalar outputs")
            grad = np.ones_like(self.data)
        order, seen = [], set()

        def visit(t):
            if id(t) in seen or not t.requires_grad:
                return
            seen.add(id(t))
            for p in t._parents:
                visit(p)
            order.append(t)

        visit(self)
        self._accumulate(grad)
        for t in reversed(order):
            if t._backward is not None and t.grad is not None:
                t._backward(t.grad)
                # free intermediate buffers; leaves keep theirs
                if t._parents:
                    t.grad = None

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return scale(self, other)

    __rmul__ = __mul__


def _result(data, parents, backward):
    if not grad_enabled():
        return Tensor(data)
    out = Tensor(data, _parents=tuple(parents))
    if out.requires_grad:
        out._backward = backward
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch in add: {a.shape} vs {b.shape}")

    def backward(g):
        a._accumulate(g)
        b._accumulate(g)

    return _result(a.data + b.data, (a, b), backward)


def scale(a: Tensor, c: float) -> Tensor:
    return _result(a.data * c, (a,), lambda g: a._accumulate(g * c))


def conv1d(x: Tensor, w: Tensor, b: Tensor | None, dilation=1, padding="same") -> Tensor:
    y, cols = Fn.conv1d_forward(x.data, w.data, None if b is None else b.data, dilation, padding, return_cols=True)

    def backward(g):
        gx, gw, gb = Fn.conv1d_backward(g, x.data, w.data, dilation, padding, cols=cols)
        x._accumulate(gx)
        w._accumulate(gw)
        if b is not None:
            b._accumulate(gb)

    parents = (x, w) if b is None else (x, w, b)
    return _result(y, parents, backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _result(x.data * mask, (x,), lambda g: x._accumulate(g * mask))


def gated(x_f: Tensor, x_g: Tensor) -> Tensor:
    if x_f.shape != x_g.shape:
        raise ValueError(f"filter/gate shape mismatch: {x_f.shape} vs {x_g.shape}")
    t = np.tanh(x_f.data)
    s = Fn.sigmoid(x_g.data)
    y = t * s

    def backward(g):
        gf, gg = Fn.gated_unit_backward(g, x_f.data, x_g.data, cache=(t, s))
        x_f._accumulate(gf)
        x_g._accumulate(gg)

    return _result(y, (x_f, x_g), backward)


def gated_halves(z: Tensor) -> Tensor:
    """Gate with the first half of the channels as filter, the second as gate."""
    C = z.shape[1] // 2
    t = np.tanh(z.data[:, :C])
    s = Fn.sigmoid(z.data[:, C:])

    def backward(g):
        gz = np.empty_like(z.data)
        gz[:, :C] = g * (1 - t * t) * s
        gz[:, C:] = g * t * s * (1 - s)
        z._accumulate(gz)

    return _result(t * s, (z,), backward)


def split_channels(x: Tensor, at: int) -> tuple[Tensor, Tensor]:
    lo = _result(x.data[:, :at], (x,), None)
    hi = _result(x.data[:, at:], (x,), None)

    def back_lo(g):
        full = np.zeros_like(x.data)
        full[:, :at] = g
        x._accumulate(full)

    def back_hi(g):
        full = np.zeros_like(x.data)
        full[:, at:] = g
        x._accumulate(full)

    if lo.requires_grad:
        lo._backward = back_lo
        hi._backward = back_hi
    return lo, hi


def concat(xs: list[Tensor]) -> Tensor:
    sizes = np.cumsum([0] + [t.shape[1] for t in xs])

    def backward(g):
        for t, a, b in zip(xs, sizes[:-1], sizes[1:]):
            t._accumulate(g[:, a:b])

    return _result(np.concatenate([t.data for t in xs], axis=1), xs, backward)


def avg_pool(x: Tensor, factor: int) -> Tensor:
    return _result(Fn.avg_pool(x.data, factor), (x,), lambda g: x._accumulate(Fn.avg_pool_backward(g, factor)))


def upsample(x: Tensor, factor: int) -> Tensor:
    return _result(
        Fn.upsample_nearest(x.data, factor), (x,), lambda g: x._accumulate(Fn.upsample_nearest_backward(g, factor))
    )


def mse(pred: Tensor, target) -> Tensor:
    value, grad = Fn.mse_loss(pred.data, np.asarray(target))
    return _result(np.asarray(value, dtype=pred.dtype), (pred,), lambda g: pred._accumulate(grad * g))

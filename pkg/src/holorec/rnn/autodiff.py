"""Reverse-mode automatic differentiation over float64 numpy arrays.

A small tape: every operation returns a :class:`Tensor` holding the value,
its parents, and a closure that routes the incoming gradient to them.
``Tensor.backward()`` runs the closures in reverse topological order.
Only the operations needed by the reconstruction networks and their
training losses are provided; each backward rule is exercised against
central finite differences in the test suite.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class Tensor:
    """A node in the computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad) or any(
            p.requires_grad for p in parents)
        self._parents = parents if self.requires_grad else ()
        self._backward = backward if self.requires_grad else None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        order, seen = [], set()

        def visit(node):
            if id(node) in seen:
                return
            seen.add(id(node))
            for p in node._parents:
                visit(p)
            order.append(node)

        visit(self)
        self._accumulate(np.ones_like(self.data))
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    # ---------------------------------------------------------- arithmetic

    def __add__(self, other):
        other = _wrap(other)
        out_data = self.data + other.data

        def bwd(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g, other.data.shape))

        return Tensor(out_data, parents=(self, other), backward=bwd)

    __radd__ = __add__

    def __neg__(self):
        def bwd(g):
            self._accumulate(-g)

        return Tensor(-self.data, parents=(self,), backward=bwd)

    def __sub__(self, other):
        return self + (-_wrap(other))

    def __rsub__(self, other):
        return _wrap(other) + (-self)

    def __mul__(self, other):
        other = _wrap(other)
        out_data = self.data * other.data

        def bwd(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g * other.data, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g * self.data, other.data.shape))

        return Tensor(out_data, parents=(self, other), backward=bwd)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _wrap(other)
        out_data = self.data / other.data

        def bwd(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g / other.data, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(
                    -g * self.data / other.data ** 2, other.data.shape))

        return Tensor(out_data, parents=(self, other), backward=bwd)

    def __pow__(self, exponent: float):
        exponent = float(exponent)
        out_data = self.data ** exponent

        def bwd(g):
            self._accumulate(g * exponent * self.data ** (exponent - 1.0))

        return Tensor(out_data, parents=(self,), backward=bwd)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _unbroadcast(g, shape):
    """Sum gradient over axes that were broadcast in the forward pass."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ------------------------------------------------------------- elementwise

def sigmoid(x: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-x.data))

    def bwd(g):
        x._accumulate(g * s * (1.0 - s))

    return Tensor(s, parents=(x,), backward=bwd)


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)

    def bwd(g):
        x._accumulate(g * (1.0 - t * t))

    return Tensor(t, parents=(x,), backward=bwd)


def leaky_relu(x: Tensor, slope: float = 0.1) -> Tensor:
    mask = x.data > 0
    out = np.where(mask, x.data, slope * x.data)

    def bwd(g):
        x._accumulate(g * np.where(mask, 1.0, slope))

    return Tensor(out, parents=(x,), backward=bwd)


def absolute(x: Tensor) -> Tensor:
    sign = np.sign(x.data)

    def bwd(g):
        x._accumulate(g * sign)

    return Tensor(np.abs(x.data), parents=(x,), backward=bwd)


def sqrt(x: Tensor) -> Tensor:
    root = np.sqrt(x.data)

    def bwd(g):
        x._accumulate(g * 0.5 / root)

    return Tensor(root, parents=(x,), backward=bwd)


def clamp_min(x: Tensor, lo: float) -> Tensor:
    mask = x.data > lo
    out = np.where(mask, x.data, lo)

    def bwd(g):
        x._accumulate(g * mask)

    return Tensor(out, parents=(x,), backward=bwd)


# -------------------------------------------------------------- reductions

def total(x: Tensor) -> Tensor:
    def bwd(g):
        x._accumulate(np.full_like(x.data, float(g)))

    return Tensor(x.data.sum(), parents=(x,), backward=bwd)


def mean(x: Tensor) -> Tensor:
    n = x.data.size

    def bwd(g):
        x._accumulate(np.full_like(x.data, float(g) / n))

    return Tensor(x.data.mean(), parents=(x,), backward=bwd)


# ----------------------------------------------------------- shape plumbing

def concat_channels(tensors) -> Tensor:
    datas = [t.data for t in tensors]
    out = np.concatenate(datas, axis=1)
    splits = np.cumsum([d.shape[1] for d in datas])[:-1]

    def bwd(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=1)):
            if t.requires_grad:
                t._accumulate(piece)

    return Tensor(out, parents=tuple(tensors), backward=bwd)


def reshape(x: Tensor, shape) -> Tensor:
    old = x.data.shape

    def bwd(g):
        x._accumulate(g.reshape(old))

    return Tensor(x.data.reshape(shape), parents=(x,), backward=bwd)


def pad_symmetric2d(x: Tensor, pad: int) -> Tensor:
    """Edge-including reflection padding of the two trailing axes."""
    h, w = x.data.shape[-2:]
    idx_h = np.pad(np.arange(h), pad, mode="symmetric")
    idx_w = np.pad(np.arange(w), pad, mode="symmetric")
    out = x.data[..., idx_h, :][..., idx_w]

    def bwd(g):
        gh = np.zeros(x.data.shape[:-2] + (h, len(idx_w)), dtype=np.float64)
        np.add.at(gh, (..., idx_h, slice(None)), g)
        gx = np.zeros_like(x.data)
        np.add.at(gx, (..., idx_w), gh)
        x._accumulate(gx)

    return Tensor(out, parents=(x,), backward=bwd)


# ------------------------------------------------------------ convolutions

def conv2d(x: Tensor, w: Tensor, b: Tensor, dilation: int = 1) -> Tensor:
    """Same-size cross-correlation with zero padding.

    x: (B, Cin, H, W); w: (Cout, Cin, k, k); b: (Cout,). The effective
    receptive span is k + (k-1)(dilation-1). Implemented as im2col plus
    one matrix product.
    """
    co, ci, kh, kw = w.data.shape
    if x.data.ndim != 4 or x.data.shape[1] != ci:
        raise ValueError(f"conv2d input {x.data.shape} does not match "
                         f"weights {w.data.shape}")
    nb, _, hh, ww = x.data.shape
    d = int(dilation)
    ph, pw = d * (kh - 1) // 2, d * (kw - 1) // 2
    if ph or pw:
        xp = np.zeros((nb, ci, hh + 2 * ph, ww + 2 * pw), dtype=np.float64)
        xp[:, :, ph:ph + hh, pw:pw + ww] = x.data
    else:
        xp = x.data
    win = sliding_window_view(xp, (d * (kh - 1) + 1, d * (kw - 1) + 1),
                              axis=(2, 3))[..., ::d, ::d]
    col = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)) \
        .reshape(nb * hh * ww, ci * kh * kw)
    wmat = w.data.reshape(co, ci * kh * kw)
    out = (col @ wmat.T).reshape(nb, hh, ww, co).transpose(0, 3, 1, 2) \
        + b.data[None, :, None, None]

    def bwd(g):
        gcol = np.ascontiguousarray(g.transpose(0, 2, 3, 1)) \
            .reshape(nb * hh * ww, co)
        if b.requires_grad:
            b._accumulate(g.sum(axis=(0, 2, 3)))
        if w.requires_grad:
            w._accumulate((gcol.T @ col).reshape(co, ci, kh, kw))
        if x.requires_grad:
            gx6 = (gcol @ wmat).reshape(nb, hh, ww, ci, kh, kw)
            gxp = np.zeros((nb, ci, hh + 2 * ph, ww + 2 * pw), dtype=np.float64)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i * d:i * d + hh, j * d:j * d + ww] += \
                        gx6[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            x._accumulate(gxp[:, :, ph:ph + hh, pw:pw + ww] if ph or pw else gxp)

    return Tensor(out, parents=(x, w, b), backward=bwd)


def window_filter_valid(x: Tensor, kernel: np.ndarray) -> Tensor:
    """Per-channel valid cross-correlation with a fixed (non-trained) kernel."""
    kh, kw = kernel.shape
    win = sliding_window_view(x.data, (kh, kw), axis=(2, 3))
    out = np.einsum("bchwij,ij->bchw", win, kernel, optimize=True)

    def bwd(g):
        gp = np.pad(g, ((0, 0), (0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
        gwin = sliding_window_view(gp, (kh, kw), axis=(2, 3))
        x._accumulate(np.einsum("bchwij,ij->bchw", gwin,
                                kernel[::-1, ::-1], optimize=True))

    return Tensor(out, parents=(x,), backward=bwd)


# ----------------------------------------------------------------- pooling

def avg_pool2x(x: Tensor) -> Tensor:
    b, c, h, w = x.data.shape
    if h % 2 or w % 2:
        raise ValueError(f"avg_pool2x needs even spatial dims, got {h}x{w}")
    out = x.data.reshape(b, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))

    def bwd(g):
        x._accumulate(np.repeat(np.repeat(g, 2, axis=2), 2, axis=3) * 0.25)

    return Tensor(out, parents=(x,), backward=bwd)


def upsample_nearest2x(x: Tensor) -> Tensor:
    out = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)

    def bwd(g):
        b, c, h, w = x.data.shape
        x._accumulate(g.reshape(b, c, h, 2, w, 2).sum(axis=(3, 5)))

    return Tensor(out, parents=(x,), backward=bwd)


# ------------------------------------------------------------------- dense

def dense(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x: (B, F); w: (O, F); b: (O,)."""
    out = x.data @ w.data.T + b.data[None, :]

    def bwd(g):
        if b.requires_grad:
            b._accumulate(g.sum(axis=0))
        if w.requires_grad:
            w._accumulate(g.T @ x.data)
        if x.requires_grad:
            x._accumulate(g @ w.data)

    return Tensor(out, parents=(x, w, b), backward=bwd)

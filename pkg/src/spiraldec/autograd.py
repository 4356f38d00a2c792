"""Minimal reverse-mode autodiff over float64 numpy arrays.

A fixed set of primitives with hand-written backward rules, enough to
express the decoder and every training loss. Leaf parameters accumulate
gradients additively; intermediate gradients are reset on every backward
pass, so two backward calls without a reset yield exactly twice the leaf
gradient of one.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NonFiniteInput, ShapeMismatch

# Test hook: name of a primitive whose backward rule is deliberately
# corrupted (used by the gradient-check CLI to prove it catches bugs).
_BACKWARD_FAULT: str | None = None


def set_backward_fault(name: str | None) -> None:
    global _BACKWARD_FAULT
    _BACKWARD_FAULT = name


def _faulted(name: str, g: np.ndarray) -> np.ndarray:
    if _BACKWARD_FAULT == name:
        return g * 1.01
    return g


def _sum_to_shape(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _accum(t: "Tensor", delta: np.ndarray) -> None:
    """Add ``delta`` into ``t.grad``, allocating lazily on first write."""
    if t.grad is None:
        t.grad = np.array(delta, dtype=np.float64)  # own the buffer
    else:
        t.grad += delta


class Tensor:
    """Dense float64 array with an optional backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None

    # -- graph plumbing -------------------------------------------------

    @classmethod
    def _from_op(cls, data, parents, backward):
        keep = tuple(p for p in parents if p.requires_grad)
        if not keep:
            return cls(data)
        out = cls(data, requires_grad=True)
        out._parents = keep
        out._backward = backward
        return out

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        else:
            self.grad[...] = 0.0

    def backward(self, seed=None) -> None:
        """Accumulate d(self)/d(leaf) into every reachable leaf's grad."""
        if not self.requires_grad:
            return
        if seed is None:
            if self.data.size != 1:
                raise ShapeMismatch("backward() without seed needs a scalar")
            seed = np.ones_like(self.data)
        else:
            seed = np.asarray(seed, dtype=np.float64)
        topo: list[Tensor] = []
        seen = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        for node in topo:
            if not node.is_leaf:
                node.grad = None  # reset intermediates for this pass
        if self.is_leaf:
            _accum(self, seed.reshape(self.shape))
        else:
            self.grad = seed.reshape(self.shape).copy()
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- arithmetic primitives -------------------------------------------

    @staticmethod
    def _coerce(x) -> "Tensor":
        return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))

    def __add__(self, other):
        a, b = self, Tensor._coerce(other)
        out_data = a.data + b.data

        def backward(g):
            if a.requires_grad:
                _accum(a, _sum_to_shape(g, a.shape))
            if b.requires_grad:
                _accum(b, _sum_to_shape(g, b.shape))
        return Tensor._from_op(out_data, (a, b), backward)

    __radd__ = __add__

    def __neg__(self):
        a = self

        def backward(g):
            _accum(a, -g)
        return Tensor._from_op(-a.data, (a,), backward)

    def __sub__(self, other):
        return self + (-Tensor._coerce(other))

    def __rsub__(self, other):
        return Tensor._coerce(other) + (-self)

    def __mul__(self, other):
        a, b = self, Tensor._coerce(other)
        out_data = a.data * b.data

        def backward(g):
            if a.requires_grad:
                _accum(a, _sum_to_shape(g * b.data, a.shape))
            if b.requires_grad:
                _accum(b, _sum_to_shape(g * a.data, b.shape))
        return Tensor._from_op(out_data, (a, b), backward)

    __rmul__ = __mul__

    def __truediv__(self, other):
        a, b = self, Tensor._coerce(other)
        out_data = a.data / b.data

        def backward(g):
            if a.requires_grad:
                _accum(a, _sum_to_shape(g / b.data, a.shape))
            if b.requires_grad:
                _accum(b, _sum_to_shape(-g * a.data / (b.data * b.data), b.shape))
        return Tensor._from_op(out_data, (a, b), backward)

    def __rtruediv__(self, other):
        return Tensor._coerce(other) / self

    def __pow__(self, exponent: float):
        a = self
        p = float(exponent)
        out_data = a.data ** p

        def backward(g):
            _accum(a, g * (p * a.data ** (p - 1.0)))
        return Tensor._from_op(out_data, (a,), backward)

    def __matmul__(self, other):
        a, b = self, Tensor._coerce(other)
        if a.data.ndim == 0 or b.data.ndim == 0:
            raise ShapeMismatch("matmul needs at least 1-d operands")
        if a.data.shape[-1] != b.data.shape[-2 if b.data.ndim > 1 else 0]:
            raise ShapeMismatch(f"matmul inner dims disagree: {a.shape} @ {b.shape}")
        out_data = a.data @ b.data

        def backward(g):
            g = _faulted("matmul", g)
            if a.requires_grad:
                ga = g @ np.swapaxes(b.data, -1, -2) if b.data.ndim > 1 else np.expand_dims(g, -1) * b.data
                _accum(a, _sum_to_shape(ga, a.shape))
            if b.requires_grad:
                if a.data.ndim > 1:
                    gb = np.swapaxes(a.data, -1, -2) @ g
                else:
                    gb = np.expand_dims(a.data, -1) * np.expand_dims(g, -2)
                _accum(b, _sum_to_shape(gb, b.shape))
        return Tensor._from_op(out_data, (a, b), backward)

    # -- shape primitives --------------------------------------------------

    def reshape(self, *shape):
        a = self
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out_data = a.data.reshape(shape)

        def backward(g):
            _accum(a, g.reshape(a.shape))
        return Tensor._from_op(out_data, (a,), backward)

    def take_rows(self, indices):
        """Gather along axis 0; output shape = indices.shape + data.shape[1:]."""
        a = self
        idx = np.asarray(indices, dtype=np.int64)
        out_data = a.data[idx]

        def backward(g):
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            np.add.at(a.grad, idx, g)
        return Tensor._from_op(out_data, (a,), backward)

    def slice_last(self, j: int):
        """Select one index of the last axis."""
        a = self
        out_data = a.data[..., j]

        def backward(g):
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            a.grad[..., j] += g
        return Tensor._from_op(out_data, (a,), backward)

    # -- reductions and nonlinearities ------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        a = self
        out_data = a.data.sum(axis=axis, keepdims=keepdims)

        def backward(g):
            if axis is None:
                _accum(a, np.broadcast_to(g, a.shape))
            else:
                gg = g if keepdims else np.expand_dims(g, axis)
                _accum(a, np.broadcast_to(gg, a.shape))
        return Tensor._from_op(out_data, (a,), backward)

    def mean(self, axis=None, keepdims: bool = False):
        n = self.data.size if axis is None else (
            math.prod(self.data.shape[ax] for ax in (axis if isinstance(axis, tuple) else (axis,))))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def abs(self):
        a = self
        out_data = np.abs(a.data)

        def backward(g):
            # subgradient 0 at the kink
            _accum(a, g * np.sign(a.data))
        return Tensor._from_op(out_data, (a,), backward)

    def sqrt(self):
        a = self
        out_data = np.sqrt(a.data)

        def backward(g):
            _accum(a, g * (0.5 / out_data))
        return Tensor._from_op(out_data, (a,), backward)

    def clip(self, lo: float, hi: float):
        a = self
        out_data = np.clip(a.data, lo, hi)

        def backward(g):
            _accum(a, g * ((a.data > lo) & (a.data < hi)))
        return Tensor._from_op(out_data, (a,), backward)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


class Param(Tensor):
    """Named trainable leaf tensor."""

    __slots__ = ("name",)

    def __init__(self, data, name: str = ""):
        super().__init__(data, requires_grad=True)
        self.grad = np.zeros_like(self.data)
        self.name = name

    @property
    def value(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        return f"Param({self.name!r}, shape={self.shape})"


# -- numeric-core op surface ----------------------------------------------

def relu(x: Tensor) -> Tensor:
    out_data = np.maximum(x.data, 0.0)

    def backward(g):
        # subgradient 0 at x == 0
        _accum(x, _faulted("relu", g) * (x.data > 0.0))
    return Tensor._from_op(out_data, (x,), backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Max-shifted softmax along ``axis``; rows sum to one."""
    if not np.isfinite(x.data).all():
        raise NonFiniteInput("softmax input contains non-finite values")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        g = _faulted("softmax", g)
        _accum(x, y * (g - (g * y).sum(axis=axis, keepdims=True)))
    return Tensor._from_op(y, (x,), backward)


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Affine map over the last axis: ``x @ w + b``."""
    if x.shape[-1] != w.shape[0]:
        raise ShapeMismatch(f"linear: input width {x.shape[-1]} != weight rows {w.shape[0]}")
    if b.shape != (w.shape[1],):
        raise ShapeMismatch(f"linear: bias shape {b.shape} != ({w.shape[1]},)")
    return x @ w + b


def l1_loss(a: Tensor, b: Tensor) -> Tensor:
    """Mean absolute deviation over all elements."""
    a = Tensor._coerce(a)
    b = Tensor._coerce(b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"l1_loss shapes differ: {a.shape} vs {b.shape}")
    return (a - b).abs().mean()


def l2_norm(x: Tensor, axis: int = -1) -> Tensor:
    """Euclidean norm along ``axis`` (gradient undefined at exactly zero)."""
    return (x * x).sum(axis=axis).sqrt()


def glorot_uniform(rng: np.random.Generator, shape: tuple, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)

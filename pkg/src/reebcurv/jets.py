"""Vectorized second-order jets (value, gradient, Hessian) over batches of points.

A Jet2 carries the value of a scalar quantity at N points together with its
first and (optionally) second partial derivatives with respect to the three
chart coordinates.  Shapes: val (N,), grad (3, N), hess (3, 3, N).  Arithmetic
propagates derivatives by the product/quotient/chain rules, so any algebraic
combination of jet-backed fields again has exact derivative data.

All operations are pure and safe for concurrent read-only use.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Jet2", "jet_where"]


def _outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # (3,N),(3,N) -> (3,3,N)
    return np.einsum("i...,j...->ij...", a, b)


class Jet2:
    """Value plus first/second partials at a batch of points.

    ``order`` is 0 (value only), 1 (value+grad) or 2 (value+grad+hess).
    Operations use the lowest common order of their operands.
    """

    __slots__ = ("val", "grad", "hess")

    def __init__(self, val, grad=None, hess=None):
        self.val = np.asarray(val, dtype=float)
        self.grad = None if grad is None else np.asarray(grad, dtype=float)
        self.hess = None if hess is None else np.asarray(hess, dtype=float)

    @property
    def order(self) -> int:
        if self.hess is not None:
            return 2
        if self.grad is not None:
            return 1
        return 0

    @staticmethod
    def constant(c, like, order: int = 2) -> "Jet2":
        """A constant jet broadcast to the shape of ``like`` (array or Jet2)."""
        ref = like.val if isinstance(like, Jet2) else np.asarray(like)
        val = np.full(ref.shape, float(c))
        grad = np.zeros((3,) + ref.shape) if order >= 1 else None
        hess = np.zeros((3, 3) + ref.shape) if order >= 2 else None
        return Jet2(val, grad, hess)

    def _coerce(self, other) -> "Jet2":
        if isinstance(other, Jet2):
            return other
        return Jet2.constant(other, self, order=self.order)

    # -- ring operations ---------------------------------------------------

    def __neg__(self):
        return Jet2(
            -self.val,
            None if self.grad is None else -self.grad,
            None if self.hess is None else -self.hess,
        )

    def __add__(self, other):
        o = self._coerce(other)
        n = min(self.order, o.order)
        return Jet2(
            self.val + o.val,
            self.grad + o.grad if n >= 1 else None,
            self.hess + o.hess if n >= 2 else None,
        )

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        n = min(self.order, o.order)
        val = self.val * o.val
        grad = hess = None
        if n >= 1:
            grad = self.grad * o.val + o.grad * self.val
        if n >= 2:
            hess = (
                self.hess * o.val
                + o.hess * self.val
                + _outer(self.grad, o.grad)
                + _outer(o.grad, self.grad)
            )
        return Jet2(val, grad, hess)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        return self * o._reciprocal()

    def __rtruediv__(self, other):
        return self._reciprocal() * other

    def _reciprocal(self):
        v = self.val
        return self._chain(1.0 / v, -1.0 / v**2, 2.0 / v**3)

    def __pow__(self, p):
        v = self.val
        if p == 2:
            return self * self
        return self._chain(v**p, p * v ** (p - 1), p * (p - 1) * v ** (p - 2))

    # -- chain rule through a scalar function ------------------------------

    def _chain(self, f0, f1, f2) -> "Jet2":
        grad = hess = None
        if self.order >= 1:
            grad = f1 * self.grad
        if self.order >= 2:
            hess = f1 * self.hess + f2 * _outer(self.grad, self.grad)
        return Jet2(f0, grad, hess)

    def sqrt(self):
        r = np.sqrt(self.val)
        return self._chain(r, 0.5 / r, -0.25 / (r * self.val))

    def exp(self):
        e = np.exp(self.val)
        return self._chain(e, e, e)

    def log(self):
        v = self.val
        return self._chain(np.log(v), 1.0 / v, -1.0 / v**2)

    def sin(self):
        s, c = np.sin(self.val), np.cos(self.val)
        return self._chain(s, c, -s)

    def cos(self):
        s, c = np.sin(self.val), np.cos(self.val)
        return self._chain(c, -s, -c)

    # -- extraction --------------------------------------------------------

    def directional(self, direction: np.ndarray) -> np.ndarray:
        """Directional derivative d^i (partial_i f) for direction shape (3,N)."""
        return np.einsum("i...,i...->...", np.asarray(direction, dtype=float), self.grad)

    def copy(self):
        return Jet2(
            self.val.copy(),
            None if self.grad is None else self.grad.copy(),
            None if self.hess is None else self.hess.copy(),
        )


def jet_where(mask: np.ndarray, a: Jet2, b: Jet2) -> Jet2:
    """Pointwise select between two jets (mask True -> a)."""
    n = min(a.order, b.order)
    val = np.where(mask, a.val, b.val)
    grad = np.where(mask, a.grad, b.grad) if n >= 1 else None
    hess = np.where(mask, a.hess, b.hess) if n >= 2 else None
    return Jet2(val, grad, hess)

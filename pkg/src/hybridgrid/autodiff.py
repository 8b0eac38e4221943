"""Forward-mode automatic differentiation.

:class:`Dual` carries a value and a tangent.  The tangent may be a float
(one direction per pass) or a numpy vector (one pass carrying several seed
directions at once).  :class:`Jet` additionally carries a dense Hessian and
is used for Newton steps.  Both only need ``+ - * /`` and integer powers,
which is all the polynomial power-flow model uses.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np


class Dual:
    __slots__ = ("v", "d")

    def __init__(self, value, tangent=0.0):
        self.v = value
        self.d = tangent

    def __repr__(self):
        return f"Dual({self.v!r}, {self.d!r})"

    def __add__(self, o):
        if isinstance(o, Dual):
            return Dual(self.v + o.v, self.d + o.d)
        return Dual(self.v + o, self.d)

    __radd__ = __add__

    def __sub__(self, o):
        if isinstance(o, Dual):
            return Dual(self.v - o.v, self.d - o.d)
        return Dual(self.v - o, self.d)

    def __rsub__(self, o):
        return Dual(o - self.v, -self.d)

    def __neg__(self):
        return Dual(-self.v, -self.d)

    def __mul__(self, o):
        if isinstance(o, Dual):
            return Dual(self.v * o.v, self.d * o.v + self.v * o.d)
        return Dual(self.v * o, self.d * o)

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, Dual):
            return Dual(self.v / o.v, (self.d * o.v - self.v * o.d) / (o.v * o.v))
        return Dual(self.v / o, self.d / o)

    def __rtruediv__(self, o):
        return Dual(o / self.v, -o * self.d / (self.v * self.v))

    def __pow__(self, p):
        if p == 0:
            return Dual(1.0, self.d * 0.0)
        return Dual(self.v**p, p * self.v ** (p - 1) * self.d)

    def sqrt(self):
        r = math.sqrt(self.v)
        return Dual(r, self.d / (2.0 * r))


class Jet:
    """Value, gradient and Hessian of a scalar in ``n`` seed variables.

    ``h`` is ``None`` while the jet is affine in the seeds.
    """

    __slots__ = ("v", "g", "h")

    def __init__(self, value, grad, hess=None):
        self.v = value
        self.g = grad
        self.h = hess

    def __add__(self, o):
        if isinstance(o, Jet):
            if self.h is None:
                h = o.h
            elif o.h is None:
                h = self.h
            else:
                h = self.h + o.h
            return Jet(self.v + o.v, self.g + o.g, h)
        return Jet(self.v + o, self.g, self.h)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.v, -self.g, None if self.h is None else -self.h)

    def __sub__(self, o):
        return self + (-o)

    def __rsub__(self, o):
        return (-self) + o

    def _scale(self, c):
        return Jet(self.v * c, self.g * c, None if self.h is None else self.h * c)

    def __mul__(self, o):
        if not isinstance(o, Jet):
            return self._scale(o)
        a, b = self.v, o.v
        cross = np.outer(self.g, o.g)
        h = cross + cross.T
        if self.h is not None:
            h += b * self.h
        if o.h is not None:
            h += a * o.h
        return Jet(a * b, a * o.g + b * self.g, h)

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, Jet):
            raise TypeError("division by a Jet is not supported")
        return self._scale(1.0 / o)

    def __pow__(self, p):
        if not isinstance(p, int) or p < 0:
            raise TypeError("Jet supports non-negative integer powers only")
        if p == 0:
            return Jet(1.0, self.g * 0.0)
        if p == 1:
            return self
        v = self.v
        d1 = p * v ** (p - 1)
        h = p * (p - 1) * v ** (p - 2) * np.outer(self.g, self.g)
        if self.h is not None:
            h += d1 * self.h
        return Jet(v**p, d1 * self.g, h)

    def hessian(self, n: int) -> np.ndarray:
        return np.zeros((n, n)) if self.h is None else self.h


def seed_duals(x: Sequence[float], directions: np.ndarray | None = None) -> list[Dual]:
    """Duals for ``x``; column ``j`` of ``directions`` is the tangent of pass ``j``.

    With ``directions=None`` the identity is used, so each output's tangent is
    its full gradient.
    """
    x = np.asarray(x, dtype=float)
    if directions is None:
        directions = np.eye(x.size)
    directions = np.asarray(directions, dtype=float)
    if directions.ndim == 1:
        return [Dual(float(xi), float(di)) for xi, di in zip(x, directions)]
    return [Dual(float(xi), directions[i].copy()) for i, xi in enumerate(x)]


def seed_jets(x: Sequence[float]) -> list[Jet]:
    x = np.asarray(x, dtype=float)
    eye = np.eye(x.size)
    return [Jet(float(xi), eye[i]) for i, xi in enumerate(x)]


def tangent(value, n: int) -> np.ndarray:
    """Tangent vector of an output; constants have a zero tangent."""
    if isinstance(value, Dual):
        d = np.asarray(value.d, dtype=float)
        return np.broadcast_to(d, (n,)).copy() if d.ndim == 0 else d
    return np.zeros(n)


def gradient(fn: Callable[[list], object], x: Sequence[float]) -> np.ndarray:
    """Gradient of a scalar function by one vector-seeded forward pass."""
    n = len(x)
    return tangent(fn(seed_duals(x)), n)


def directional_derivative(fn: Callable[[list], object], x: Sequence[float],
                           direction: Sequence[float]) -> float:
    out = fn(seed_duals(x, np.asarray(direction, dtype=float)))
    return float(out.d) if isinstance(out, Dual) else 0.0

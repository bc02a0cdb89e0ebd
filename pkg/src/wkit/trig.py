"""Real trigonometric polynomials in one angle, with exact derivatives and products."""
from __future__ import annotations

import numpy as np


class TrigPoly:
    """``a[0] + sum_k a[k] cos(k t) + b[k] sin(k t)`` for ``k = 1..n``.

    ``a`` and ``b`` have equal length ``n + 1``; ``b[0]`` is ignored and kept 0.
    """

    def __init__(self, a, b=None):
        a = np.asarray(a, dtype=float).ravel()
        b = np.zeros_like(a) if b is None else np.asarray(b, dtype=float).ravel()
        n = max(a.size, b.size)
        self.a = np.zeros(n)
        self.b = np.zeros(n)
        self.a[:a.size] = a
        self.b[:b.size] = b
        self.b[0] = 0.0

    @property
    def degree(self):
        return self.a.size - 1

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = np.arange(self.a.size)
        kt = np.multiply.outer(t, k)
        return np.cos(kt) @ self.a + np.sin(kt) @ self.b

    def derivative(self, order=1):
        a, b = self.a.copy(), self.b.copy()
        k = np.arange(a.size, dtype=float)
        for _ in range(order):
            a, b = k * b, -k * a
        return TrigPoly(a, b)

    def _pad(self, n):
        a = np.zeros(n)
        b = np.zeros(n)
        a[:self.a.size] = self.a
        b[:self.b.size] = self.b
        return a, b

    def __add__(self, other):
        if not isinstance(other, TrigPoly):
            other = TrigPoly([float(other)])
        n = max(self.a.size, other.a.size)
        a1, b1 = self._pad(n)
        a2, b2 = other._pad(n)
        return TrigPoly(a1 + a2, b1 + b2)

    __radd__ = __add__

    def __neg__(self):
        return TrigPoly(-self.a, -self.b)

    def __sub__(self, other):
        return self + (-other if isinstance(other, TrigPoly) else -float(other))

    def __mul__(self, other):
        if not isinstance(other, TrigPoly):
            return TrigPoly(self.a * float(other), self.b * float(other))
        # product-to-sum on complex coefficients c_k, k = -n..n
        c1 = self._complex()
        c2 = other._complex()
        c = np.convolve(c1, c2)
        return TrigPoly._from_complex(c)

    __rmul__ = __mul__

    def _complex(self):
        n = self.a.size - 1
        c = np.zeros(2 * n + 1, dtype=complex)
        c[n] = self.a[0]
        for k in range(1, n + 1):
            c[n + k] = 0.5 * (self.a[k] - 1j * self.b[k])
            c[n - k] = 0.5 * (self.a[k] + 1j * self.b[k])
        return c

    @staticmethod
    def _from_complex(c):
        n = (c.size - 1) // 2
        a = np.zeros(n + 1)
        b = np.zeros(n + 1)
        a[0] = c[n].real
        for k in range(1, n + 1):
            a[k] = (c[n + k] + c[n - k]).real
            b[k] = (1j * (c[n + k] - c[n - k])).real
        return TrigPoly(a, b)

    @classmethod
    def random(cls, degree, rng, scale=1.0):
        a = rng.uniform(-1, 1, degree + 1) * scale
        b = rng.uniform(-1, 1, degree + 1) * scale
        return cls(a, b)

    def to_dict(self):
        return {"a": self.a.tolist(), "b": self.b.tolist()}

    def __repr__(self):
        return f"TrigPoly(a={self.a.tolist()}, b={self.b.tolist()})"

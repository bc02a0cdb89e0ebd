import math

import numpy as np
import sympy as sp
from hypothesis import given, settings, strategies as st

from wkit.trig import TrigPoly

t = sp.symbols("t")


def symbolic(p):
    return sum(p.a[k] * sp.cos(k * t) + p.b[k] * sp.sin(k * t) for k in range(p.a.size))


coeffs = st.lists(st.floats(-2, 2), min_size=1, max_size=4)
grid = np.linspace(0, 2 * math.pi, 37)


def test_evaluation():
    p = TrigPoly([1.0, 2.0], [0.0, -1.0])
    np.testing.assert_allclose(p(grid), 1 + 2 * np.cos(grid) - np.sin(grid), atol=1e-14)
    assert p.degree == 1
    assert TrigPoly([1.0], [5.0]).b[0] == 0.0


@settings(max_examples=30, deadline=None)
@given(coeffs, coeffs, st.integers(1, 3))
def test_derivative_matches_sympy(a, b, order):
    p = TrigPoly(a, b)
    want = sp.lambdify(t, sp.diff(symbolic(p), t, order), "numpy")(grid)
    np.testing.assert_allclose(p.derivative(order)(grid), np.broadcast_to(want, grid.shape), atol=1e-11)


@settings(max_examples=30, deadline=None)
@given(coeffs, coeffs, coeffs, coeffs)
def test_ring_operations(a1, b1, a2, b2):
    p, q = TrigPoly(a1, b1), TrigPoly(a2, b2)
    np.testing.assert_allclose((p * q)(grid), p(grid) * q(grid), atol=1e-11)
    np.testing.assert_allclose((p + q)(grid), p(grid) + q(grid), atol=1e-12)
    np.testing.assert_allclose((p - q)(grid), p(grid) - q(grid), atol=1e-12)
    np.testing.assert_allclose((2.5 * p)(grid), 2.5 * p(grid), atol=1e-12)
    np.testing.assert_allclose((p + 1.0)(grid), p(grid) + 1.0, atol=1e-12)


def test_random_and_dict():
    p = TrigPoly.random(3, np.random.default_rng(0))
    assert p.degree == 3
    d = p.to_dict()
    np.testing.assert_array_equal(TrigPoly(d["a"], d["b"])(grid), p(grid))

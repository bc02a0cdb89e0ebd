import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wkit import kernels
from wkit.domains import koch_vertices
from wkit.jets import index_table
from wkit.kernels import numpy_impl, numba_impl

pytestmark = pytest.mark.skipif(numba_impl is None, reason="numba not importable")


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(0, 3))
def test_remainder_ratios_backends_agree(seed, d, m):
    rng = np.random.default_rng(seed)
    tab = index_table(d, m)
    pts = rng.uniform(-1, 1, (30, d))
    vals = rng.standard_normal((30, len(tab.alphas)))
    pi = rng.integers(0, 30, 200)
    pj = rng.integers(0, 30, 200)
    args = (pts, vals, pi, pj, tab.exps, tab.inv_fact, tab.orders,
            tab.shift_ptr, tab.shift_sum, tab.shift_beta, m)
    r1, a1 = numpy_impl.remainder_ratios(*args)
    r2, a2 = numba_impl.remainder_ratios(*args)
    np.testing.assert_allclose(r1, r2, rtol=1e-10, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(0, 3))
def test_taylor_eval_backends_agree(seed, d, m):
    rng = np.random.default_rng(seed)
    tab = index_table(d, m)
    base = rng.uniform(-1, 1, (10, d))
    vals = rng.standard_normal((10, len(tab.alphas)))
    y = rng.uniform(-1, 1, (40, d))
    t_idx = np.repeat(np.arange(40), 2)
    b_idx = rng.integers(0, 10, 80)
    np.testing.assert_allclose(
        numpy_impl.taylor_eval(y, base, vals, t_idx, b_idx, tab.exps, tab.inv_fact),
        numba_impl.taylor_eval(y, base, vals, t_idx, b_idx, tab.exps, tab.inv_fact),
        rtol=1e-12, atol=1e-12)


def test_polygon_kernels_agree():
    rng = np.random.default_rng(0)
    v = np.ascontiguousarray(koch_vertices(3))
    vx, vy = np.ascontiguousarray(v[:, 0]), np.ascontiguousarray(v[:, 1])
    q = rng.uniform(-1.2, 1.2, (2000, 2))
    qx, qy = np.ascontiguousarray(q[:, 0]), np.ascontiguousarray(q[:, 1])
    np.testing.assert_array_equal(numpy_impl.points_in_polygon(qx, qy, vx, vy),
                                  numba_impl.points_in_polygon(qx, qy, vx, vy))
    np.testing.assert_allclose(numpy_impl.polygon_boundary_distance(qx, qy, vx, vy),
                               numba_impl.polygon_boundary_distance(qx, qy, vx, vy), atol=1e-14)
    b = q + rng.uniform(-0.1, 0.1, q.shape)
    args = [np.ascontiguousarray(c) for c in (q[:, 0], q[:, 1], b[:, 0], b[:, 1])]
    np.testing.assert_array_equal(numpy_impl.segments_clear_polygon(*args, vx, vy),
                                  numba_impl.segments_clear_polygon(*args, vx, vy))


def test_point_in_unit_square():
    sq = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    inside = kernels.points_in_polygon(np.array([[0.5, 0.5], [1.5, 0.5]]), sq)
    assert list(inside) == [True, False]
    assert kernels.polygon_boundary_distance(np.array([[0.5, 0.25]]), sq)[0] == pytest.approx(0.25)


@pytest.mark.parametrize("flag,expected", [("1", "numpy"), ("0", "numba")])
def test_env_flag_selects_backend(flag, expected):
    env = dict(os.environ, WKIT_NO_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", "from wkit import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected

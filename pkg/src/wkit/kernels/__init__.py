"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports and ``WKIT_NO_NUMBA`` is unset
(or set to ``0``). Both implementations stay importable as ``numpy_impl`` and
``numba_impl`` so tests and the benchmark can compare them directly.
"""
import os

import numpy as np

from . import _numpy as numpy_impl

_disabled = os.environ.get("WKIT_NO_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")

try:
    from . import _numba as numba_impl
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba_impl = None

if numba_impl is not None and not _disabled:
    _impl = numba_impl
    BACKEND = "numba"
else:
    _impl = numpy_impl
    BACKEND = "numpy"


def _f(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _i(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def remainder_ratios(points, values, pair_i, pair_j, table, m):
    return _impl.remainder_ratios(
        _f(points), _f(values), _i(pair_i), _i(pair_j),
        table.exps, table.inv_fact, table.orders,
        table.shift_ptr, table.shift_sum, table.shift_beta, int(m),
    )


def taylor_eval(targets, base_points, base_values, t_idx, b_idx, table):
    if len(t_idx) == 0:
        return np.zeros(0)
    return _impl.taylor_eval(
        _f(targets), _f(base_points), _f(base_values), _i(t_idx), _i(b_idx),
        table.exps, table.inv_fact,
    )


def points_in_polygon(points, vertices):
    points = _f(points)
    vertices = _f(vertices)
    return _impl.points_in_polygon(
        _f(points[:, 0]), _f(points[:, 1]), _f(vertices[:, 0]), _f(vertices[:, 1]))


def polygon_boundary_distance(points, vertices):
    points = _f(points)
    vertices = _f(vertices)
    return _impl.polygon_boundary_distance(
        _f(points[:, 0]), _f(points[:, 1]), _f(vertices[:, 0]), _f(vertices[:, 1]))


def segments_clear_polygon(a, b, vertices):
    a, b, vertices = _f(a), _f(b), _f(vertices)
    return _impl.segments_clear_polygon(
        _f(a[:, 0]), _f(a[:, 1]), _f(b[:, 0]), _f(b[:, 1]),
        _f(vertices[:, 0]), _f(vertices[:, 1]))

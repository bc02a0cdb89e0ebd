"""Compare the numba kernels with the numpy fallback on representative inputs.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``. Each kernel is
timed on both backends after a warm-up call (so numba compile time is
reported separately) and the outputs are checked to agree.
"""
import argparse
import time

import numpy as np

from wkit.domains import koch_vertices
from wkit.jets import index_table
from wkit.kernels import numba_impl, numpy_impl


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(rng):
    d, m = 2, 3
    tab = index_table(d, m)
    n_pts = 2000
    pts = rng.uniform(-1, 1, (n_pts, d))
    vals = rng.standard_normal((n_pts, len(tab.exps)))
    n_pairs = 200_000
    pi = rng.integers(0, n_pts, n_pairs)
    pj = rng.integers(0, n_pts, n_pairs)
    pj = np.where(pi == pj, (pj + 1) % n_pts, pj)
    yield "remainder_ratios", lambda impl: impl.remainder_ratios(
        pts, vals, pi, pj, tab.exps, tab.inv_fact, tab.orders,
        tab.shift_ptr, tab.shift_sum, tab.shift_beta, m)

    targets = rng.uniform(-1, 1, (50_000, d))
    t_idx = np.repeat(np.arange(len(targets)), 4)
    b_idx = rng.integers(0, n_pts, t_idx.size)
    yield "taylor_eval", lambda impl: impl.taylor_eval(
        targets, pts, vals, t_idx, b_idx, tab.exps, tab.inv_fact)

    verts = np.ascontiguousarray(koch_vertices(4))
    vx, vy = np.ascontiguousarray(verts[:, 0]), np.ascontiguousarray(verts[:, 1])
    q = rng.uniform(-1.2, 1.2, (20_000, 2))
    qx, qy = np.ascontiguousarray(q[:, 0]), np.ascontiguousarray(q[:, 1])
    yield "points_in_polygon", lambda impl: impl.points_in_polygon(qx, qy, vx, vy)
    yield "polygon_boundary_distance", lambda impl: impl.polygon_boundary_distance(qx, qy, vx, vy)

    a = rng.uniform(-0.5, 0.5, (5_000, 2))
    b = a + rng.uniform(-0.05, 0.05, a.shape)
    args = [np.ascontiguousarray(c) for c in (a[:, 0], a[:, 1], b[:, 0], b[:, 1])]
    yield "segments_clear_polygon", lambda impl: impl.segments_clear_polygon(*args, vx, vy)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if numba_impl is None:
        print("numba is not importable; nothing to compare")
        return 1
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<28}{'compile s':>11}{'numba s':>11}{'numpy s':>11}{'speedup':>9}  agree")
    for name, call in cases(rng):
        t0 = time.perf_counter()
        call(numba_impl)
        compile_s = time.perf_counter() - t0
        t_nb, out_nb = _time(lambda: call(numba_impl), args.repeat)
        t_np, out_np = _time(lambda: call(numpy_impl), args.repeat)
        agree = np.allclose(out_nb, out_np, rtol=1e-10, atol=1e-12, equal_nan=True)
        print(f"{name:<28}{compile_s:>11.3f}{t_nb:>11.4f}{t_np:>11.4f}{t_np / t_nb:>9.1f}  {agree}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

"""numba-compiled kernels; signatures mirror ``_numpy``."""
import numpy as np
from numba import config, njit, prange

# the bundled TBB is often too old; fall back to the portable workqueue pool
if config.THREADING_LAYER == "default":
    config.THREADING_LAYER = "workqueue"


@njit(cache=True)
def _fill_monomials(delta, exps, inv_fact, powers, out):
    d = delta.shape[0]
    mmax = powers.shape[1] - 1
    for k in range(d):
        powers[k, 0] = 1.0
        for p in range(1, mmax + 1):
            powers[k, p] = powers[k, p - 1] * delta[k]
    for b in range(exps.shape[0]):
        v = inv_fact[b]
        for k in range(d):
            v *= powers[k, exps[b, k]]
        out[b] = v


_CHUNK = 4096


@njit(cache=True, parallel=True)
def remainder_ratios(points, values, pair_i, pair_j, exps, inv_fact, orders,
                     shift_ptr, shift_sum, shift_beta, m):
    n_pairs = pair_i.shape[0]
    n_alpha = exps.shape[0]
    d = points.shape[1]
    ratio = np.zeros(n_pairs)
    arg = np.zeros(n_pairs, dtype=np.int64)
    n_chunks = (n_pairs + _CHUNK - 1) // _CHUNK
    # scratch buffers are allocated once per chunk, not once per pair
    for c in prange(n_chunks):
        delta = np.empty(d)
        powers = np.empty((d, m + 1))
        mono = np.empty(n_alpha)
        scale = np.empty(m + 1)
        for p in range(c * _CHUNK, min(n_pairs, (c + 1) * _CHUNK)):
            i = pair_i[p]
            j = pair_j[p]
            dist2 = 0.0
            for k in range(d):
                delta[k] = points[j, k] - points[i, k]
                dist2 += delta[k] * delta[k]
            if dist2 == 0.0:
                continue
            # scale[k] = dist^(k - m), filled by repeated multiplication
            scale[m] = 1.0
            inv = 1.0 / np.sqrt(dist2)
            for k in range(m - 1, -1, -1):
                scale[k] = scale[k + 1] * inv
            _fill_monomials(delta, exps, inv_fact, powers, mono)
            best = -1.0
            best_a = 0
            for a in range(n_alpha):
                tay = 0.0
                for s in range(shift_ptr[a], shift_ptr[a + 1]):
                    tay += values[i, shift_sum[s]] * mono[shift_beta[s]]
                r = abs(values[j, a] - tay) * scale[orders[a]]
                if r > best:
                    best = r
                    best_a = a
            ratio[p] = best
            arg[p] = best_a
    return ratio, arg


@njit(cache=True, parallel=True)
def taylor_eval(targets, base_points, base_values, t_idx, b_idx, exps, inv_fact):
    n = t_idx.shape[0]
    d = targets.shape[1]
    n_alpha = exps.shape[0]
    mmax = 0
    for a in range(n_alpha):
        s = 0
        for k in range(d):
            s += exps[a, k]
        if s > mmax:
            mmax = s
    out = np.empty(n)
    for p in prange(n):
        t = t_idx[p]
        b = b_idx[p]
        delta = np.empty(d)
        for k in range(d):
            delta[k] = targets[t, k] - base_points[b, k]
        powers = np.empty((d, mmax + 1))
        mono = np.empty(n_alpha)
        _fill_monomials(delta, exps, inv_fact, powers, mono)
        acc = 0.0
        for a in range(n_alpha):
            acc += base_values[b, a] * mono[a]
        out[p] = acc
    return out


@njit(cache=True, parallel=True)
def points_in_polygon(px, py, vx, vy):
    n = vx.shape[0]
    inside = np.zeros(px.shape[0], dtype=np.bool_)
    for p in prange(px.shape[0]):
        x = px[p]
        y = py[p]
        c = False
        for e in range(n):
            x1, y1 = vx[e], vy[e]
            x2, y2 = vx[(e + 1) % n], vy[(e + 1) % n]
            if (y1 > y) != (y2 > y):
                xint = (x2 - x1) * (y - y1) / (y2 - y1) + x1
                if x < xint:
                    c = not c
        inside[p] = c
    return inside


@njit(cache=True, parallel=True)
def polygon_boundary_distance(px, py, vx, vy):
    n = vx.shape[0]
    out = np.empty(px.shape[0])
    for p in prange(px.shape[0]):
        x = px[p]
        y = py[p]
        best = np.inf
        for e in range(n):
            ax, ay = vx[e], vy[e]
            ex = vx[(e + 1) % n] - ax
            ey = vy[(e + 1) % n] - ay
            t = ((x - ax) * ex + (y - ay) * ey) / (ex * ex + ey * ey)
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
            dx = x - (ax + t * ex)
            dy = y - (ay + t * ey)
            d2 = dx * dx + dy * dy
            if d2 < best:
                best = d2
        out[p] = np.sqrt(best)
    return out


@njit(cache=True)
def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


@njit(cache=True, parallel=True)
def segments_clear_polygon(sx0, sy0, sx1, sy1, vx, vy):
    n = vx.shape[0]
    clear = np.ones(sx0.shape[0], dtype=np.bool_)
    for s in prange(sx0.shape[0]):
        px, py, qx, qy = sx0[s], sy0[s], sx1[s], sy1[s]
        for e in range(n):
            ax, ay = vx[e], vy[e]
            bx, by = vx[(e + 1) % n], vy[(e + 1) % n]
            o1 = _orient(px, py, qx, qy, ax, ay)
            o2 = _orient(px, py, qx, qy, bx, by)
            if o1 == 0.0 and o2 == 0.0:
                hit = (min(px, qx) <= max(ax, bx) and min(ax, bx) <= max(px, qx)
                       and min(py, qy) <= max(ay, by) and min(ay, by) <= max(py, qy))
            else:
                o3 = _orient(ax, ay, bx, by, px, py)
                o4 = _orient(ax, ay, bx, by, qx, qy)
                hit = o1 * o2 <= 0.0 and o3 * o4 <= 0.0
            if hit:
                clear[s] = False
                break
    return clear

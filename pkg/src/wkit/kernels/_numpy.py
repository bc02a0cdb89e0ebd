"""Pure-numpy reference kernels.

Every function here has a twin of the same signature in ``_numba``; the two
must agree to rounding. Work is chunked so memory stays bounded for large
pair lists.
"""
import numpy as np

CHUNK = 1 << 15
CELLS = 1 << 21


def _rows(n_cols):
    return max(1, CELLS // max(1, n_cols))


def monomials(delta, exps, inv_fact):
    """Return ``delta**beta / beta!`` for every row of ``exps``; shape (P, M)."""
    out = np.ones((delta.shape[0], exps.shape[0]))
    for k in range(exps.shape[1]):
        out *= delta[:, k:k + 1] ** exps[None, :, k]
    return out * inv_fact[None, :]


def remainder_ratios(points, values, pair_i, pair_j, exps, inv_fact, orders,
                     shift_ptr, shift_sum, shift_beta, m):
    """Largest scaled Taylor remainder for each ordered pair (base i, target j).

    Returns ``(ratio, arg_alpha)`` where ratio is
    ``max_alpha |R_x^m f^alpha(y)| |y-x|^(|alpha|-m)``.
    """
    n_pairs = pair_i.shape[0]
    n_alpha = exps.shape[0]
    ratio = np.zeros(n_pairs)
    arg = np.zeros(n_pairs, dtype=np.int64)
    for start in range(0, n_pairs, CHUNK):
        sl = slice(start, start + CHUNK)
        pi, pj = pair_i[sl], pair_j[sl]
        delta = points[pj] - points[pi]
        dist = np.sqrt(np.sum(delta * delta, axis=1))
        mono = monomials(delta, exps, inv_fact)
        vi = values[pi]
        vj = values[pj]
        best = np.full(pi.shape[0], -1.0)
        best_a = np.zeros(pi.shape[0], dtype=np.int64)
        for a in range(n_alpha):
            lo, hi = shift_ptr[a], shift_ptr[a + 1]
            tay = np.einsum("pk,pk->p", vi[:, shift_sum[lo:hi]], mono[:, shift_beta[lo:hi]])
            rem = np.abs(vj[:, a] - tay)
            with np.errstate(divide="ignore", invalid="ignore"):
                r = rem * dist ** (orders[a] - m)
            r = np.where(dist > 0, r, 0.0)
            upd = r > best
            best = np.where(upd, r, best)
            best_a = np.where(upd, a, best_a)
        ratio[sl] = best
        arg[sl] = best_a
    return ratio, arg


def taylor_eval(targets, base_points, base_values, t_idx, b_idx, exps, inv_fact):
    """Evaluate ``Tay_{base[b]}^m f(target[t])`` for each listed (t, b) pair."""
    n = t_idx.shape[0]
    out = np.empty(n)
    for start in range(0, n, CHUNK):
        sl = slice(start, start + CHUNK)
        delta = targets[t_idx[sl]] - base_points[b_idx[sl]]
        mono = monomials(delta, exps, inv_fact)
        out[sl] = np.einsum("pk,pk->p", base_values[b_idx[sl]], mono)
    return out


def points_in_polygon(px, py, vx, vy):
    """Even-odd ray casting; points on the boundary may land either way."""
    inside = np.zeros(px.shape[0], dtype=np.bool_)
    step = _rows(vx.shape[0])
    for start in range(0, px.shape[0], step):
        sl = slice(start, start + step)
        x, y = px[sl, None], py[sl, None]
        x1, y1 = vx[None, :], vy[None, :]
        x2, y2 = np.roll(vx, -1)[None, :], np.roll(vy, -1)[None, :]
        cond = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = (x2 - x1) * (y - y1) / (y2 - y1) + x1
        cross = cond & (x < xint)
        inside[sl] = (np.count_nonzero(cross, axis=1) % 2) == 1
    return inside


def polygon_boundary_distance(px, py, vx, vy):
    out = np.empty(px.shape[0])
    ax, ay = vx[None, :], vy[None, :]
    bx, by = np.roll(vx, -1)[None, :], np.roll(vy, -1)[None, :]
    ex, ey = bx - ax, by - ay
    len2 = ex * ex + ey * ey
    step = _rows(vx.shape[0])
    for start in range(0, px.shape[0], step):
        sl = slice(start, start + step)
        x, y = px[sl, None], py[sl, None]
        t = np.clip(((x - ax) * ex + (y - ay) * ey) / len2, 0.0, 1.0)
        dx = x - (ax + t * ex)
        dy = y - (ay + t * ey)
        out[sl] = np.sqrt(np.min(dx * dx + dy * dy, axis=1))
    return out


def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def segments_clear_polygon(sx0, sy0, sx1, sy1, vx, vy):
    """True where the segment touches no polygon edge (closed edges)."""
    clear = np.ones(sx0.shape[0], dtype=np.bool_)
    ax, ay = vx[None, :], vy[None, :]
    bx, by = np.roll(vx, -1)[None, :], np.roll(vy, -1)[None, :]
    step = _rows(vx.shape[0])
    for start in range(0, sx0.shape[0], step):
        sl = slice(start, start + step)
        px, py = sx0[sl, None], sy0[sl, None]
        qx, qy = sx1[sl, None], sy1[sl, None]
        o1 = _orient(px, py, qx, qy, ax, ay)
        o2 = _orient(px, py, qx, qy, bx, by)
        o3 = _orient(ax, ay, bx, by, px, py)
        o4 = _orient(ax, ay, bx, by, qx, qy)
        proper = (o1 * o2 <= 0) & (o3 * o4 <= 0)
        colinear = (o1 == 0) & (o2 == 0)
        overlap = (
            (np.minimum(px, qx) <= np.maximum(ax, bx))
            & (np.minimum(ax, bx) <= np.maximum(px, qx))
            & (np.minimum(py, qy) <= np.maximum(ay, by))
            & (np.minimum(ay, by) <= np.maximum(py, qy))
        )
        hit = np.where(colinear, overlap, proper)
        clear[sl] = ~np.any(hit, axis=1)
    return clear

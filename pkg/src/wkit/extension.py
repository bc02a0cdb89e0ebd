"""Whitney extension of finite-order jets from a sampled closed set to a box.

The complement of ``C`` in the box is covered by dyadic cubes whose size is
comparable to their distance from ``C``. Each cube carries a bump and an
anchor sample; outside ``C`` the extension blends the Taylor polynomials of
the anchors with the normalized bumps.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .domains import SampledClosedSet, nearest_lex
from .errors import DomainError, JetCheckError, MissingPointError, SizeError
from .jets import JetField, index_table, multi_indices, seminorm_abs, whitney_jet_check

CUBE_BUDGET = 1_000_000
CHECK_PAIRS = 250_000
LOWER, UPPER = 1.0, 6.0  # proximity band in units of s * sqrt(d)


@dataclass(eq=False)
class WhitneyDecomposition:
    set_id: str
    box: tuple
    centers: np.ndarray
    sides: np.ndarray
    anchors: np.ndarray
    dists: np.ndarray
    min_side: float
    max_side: float
    domain: SampledClosedSet = field(repr=False, default=None)

    def __len__(self):
        return len(self.sides)

    @property
    def dimension(self):
        return len(self.box[0])

    @property
    def far(self):
        """Cubes above the proximity band (only possible when ``max_side`` is small)."""
        return self.dists > UPPER * self.sides * math.sqrt(self.dimension) * (1 + 1e-12)

    def to_dict(self):
        return {"set_id": self.set_id, "box": [self.box[0].tolist(), self.box[1].tolist()],
                "min_side": self.min_side, "max_side": self.max_side,
                "cubes": [{"center": c.tolist(), "side": float(s), "anchor": a.tolist()}
                          for c, s, a in zip(self.centers, self.sides, self.anchors)]}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def check_invariants(self):
        """Proximity, anchor optimality and disjointness on the stored cubes."""
        d = self.dimension
        rt = math.sqrt(d)
        lower_ok = self.dists >= LOWER * self.sides * rt * (1 - 1e-12)
        upper_ok = ~self.far
        report = {"cubes": len(self), "proximity_lower_violations": int((~lower_ok).sum()),
                  "proximity_upper_violations": int((~upper_ok).sum())}
        if self.domain is not None and len(self):
            idx, dist = self.domain.nearest_sample(self.centers)
            report["anchor_mismatch"] = int(np.sum(np.any(self.domain.samples[idx] != self.anchors, axis=1)))
        # disjoint interiors: a dyadic cube may not contain the center of a smaller one
        overlaps = 0
        for s in np.unique(self.sides):
            big = self.sides == s
            small = self.sides < s
            if not small.any():
                continue
            tree = cKDTree(self.centers[big])
            hits = tree.query(self.centers[small], p=np.inf)[0] < s / 2
            overlaps += int(hits.sum())
        report["overlaps"] = overlaps
        return report


def _default_box(dom, margin=0.5):
    lo, hi = dom.box
    span = float(np.max(hi - lo))
    return lo - margin * span, hi + margin * span


def whitney_decompose(dom: SampledClosedSet, box=None, min_side=None, max_side=None,
                      budget=CUBE_BUDGET) -> WhitneyDecomposition:
    """Dyadic decomposition of ``box \\ C``.

    A cube is kept when ``s sqrt(d) <= dist(center, C) <= 6 s sqrt(d)`` and
    split when it is closer. Cubes below ``min_side`` that are still too
    close are dropped, as are cubes lying inside ``C``. Distances are taken to
    the nearest sample (0 on members).
    """
    lo, hi = _default_box(dom) if box is None else (np.asarray(box[0], float), np.asarray(box[1], float))
    d = dom.dimension
    span = float(np.max(hi - lo))
    max_side = span / 4 if max_side is None else float(max_side)
    min_side = dom.resolution / 4 if min_side is None else float(min_side)
    if not 0 < min_side < max_side:
        raise ValueError("need 0 < min_side < max_side")
    rt = math.sqrt(d)
    counts = np.maximum(1, np.ceil((hi - lo) / max_side - 1e-9)).astype(int)
    corners = np.stack([g.ravel() for g in np.meshgrid(*[np.arange(c) for c in counts],
                                                       indexing="ij")], axis=1)
    side = max_side
    kept_c, kept_s, kept_d = [], [], []
    offsets = np.array(list(itertools.product((0, 1), repeat=d)))
    bdist_oracle = dom.boundary_distance
    btree = dom.boundary_tree
    while len(corners):
        centers = lo + (corners + 0.5) * side
        dist = dom.distance_to_set(centers)
        inside = dist == 0
        if inside.any():
            # drop cubes that sit entirely inside C
            pts = centers[inside]
            if bdist_oracle is not None:
                bd = bdist_oracle(pts)
            elif btree is not None:
                bd = btree.query(pts)[0]
            else:
                bd = np.full(len(pts), np.inf)
            interior = np.zeros(len(centers), dtype=bool)
            interior[np.nonzero(inside)[0][bd > side * rt / 2]] = True
        else:
            interior = np.zeros(len(centers), dtype=bool)
        keep = (dist >= LOWER * side * rt) & ~interior
        split = (dist < LOWER * side * rt) & ~interior
        kept_c.append(centers[keep])
        kept_s.append(np.full(int(keep.sum()), side))
        kept_d.append(dist[keep])
        n_kept = sum(len(s) for s in kept_s)
        if side / 2 < min_side * (1 - 1e-12):
            break
        children = (2 * corners[split][:, None, :] + offsets[None, :, :]).reshape(-1, d)
        if n_kept + len(children) > budget:
            raise SizeError(f"Whitney decomposition exceeds the cube budget of {budget}")
        corners = children
        side /= 2
    centers = np.concatenate(kept_c) if kept_c else np.zeros((0, d))
    sides = np.concatenate(kept_s) if kept_s else np.zeros(0)
    dists = np.concatenate(kept_d) if kept_d else np.zeros(0)
    if len(centers):
        idx, _ = dom.nearest_sample(centers)
        anchors = dom.samples[idx]
    else:
        anchors = np.zeros((0, d))
    return WhitneyDecomposition(dom.set_id(), (lo, hi), centers, sides, anchors, dists,
                                min_side, max_side, dom)


def mollifier(t):
    """``exp(1 - 1/(1 - t^2))`` on ``|t| < 1``, 0 elsewhere; peak value 1."""
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < 1
    with np.errstate(divide="ignore", over="ignore"):
        val = np.exp(1.0 - 1.0 / np.where(inside, 1.0 - t * t, 1.0))
    return np.where(inside, val, 0.0)


class BumpSystem:
    """One radial bump per cube, normalized by the local sum.

    ``profile="mollifier"`` gives C-infinity bumps; ``profile="poly"`` uses
    ``(1 - t^2)^(k+1)`` which is C^k at the edge of its support.
    """

    def __init__(self, decomp: WhitneyDecomposition, profile="mollifier", k=None, factor=1.3):
        if profile not in ("mollifier", "poly"):
            raise ValueError("profile must be 'mollifier' or 'poly'")
        if profile == "poly" and (k is None or k < 0):
            raise ValueError("the poly profile needs k >= 0")
        self.decomp = decomp
        self.profile = profile
        self.k = k
        self.factor = float(factor)
        d = decomp.dimension
        self.radii = self.factor * decomp.sides * math.sqrt(d) / 2
        self._levels = []
        for s in np.unique(decomp.sides):
            ids = np.nonzero(decomp.sides == s)[0]
            self._levels.append((ids, cKDTree(decomp.centers[ids]), self.factor * s * math.sqrt(d) / 2))

    def _shape(self, t):
        if self.profile == "mollifier":
            return mollifier(t)
        return np.where(np.abs(t) < 1, np.clip(1 - t * t, 0, None) ** (self.k + 1), 0.0)

    def raw(self, points):
        """Sparse raw bump values: ``(point index, cube index, value)`` with value > 0."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        P, Q = [], []
        for ids, tree, rad in self._levels:
            hits = tree.query_ball_point(pts, rad)
            lens = np.fromiter((len(h) for h in hits), dtype=np.int64, count=len(pts))
            if lens.sum() == 0:
                continue
            P.append(np.repeat(np.arange(len(pts)), lens))
            Q.append(ids[np.fromiter((j for h in hits for j in h), dtype=np.int64, count=int(lens.sum()))])
        if not P:
            z = np.zeros(0, dtype=np.int64)
            return z, z, np.zeros(0)
        p = np.concatenate(P)
        q = np.concatenate(Q)
        r = np.linalg.norm(pts[p] - self.decomp.centers[q], axis=1) / self.radii[q]
        v = self._shape(r)
        pos = v > 0
        return p[pos], q[pos], v[pos]

    def weights(self, points):
        """Normalized weights and the raw local sum per point."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        p, q, v = self.raw(pts)
        total = np.bincount(p, weights=v, minlength=len(pts)).astype(float)
        w = v / total[p] if p.size else v
        return p, q, w, total

    def partition_sum(self, points):
        p, q, w, total = self.weights(points)
        return np.bincount(p, weights=w, minlength=len(np.atleast_2d(points))).astype(float)

    def overlap_count(self, points):
        p, _, _, _ = self.weights(points)
        return np.bincount(p, minlength=len(np.atleast_2d(points)))


def default_t_grid(jet: JetField):
    """Three scales, two decades apart, starting at twice the median sample spacing."""
    if len(jet) < 2:
        return [1.0, 0.1, 0.01]
    d, _ = cKDTree(jet.points).query(jet.points, k=2)
    nn = d[:, 1]
    nn = nn[nn > 0]
    t0 = 2.0 * float(np.median(nn)) if nn.size else 1.0
    return [100 * t0, 10 * t0, t0]


class WhitneyExtension:
    """Callable ``Ef`` built from a jet, a decomposition and a bump system.

    On ``C`` the value is the order-``m`` Taylor polynomial of the nearest
    sample (equal to ``f^0`` at samples); off ``C`` it is the bump-weighted
    blend of the anchors' Taylor polynomials. Points of the box not reached
    by any bump fall back to the nearest sample's Taylor polynomial.
    """

    def __init__(self, jet: JetField, decomp: WhitneyDecomposition, bumps: BumpSystem, m=None):
        self.jet = jet
        self.m = jet.order if m is None else int(m)
        if self.m > jet.order:
            raise ValueError("m exceeds the jet order")
        self.decomp = decomp
        self.bumps = bumps
        self.dom = decomp.domain
        self.table = index_table(jet.dimension, self.m)
        self.values = np.ascontiguousarray(jet.values[:, :len(self.table.alphas)])
        self.tree = cKDTree(jet.points)
        rows = np.empty(len(decomp), dtype=np.int64)
        for k, a in enumerate(decomp.anchors):
            try:
                rows[k] = jet.point_index(a)
            except MissingPointError:
                raise MissingPointError(
                    f"cube anchor {a.tolist()} is not a sample of the jet; build the "
                    "decomposition on the jet's sample set") from None
        self.anchor_rows = rows

    def _nearest_taylor(self, pts):
        idx, dist = nearest_lex(self.tree, self.jet.points, pts)
        out = kernels.taylor_eval(pts, self.jet.points, self.values,
                                  np.arange(len(pts)), idx, self.table)
        exact = dist == 0
        out[exact] = self.values[idx[exact], 0]
        return out

    def __call__(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.jet.dimension:
            pts = pts.reshape(-1, self.jet.dimension)
        member = self.dom.contains(pts)
        lo, hi = self.decomp.box
        in_box = np.all((pts >= lo) & (pts <= hi), axis=1)
        bad = ~member & ~in_box
        if bad.any():
            k = int(np.argmax(bad))
            raise DomainError(f"{pts[k].tolist()} lies outside the box and outside C")
        out = np.empty(len(pts))
        if member.any():
            out[member] = self._nearest_taylor(pts[member])
        off = np.nonzero(~member)[0]
        if off.size:
            y = pts[off]
            p, q, w, total = self.bumps.weights(y)
            vals = kernels.taylor_eval(y, self.jet.points, self.values, p, self.anchor_rows[q], self.table)
            res = np.bincount(p, weights=w * vals, minlength=len(y)).astype(float)
            gap = total == 0
            if gap.any():
                res[gap] = self._nearest_taylor(y[gap])
            out[off] = res
        return out

    def dist_to_set(self, points):
        return self.dom.distance_to_set(points)


def extend_jet(jet: JetField, decomp: WhitneyDecomposition, bumps: BumpSystem | None = None,
               m=None, check=True, tol=0.5, t_grid=None, check_pairs=CHECK_PAIRS) -> WhitneyExtension:
    """Build ``Ef``; refuses jets that fail :func:`~wkit.jets.whitney_jet_check`.

    The refusal threshold is ``tol * |f|_m`` so the verdict does not depend
    on the scale of the jet; the zero jet is always accepted. The check
    samples at most ``check_pairs`` pairs per scale; below that every pair
    within the scale is used, which covers the finest scale of the default
    grid unless ``C`` has tens of thousands of samples.
    """
    m = jet.order if m is None else int(m)
    if check:
        scale = seminorm_abs(jet, m)
        res = whitney_jet_check(jet, m, default_t_grid(jet) if t_grid is None else t_grid,
                                tol * scale if scale > 0 else np.inf, max_pairs=check_pairs)
        if not res.passed:
            raise JetCheckError(f"jet is not a Whitney jet at order {m}: {res.witness}",
                                witness=res.witness)
    bumps = BumpSystem(decomp) if bumps is None else bumps
    return WhitneyExtension(jet, decomp, bumps, m)


# -- verification -------------------------------------------------------------

@dataclass
class AgreementReport:
    discrepancy: dict
    steps: dict
    decay_order: float
    decay_intercept: float
    n_points: int
    n_probes: int

    def as_dict(self):
        return {"discrepancy": {str(k): v for k, v in self.discrepancy.items()},
                "steps": {str(k): v for k, v in self.steps.items()},
                "decay_order": self.decay_order, "decay_intercept": self.decay_intercept,
                "n_points": self.n_points, "n_probes": self.n_probes}

    @property
    def max_discrepancy(self):
        return max(self.discrepancy.values(), default=0.0)


def fd_derivative(F, x, alpha, h):
    """Central tensor finite difference of ``F`` at the rows of ``x``."""
    out = np.zeros(len(x))
    for js in itertools.product(*[range(a + 1) for a in alpha]):
        w = 1.0
        shift = np.zeros_like(x)
        for k, (a, j) in enumerate(zip(alpha, js)):
            if a:
                w *= (-1) ** j * math.comb(a, j)
                shift[:, k] = (a / 2.0 - j) * h
        out += w * F(x + shift)
    return out / h ** sum(alpha)


def boundary_probes(dom: SampledClosedSet, jet: JetField, n, t_min, t_max, seed=0, box=None):
    """Probe points outside ``C`` at log-uniform distances from boundary samples.

    Returns ``(points, base_rows)`` where ``base_rows`` index the jet samples
    the probes were launched from.
    """
    rng = np.random.default_rng(seed)
    bnd = dom.boundary_samples
    rows_all = []
    pts_all = []
    need = n
    for _ in range(50):
        if need <= 0:
            break
        k = rng.integers(0, len(bnd), size=4 * need)
        u = rng.standard_normal((4 * need, dom.dimension))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        t = np.exp(rng.uniform(math.log(t_min), math.log(t_max), size=4 * need))
        y = bnd[k] + t[:, None] * u
        ok = ~dom.contains(y)
        if box is not None:
            ok &= np.all((y >= box[0]) & (y <= box[1]), axis=1)
        y, k = y[ok][:need], k[ok][:need]
        pts_all.append(y)
        rows_all.append(np.array([jet.point_index(b) for b in bnd[k]], dtype=np.int64))
        need -= len(y)
    return np.concatenate(pts_all), np.concatenate(rows_all)


def verify_jet_agreement(Ef, jet: JetField, probes=None, m=None, h=1e-4, n_points=200,
                         seed=0) -> AgreementReport:
    """Compare finite differences of ``Ef`` with the jet and fit the remainder decay.

    The order-``k`` difference uses step ``h * 10^(k-1)`` so that rounding
    stays below the truncation error. ``probes`` is an array of points (based
    at their nearest jet sample) or a ``(points, base_rows)`` pair.
    """
    m = jet.order if m is None else int(m)
    rng = np.random.default_rng(seed)
    sel = np.sort(rng.choice(len(jet), size=min(n_points, len(jet)), replace=False))
    x = jet.points[sel]
    disc, steps = {}, {}
    tab = jet.table
    for a in multi_indices(jet.dimension, m):
        k = a.order()
        hk = h * 10.0 ** max(k - 1, 0)
        approx = Ef(x) if k == 0 else fd_derivative(Ef, x, a, hk)
        err = float(np.max(np.abs(approx - jet.values[sel, tab.index[a]]))) if len(x) else 0.0
        disc[k] = max(disc.get(k, 0.0), err)
        steps[k] = hk if k else 0.0
    slope, icpt, n_probes = float("nan"), float("nan"), 0
    if probes is not None:
        if isinstance(probes, tuple):
            y, rows = probes
        else:
            y = np.atleast_2d(probes)
            rows, _ = nearest_lex(cKDTree(jet.points), jet.points, y)
        y = np.atleast_2d(y)
        n_probes = len(y)
        sub = index_table(jet.dimension, m)
        tay = kernels.taylor_eval(y, jet.points, np.ascontiguousarray(jet.values[:, :len(sub.alphas)]),
                                  np.arange(len(y)), rows, sub)
        err = np.abs(Ef(y) - tay)
        dist = np.linalg.norm(y - jet.points[rows], axis=1)
        ok = (err > 0) & (dist > 0)
        if ok.sum() >= 3:
            slope, icpt = np.polyfit(np.log(dist[ok]), np.log(err[ok]), 1)
        elif n_probes:
            slope = float("inf")  # exact agreement at every probe
    return AgreementReport(disc, steps, float(slope), float(icpt), len(x), n_probes)


def operator_growth(Ef, jet: JetField, points, m=None, h=1e-4) -> dict:
    """Observed size of ``Ef`` off ``C`` against the size of the jet, per order.

    For each ``k <= m`` compares ``max |d^a Ef|`` over ``points`` (finite
    differences with the step rule of :func:`verify_jet_agreement`) with
    ``max |f^a|`` over the jet samples, both over ``|a| <= k``. The ratios are
    an empirical reading of how the operator scales; no bound is asserted.
    """
    m = jet.order if m is None else int(m)
    x = np.atleast_2d(np.asarray(points, dtype=float))
    tab = jet.table
    ext, src = {}, {}
    for a in multi_indices(jet.dimension, m):
        k = a.order()
        vals = Ef(x) if k == 0 else fd_derivative(Ef, x, a, h * 10.0 ** max(k - 1, 0))
        ext[k] = max(ext.get(k, 0.0), float(np.max(np.abs(vals))) if len(x) else 0.0)
        src[k] = max(src.get(k, 0.0), float(np.max(np.abs(jet.values[:, tab.index[a]]))))
    ratio = {}
    ext_run, src_run = 0.0, 0.0
    for k in range(m + 1):
        ext_run, src_run = max(ext_run, ext[k]), max(src_run, src[k])
        ratio[k] = ext_run / src_run if src_run > 0 else (0.0 if ext_run == 0 else float("inf"))
    return {"extension_sup": {str(k): v for k, v in ext.items()},
            "jet_sup": {str(k): v for k, v in src.items()},
            "ratio": {str(k): v for k, v in ratio.items()}, "n_points": len(x)}


__all__ = ["WhitneyDecomposition", "whitney_decompose", "BumpSystem", "mollifier",
           "WhitneyExtension", "extend_jet", "verify_jet_agreement", "AgreementReport",
           "boundary_probes", "fd_derivative", "default_t_grid", "operator_growth"]

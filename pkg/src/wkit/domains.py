"""Sampled closed sets and the test-domain generators.

A :class:`SampledClosedSet` bundles vectorized membership and interior
oracles with a finite sample of the set (boundary samples tagged) and a
metric. Generators place interior samples on the lattice ``h * Z^d`` so that
coordinates like 0 are represented exactly.
"""
from __future__ import annotations

import functools
import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import ConvexHull, cKDTree

from . import kernels
from .errors import ConfigurationError, SizeError

MAX_SAMPLES = 2_000_000
MAX_KOCH_ITERATIONS = 8


def euclidean(a, b):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    diff = np.abs(a - b)
    scale = diff.max(axis=-1, initial=0.0)
    safe = np.where(scale > 0, scale, 1.0)
    # scaling keeps distances like 1e-300 from underflowing to zero
    return scale * np.sqrt(np.sum((diff / safe[..., None]) ** 2, axis=-1))


def nearest_lex(tree, data, points, rtol=1e-12):
    """Nearest row of ``data`` for each query point, ties broken lexicographically.

    Returns ``(index, distance)``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    k = min(8, len(data))
    dist, idx = tree.query(pts, k=k)
    dist = dist.reshape(len(pts), k)
    idx = idx.reshape(len(pts), k)
    out = idx[:, 0].copy()
    if k > 1:
        tied = np.nonzero(dist[:, 1] <= dist[:, 0] * (1 + rtol))[0]
        for r in tied:
            cand = idx[r, dist[r] <= dist[r, 0] * (1 + rtol)]
            out[r] = cand[np.lexsort(data[cand].T[::-1])[0]]
    return out, dist[:, 0]


@dataclass(eq=False)
class SampledClosedSet:
    """A closed set ``C`` in ``R^d`` known through oracles and samples.

    ``membership`` and ``interior`` map an ``(n, d)`` array to a boolean
    array. ``segment_interior(a, b)`` answers whether each open segment
    ``(a_k, b_k)`` lies in the interior; when absent it is approximated by
    probing the interior oracle along the segment. ``boundary_distance``, if
    given, is a lower bound for the distance to the boundary and is only used
    to skip segment tests that are trivially true.
    """

    name: str
    dimension: int
    membership: Callable
    interior: Callable
    samples: np.ndarray
    boundary: np.ndarray
    resolution: float
    box: tuple
    metric: Callable = euclidean
    segment_oracle: Optional[Callable] = None
    boundary_distance: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).reshape(-1, self.dimension)
        self.boundary = np.asarray(self.boundary, dtype=bool).reshape(-1)
        if self.boundary.shape[0] != self.samples.shape[0]:
            raise ValueError("boundary mask length must match the sample count")
        if self.samples.shape[0] > MAX_SAMPLES:
            raise SizeError(f"{self.samples.shape[0]} samples exceed the guard of {MAX_SAMPLES}")
        self.box = (np.asarray(self.box[0], dtype=float), np.asarray(self.box[1], dtype=float))
        self.samples.setflags(write=False)
        self.boundary.setflags(write=False)

    @property
    def boundary_samples(self):
        return self.samples[self.boundary]

    @property
    def interior_samples(self):
        return self.samples[~self.boundary]

    @functools.cached_property
    def tree(self):
        return cKDTree(self.samples)

    @functools.cached_property
    def boundary_tree(self):
        pts = self.boundary_samples
        return cKDTree(pts) if len(pts) else None

    @functools.cached_property
    def interior_tree(self):
        pts = self.interior_samples
        return cKDTree(pts) if len(pts) else None

    def contains(self, points):
        return np.asarray(self.membership(np.atleast_2d(points)), dtype=bool)

    def nearest_sample(self, points):
        """Index of a nearest sample; ties go to the lexicographically smallest point."""
        return nearest_lex(self.tree, self.samples, points)

    def distance_to_set(self, points):
        """0 on members, otherwise the distance to the nearest sample."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d, _ = self.tree.query(pts)
        return np.where(self.contains(pts), 0.0, d)

    def segment_interior(self, a, b):
        a = np.atleast_2d(np.asarray(a, dtype=float))
        b = np.atleast_2d(np.asarray(b, dtype=float))
        if self.segment_oracle is not None:
            return np.asarray(self.segment_oracle(a, b), dtype=bool)
        return self._segment_by_probing(a, b)

    def _segment_by_probing(self, a, b):
        length = np.linalg.norm(b - a, axis=1)
        n = int(np.clip(np.ceil(length.max(initial=0.0) / (self.resolution / 8)), 8, 4096))
        ts = (np.arange(n) + 0.5) / n
        ok = np.ones(len(a), dtype=bool)
        for t in ts:
            ok &= self.interior(a + t * (b - a))
        return ok

    def spec(self):
        return {"generator": self.params.get("generator", self.name),
                "params": {k: v for k, v in self.params.items() if k not in ("generator", "resolution")},
                "resolution": self.resolution}

    def set_id(self):
        """Short stable identifier: generator name plus a hash of its parameters."""
        blob = json.dumps(self.spec(), sort_keys=True).encode()
        return f"{self.name}:{hashlib.sha256(blob).hexdigest()[:12]}"

    def validate(self, rng=None, n_triples=2000, tol=1e-9):
        """Check the standing invariants on samples and return a report dict."""
        rng = np.random.default_rng(0) if rng is None else rng
        pts = self.samples
        inner = self.interior(pts)
        member = self.membership(pts)
        interior_ok = bool(np.all(member[inner]))
        n = len(pts)
        i, j, k = (rng.integers(0, n, size=n_triples) for _ in range(3))
        dij = self.metric(pts[i], pts[j])
        dji = self.metric(pts[j], pts[i])
        djk = self.metric(pts[j], pts[k])
        dik = self.metric(pts[i], pts[k])
        same = np.all(pts[i] == pts[j], axis=1)
        symmetric = bool(np.all(np.abs(dij - dji) <= tol))
        zero_iff = bool(np.all((dij == 0) == same))
        triangle = bool(np.all(dik <= dij + djk + tol))
        regular = True
        worst = 0.0
        if self.boundary.any():
            if self.interior_tree is None:
                regular = False
                worst = math.inf
            else:
                d, _ = self.interior_tree.query(self.boundary_samples)
                worst = float(d.max())
                regular = worst <= self.resolution * (1 + 1e-9)
        return {"interior_implies_member": interior_ok, "metric_symmetric": symmetric,
                "metric_zero_iff_equal": zero_iff, "metric_triangle": triangle,
                "regular": regular, "worst_boundary_gap": worst,
                "samples": int(n), "boundary_samples": int(self.boundary.sum())}


def lattice(lo, hi, h):
    """Points of ``h * Z^d`` inside the box ``[lo, hi]``."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    axes = []
    count = 1
    for a, b in zip(lo, hi):
        ks = np.arange(math.ceil(a / h - 1e-9), math.floor(b / h + 1e-9) + 1)
        axes.append(ks * h)
        count *= len(ks)
    if count > MAX_SAMPLES:
        raise SizeError(f"lattice of {count} points exceeds the guard of {MAX_SAMPLES}")
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _check_resolution(h):
    if not h > 0:
        raise ConfigurationError("resolution must be positive")


def _directions(d):
    if d == 2:
        th = 2 * np.pi * np.arange(16) / 16
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    dirs = np.array([v for v in itertools.product((-1, 0, 1), repeat=d) if any(v)], dtype=float)
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def inner_layer(bnd_pts, interior, h, anchors=None):
    """One interior point within ``h/2`` of each boundary sample where one is found.

    Lattice points alone can sit far from sharp corners; this layer keeps
    every boundary sample close to a sampled interior point.
    """
    if len(bnd_pts) == 0:
        return bnd_pts
    out = np.full(bnd_pts.shape, np.nan)
    todo = np.ones(len(bnd_pts), dtype=bool)
    for step in (0.5 * h, 0.25 * h, 0.1 * h):
        for u in _directions(bnd_pts.shape[1]):
            if not todo.any():
                break
            cand = bnd_pts[todo] + step * u
            ok = interior(cand)
            idx = np.nonzero(todo)[0][ok]
            out[idx] = cand[ok]
            todo[idx] = False
    if todo.any() and anchors is not None and len(anchors):
        # narrow corners: step toward the closest interior lattice point
        dist, j = cKDTree(anchors).query(bnd_pts[todo])
        u = (anchors[j] - bnd_pts[todo]) / np.maximum(dist, 1e-300)[:, None]
        cand = bnd_pts[todo] + np.minimum(0.5 * h, 0.5 * dist)[:, None] * u
        ok = interior(cand)
        idx = np.nonzero(todo)[0][ok]
        out[idx] = cand[ok]
        todo[idx] = False
    return out[~todo]


def _assemble(name, d, membership, interior, inner_pts, bnd_pts, h, box, **kw):
    inner_pts = inner_pts[interior(inner_pts)] if len(inner_pts) else inner_pts
    layer = inner_layer(bnd_pts.reshape(-1, d), interior, h, inner_pts.reshape(-1, d))
    inner_pts = np.concatenate([inner_pts.reshape(-1, d), layer])
    samples = np.concatenate([bnd_pts.reshape(-1, d), inner_pts])
    mask = np.zeros(len(samples), dtype=bool)
    mask[:len(bnd_pts)] = True
    return SampledClosedSet(name, d, membership, interior, samples, mask, h, box, **kw)


# -- half-space ---------------------------------------------------------------

def half_space(d=2, resolution=0.05, extent=1.0):
    """``{u : u_1 >= 0}`` sampled in the window ``[-extent, extent]^d``."""
    _check_resolution(resolution)
    lo = np.full(d, -float(extent))
    hi = np.full(d, float(extent))

    def membership(p):
        return np.atleast_2d(p)[:, 0] >= 0

    def interior(p):
        return np.atleast_2d(p)[:, 0] > 0

    def segment(a, b):
        return (a[:, 0] >= 0) & (b[:, 0] >= 0) & ((a[:, 0] > 0) | (b[:, 0] > 0))

    def bdist(p):
        return np.abs(np.atleast_2d(p)[:, 0])

    pts = lattice(np.where(np.arange(d) == 0, 0.0, lo), hi, resolution)
    on = pts[:, 0] == 0
    return _assemble("half_space", d, membership, interior, pts[~on], pts[on], resolution, (lo, hi),
                     segment_oracle=segment, boundary_distance=bdist,
                     params={"generator": "half_space", "d": d, "extent": extent})


# -- closed ball --------------------------------------------------------------

def sphere_points(d, radius, h, seed=0):
    """Roughly ``h``-spaced points on the sphere of the given radius."""
    if d == 1:
        return np.array([[-radius], [radius]])
    if d == 2:
        n = max(8, math.ceil(2 * math.pi * radius / h))
        th = 2 * math.pi * np.arange(n) / n
        return radius * np.stack([np.cos(th), np.sin(th)], axis=1)
    area = 2 * math.pi ** (d / 2) / math.gamma(d / 2) * radius ** (d - 1)
    n = max(20, math.ceil(area / h ** (d - 1)))
    if n > MAX_SAMPLES:
        raise SizeError(f"{n} sphere samples exceed the guard")
    if d == 3:
        k = np.arange(n) + 0.5
        phi = np.arccos(1 - 2 * k / n)
        th = math.pi * (1 + 5 ** 0.5) * k
        return radius * np.stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)], axis=1)
    g = np.random.default_rng(seed).standard_normal((n, d))
    return radius * g / np.linalg.norm(g, axis=1, keepdims=True)


def closed_ball(d=2, radius=1.0, resolution=0.05, center=None):
    _check_resolution(resolution)
    radius = float(radius)
    c = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    slack = 1e-12 * max(1.0, radius)

    def membership(p):
        return np.linalg.norm(np.atleast_2d(p) - c, axis=1) <= radius + slack

    def interior(p):
        return np.linalg.norm(np.atleast_2d(p) - c, axis=1) < radius - slack

    def segment(a, b):
        # strict convexity: a chord between distinct points of the ball is interior
        return membership(a) & membership(b) & np.any(a != b, axis=1)

    def bdist(p):
        return np.abs(radius - np.linalg.norm(np.atleast_2d(p) - c, axis=1))

    lo, hi = c - radius, c + radius
    pts = lattice(lo, hi, resolution)
    return _assemble("closed_ball", d, membership, interior, pts,
                     c + sphere_points(d, radius, resolution), resolution, (lo, hi),
                     segment_oracle=segment, boundary_distance=bdist,
                     params={"generator": "closed_ball", "d": d, "radius": radius,
                             "center": c.tolist()})


# -- convex polytope ----------------------------------------------------------

def _simplex_lattice(verts, n):
    """Barycentric lattice with ``n`` subdivisions on the simplex spanned by ``verts``."""
    k = len(verts)
    out = []
    for comp in itertools.product(range(n + 1), repeat=k - 1):
        s = sum(comp)
        if s <= n:
            lam = np.array(comp + (n - s,), dtype=float) / n
            out.append(lam @ verts)
    return np.array(out)


def convex_polytope(vertices, resolution=0.05):
    """Convex hull of the given vertices (``d >= 2``)."""
    _check_resolution(resolution)
    verts = np.atleast_2d(np.asarray(vertices, dtype=float))
    d = verts.shape[1]
    if d < 2:
        raise ConfigurationError("convex_polytope needs d >= 2; use an interval via half_space")
    hull = ConvexHull(verts)
    normals = hull.equations[:, :-1]
    offsets = hull.equations[:, -1]
    scale = float(np.abs(verts).max())
    slack = 1e-12 * max(1.0, scale)

    def levels(p):
        return np.atleast_2d(p) @ normals.T + offsets

    def membership(p):
        return np.all(levels(p) <= slack, axis=1)

    def interior(p):
        return np.all(levels(p) < -slack, axis=1)

    def segment(a, b):
        la, lb = levels(a), levels(b)
        ok = np.all(la <= slack, axis=1) & np.all(lb <= slack, axis=1)
        # the open segment touches a facet only if both ends lie on it
        return ok & ~np.any((la > -slack) & (lb > -slack), axis=1)

    def bdist(p):
        return np.abs(levels(p)).min(axis=1)

    bnd = []
    for simplex in hull.simplices:
        sv = verts[simplex]
        edge = max(np.linalg.norm(sv[i] - sv[j]) for i in range(d) for j in range(i))
        bnd.append(_simplex_lattice(sv, max(1, math.ceil(edge / resolution))))
    bnd = np.unique(np.round(np.concatenate(bnd), 15), axis=0)
    lo, hi = verts.min(axis=0), verts.max(axis=0)
    return _assemble("convex_polytope", d, membership, interior, lattice(lo, hi, resolution),
                     bnd, resolution, (lo, hi), segment_oracle=segment, boundary_distance=bdist,
                     params={"generator": "convex_polytope", "vertices": verts.tolist()})


def closed_box(lo=(0.0,), hi=(1.0,), resolution=0.05):
    """Axis-aligned closed box ``[lo, hi]`` in any dimension (an interval when ``d = 1``).

    Samples form a tensor grid that contains the corners. The spacing is at
    most ``resolution / sqrt(d)`` along every axis so that each corner has an
    interior sample within ``resolution``.
    """
    _check_resolution(resolution)
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if lo.shape != hi.shape or np.any(hi <= lo):
        raise ConfigurationError("closed_box needs lo < hi componentwise")
    d = lo.size
    step = resolution / math.sqrt(d)
    axes = [np.linspace(a, b, max(3, math.ceil((b - a) / step - 1e-9) + 1)) for a, b in zip(lo, hi)]
    if math.prod(len(a) for a in axes) > MAX_SAMPLES:
        raise SizeError(f"closed_box grid exceeds the guard of {MAX_SAMPLES}")
    grids = np.meshgrid(*axes, indexing="ij")
    samples = np.stack([g.ravel() for g in grids], axis=1)
    on_face = np.zeros(len(samples), dtype=bool)
    for k, a in enumerate(axes):
        on_face |= (samples[:, k] == a[0]) | (samples[:, k] == a[-1])

    def membership(p):
        p = np.atleast_2d(p)
        return np.all((p >= lo) & (p <= hi), axis=1)

    def interior(p):
        p = np.atleast_2d(p)
        return np.all((p > lo) & (p < hi), axis=1)

    def segment(a, b):
        # convexity: an open segment between members is interior iff its midpoint is
        return membership(a) & membership(b) & interior(0.5 * (np.atleast_2d(a) + np.atleast_2d(b)))

    def bdist(p):
        p = np.atleast_2d(p)
        return np.minimum(p - lo, hi - p).min(axis=1)

    return SampledClosedSet("closed_box", d, membership, interior, samples, on_face, resolution,
                            (lo, hi), segment_oracle=segment, boundary_distance=bdist,
                            params={"generator": "closed_box", "lo": lo.tolist(), "hi": hi.tolist()})


# -- Koch snowflake -----------------------------------------------------------

def koch_vertices(iterations):
    """Counter-clockwise vertices of the snowflake inscribed in the unit circle."""
    if iterations < 0:
        raise ConfigurationError("iterations must be >= 0")
    if iterations > MAX_KOCH_ITERATIONS:
        raise SizeError(f"koch_snowflake iterations capped at {MAX_KOCH_ITERATIONS}")
    pts = np.exp(2j * np.pi * np.arange(3) / 3 + 0.5j * np.pi)
    rot = np.exp(-1j * np.pi / 3)
    for _ in range(iterations):
        a = pts
        b = np.roll(pts, -1)
        s1 = a + (b - a) / 3
        s2 = a + 2 * (b - a) / 3
        peak = s1 + (s2 - s1) * rot
        pts = np.stack([a, s1, peak, s2], axis=1).ravel()
    return np.stack([pts.real, pts.imag], axis=1)


def koch_snowflake(iterations=4, resolution=0.02):
    _check_resolution(resolution)
    verts = np.ascontiguousarray(koch_vertices(int(iterations)))
    edge_len = float(np.linalg.norm(verts[1] - verts[0]))
    tiny = 1e-12

    def bdist(p):
        return kernels.polygon_boundary_distance(np.atleast_2d(p), verts)

    def membership(p):
        p = np.atleast_2d(p)
        return kernels.points_in_polygon(p, verts) | (bdist(p) <= tiny)

    def interior(p):
        p = np.atleast_2d(p)
        return kernels.points_in_polygon(p, verts) & (bdist(p) > tiny)

    def segment(a, b):
        ok = membership(a) & membership(b) & np.any(a != b, axis=1)
        # trim the ends so boundary endpoints do not count as crossings
        da, db = a + 1e-9 * (b - a), b - 1e-9 * (b - a)
        clear = kernels.segments_clear_polygon(da, db, verts)
        return ok & clear & interior(0.5 * (a + b))

    n_sub = max(1, math.ceil(edge_len / resolution))
    t = np.arange(n_sub) / n_sub
    nxt = np.roll(verts, -1, axis=0)
    bnd = (verts[:, None, :] + t[None, :, None] * (nxt - verts)[:, None, :]).reshape(-1, 2)
    lo, hi = verts.min(axis=0), verts.max(axis=0)
    return _assemble("koch_snowflake", 2, membership, interior, lattice(lo, hi, resolution),
                     bnd, resolution, (lo, hi), segment_oracle=segment, boundary_distance=bdist,
                     params={"generator": "koch_snowflake", "iterations": int(iterations)})


# -- exponential cusp ---------------------------------------------------------

def cusp_profile(x):
    """``exp(-1/x^2)`` for ``x > 0`` and 0 otherwise."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0) ** 2), 0.0)


def _cusp_segment_one(a, b):
    """Exact-as-floats test that the open segment avoids the closed fjord."""
    d = b - a

    def h(t):
        p = a + t * d
        return p[1] - cusp_profile(p[0])

    ts = np.linspace(0.0, 1.0, 257)[1:-1]
    pts = a[None, :] + ts[:, None] * d[None, :]
    in_x = pts[:, 0] >= 0
    # the open segment meets {y = 0, x >= 0}
    if d[1] != 0:
        tc = -a[1] / d[1]
        if 0 < tc < 1 and a[0] + tc * d[0] >= 0:
            return False
    elif a[1] == 0 and np.any(in_x):
        return False
    # leaving a wall point into the fjord
    for p, direction in ((a, d), (b, -d)):
        if p[0] > 0:
            g = float(cusp_profile(p[0]))
            if p[1] == 0 and direction[1] > 0 and g > 0:
                return False
            if p[1] == g and g > 0:
                slope = direction[1] - 2.0 * p[0] ** -3 * g * direction[0]
                if slope < 0:
                    return False
    vals = pts[:, 1] - cusp_profile(pts[:, 0])
    bad = in_x & (pts[:, 1] >= 0) & (vals <= 0)
    if bad.any():
        return False
    cand = in_x & (pts[:, 1] >= 0)
    if cand.any():
        k = int(np.argmin(np.where(cand, vals, np.inf)))
        lo = ts[max(k - 1, 0)]
        hi = ts[min(k + 1, len(ts) - 1)]
        res = minimize_scalar(h, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        p = a + res.x * d
        if p[0] >= 0 and p[1] >= 0 and res.fun <= 0:
            return False
    return True


def exp_cusp_domain(resolution=0.01, extent=1.0):
    """``R^2`` minus the open fjord ``{x > 0, 0 < y < exp(-1/x^2)}``, windowed."""
    _check_resolution(resolution)
    ext = float(extent)

    def membership(p):
        p = np.atleast_2d(p)
        return ~((p[:, 0] > 0) & (p[:, 1] > 0) & (p[:, 1] < cusp_profile(p[:, 0])))

    def interior(p):
        p = np.atleast_2d(p)
        return ~((p[:, 0] >= 0) & (p[:, 1] >= 0) & (p[:, 1] <= cusp_profile(p[:, 0])))

    def segment(a, b):
        ok = membership(a) & membership(b)
        xmax = np.maximum(a[:, 0], b[:, 0])
        ymin = np.minimum(a[:, 1], b[:, 1])
        ymax = np.maximum(a[:, 1], b[:, 1])
        easy = (xmax < 0) | (ymax < 0) | (ymin > cusp_profile(xmax))
        out = ok.copy()
        for k in np.nonzero(ok & ~easy)[0]:
            out[k] = _cusp_segment_one(a[k], b[k])
        return out

    xs = np.arange(1, math.floor(ext / resolution + 1e-9) + 1) * resolution
    g = cusp_profile(xs)
    lower = np.stack([xs, np.zeros_like(xs)], axis=1)
    upper = np.stack([xs[g > 0], g[g > 0]], axis=1)
    bnd = np.concatenate([[[0.0, 0.0]], lower, upper])
    lo, hi = np.full(2, -ext), np.full(2, ext)
    return _assemble("exp_cusp_domain", 2, membership, interior, lattice(lo, hi, resolution),
                     bnd, resolution, (lo, hi), segment_oracle=segment,
                     params={"generator": "exp_cusp_domain", "extent": ext})


def full_space(d=2, resolution=0.05, extent=1.0):
    """All of ``R^d``; the boundary is empty."""
    _check_resolution(resolution)
    lo, hi = np.full(d, -float(extent)), np.full(d, float(extent))

    def everything(p):
        return np.ones(len(np.atleast_2d(p)), dtype=bool)

    def segment(a, b):
        return np.ones(len(a), dtype=bool)

    return _assemble("full_space", d, everything, everything, lattice(lo, hi, resolution),
                     np.zeros((0, d)), resolution, (lo, hi), segment_oracle=segment,
                     boundary_distance=lambda p: np.full(len(np.atleast_2d(p)), np.inf),
                     params={"generator": "full_space", "d": d, "extent": extent})


GENERATORS = {
    "half_space": half_space,
    "closed_ball": closed_ball,
    "convex_polytope": convex_polytope,
    "closed_box": closed_box,
    "koch_snowflake": koch_snowflake,
    "exp_cusp_domain": exp_cusp_domain,
    "full_space": full_space,
}


def domain_from_spec(spec: dict) -> SampledClosedSet:
    """Build a domain from ``{"generator", "params", "resolution"}``."""
    name = spec.get("generator")
    if name not in GENERATORS:
        raise ConfigurationError(f"unknown generator {name!r}; choose from {sorted(GENERATORS)}")
    params = dict(spec.get("params", {}))
    if "resolution" in spec:
        params["resolution"] = spec["resolution"]
    try:
        return GENERATORS[name](**params)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for {name}: {exc}") from None

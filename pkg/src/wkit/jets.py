"""Multi-indices, finite-order Whitney jets, Taylor remainders and jet seminorms.

A :class:`JetField` of order ``m`` on ``N`` sample points in ``R^d`` stores a
``(N, C(m+d, d))`` value array whose columns follow :func:`multi_indices`
(graded, then reverse-lexicographic). Because the ordering is graded, the
order-``k`` truncation of a jet is a column slice.
"""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .errors import ConfigurationError, MissingPointError, OrderError, StencilError


class MultiIndex(tuple):
    """Tuple of non-negative integers with multi-index arithmetic.

    ``+`` adds entrywise (tuple concatenation is not available).
    """

    def __new__(cls, entries):
        entries = tuple(int(e) for e in entries)
        if any(e < 0 for e in entries):
            raise ValueError(f"multi-index entries must be >= 0, got {entries}")
        return super().__new__(cls, entries)

    def order(self) -> int:
        return sum(self)

    def factorial(self) -> int:
        return math.prod(math.factorial(e) for e in self)

    def __add__(self, other):
        if len(other) != len(self):
            raise ValueError("multi-index dimensions differ")
        return MultiIndex(a + b for a, b in zip(self, other))

    def __repr__(self):
        return f"MultiIndex{tuple(self)}"

    @classmethod
    def zero(cls, d):
        return cls((0,) * d)

    @classmethod
    def unit(cls, d, k):
        return cls(1 if i == k else 0 for i in range(d))


def _compositions(n, d):
    if d == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in _compositions(n - first, d - 1):
            yield (first,) + rest


@functools.lru_cache(maxsize=None)
def multi_indices(d: int, m: int) -> tuple[MultiIndex, ...]:
    """All multi-indices in ``d`` variables of order ``<= m``, graded."""
    if d < 1 or m < 0:
        raise ValueError("need d >= 1 and m >= 0")
    return tuple(MultiIndex(c) for n in range(m + 1) for c in _compositions(n, d))


def n_multi_indices(d: int, m: int) -> int:
    return math.comb(m + d, d)


class MultiIndexTable:
    """Flat integer tables consumed by the kernels."""

    def __init__(self, d: int, m: int):
        self.d, self.m = d, m
        self.alphas = multi_indices(d, m)
        self.index = {a: i for i, a in enumerate(self.alphas)}
        self.exps = np.array(self.alphas, dtype=np.int64).reshape(len(self.alphas), d)
        self.orders = self.exps.sum(axis=1).astype(np.int64)
        self.inv_fact = np.array([1.0 / a.factorial() for a in self.alphas])
        ptr, ssum, sbeta = [0], [], []
        for a in self.alphas:
            for b in multi_indices(d, m - a.order()):
                ssum.append(self.index[a + b])
                sbeta.append(self.index[b])
            ptr.append(len(ssum))
        self.shift_ptr = np.array(ptr, dtype=np.int64)
        self.shift_sum = np.array(ssum, dtype=np.int64)
        self.shift_beta = np.array(sbeta, dtype=np.int64)


@functools.lru_cache(maxsize=None)
def index_table(d: int, m: int) -> MultiIndexTable:
    return MultiIndexTable(d, m)


def _as_points(points, d=None):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1) if d == 1 else pts.reshape(1, -1)
    return pts


@dataclass(frozen=True, eq=False)
class JetField:
    """Finite-order jet ``(f^alpha(x))`` on a finite sample of a compact set."""

    order: int
    points: np.ndarray
    values: np.ndarray
    _lookup: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        vals = np.array(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals.reshape(-1, 1)
        if self.order < 0:
            raise OrderError("jet order must be >= 0")
        need = n_multi_indices(pts.shape[1], self.order)
        if vals.shape != (pts.shape[0], need):
            raise ValueError(
                f"values must have shape ({pts.shape[0]}, {need}); got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("jet values must be finite")
        pts.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)
        lookup = {}
        for i, p in enumerate(map(tuple, pts)):
            lookup.setdefault(p, i)
        object.__setattr__(self, "_lookup", lookup)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def table(self) -> MultiIndexTable:
        return index_table(self.dimension, self.order)

    def __len__(self):
        return self.points.shape[0]

    def column(self, alpha) -> np.ndarray:
        return self.values[:, self.table.index[MultiIndex(alpha)]]

    def point_index(self, x) -> int:
        key = tuple(float(v) for v in np.ravel(x))
        try:
            return self._lookup[key]
        except KeyError:
            raise MissingPointError(f"{key} is not a sample point of this jet") from None

    def truncate(self, m: int) -> "JetField":
        _check_order(self, m)
        return JetField(m, self.points, self.values[:, :n_multi_indices(self.dimension, m)])

    def _compatible(self, other):
        if not isinstance(other, JetField):
            return NotImplemented
        if other.order != self.order or other.points.shape != self.points.shape \
                or not np.array_equal(other.points, self.points):
            raise ValueError("jets must share order and sample points")
        return True

    def __add__(self, other):
        if self._compatible(other) is NotImplemented:
            return NotImplemented
        return JetField(self.order, self.points, self.values + other.values)

    def __sub__(self, other):
        if self._compatible(other) is NotImplemented:
            return NotImplemented
        return JetField(self.order, self.points, self.values - other.values)

    def __mul__(self, scalar):
        return JetField(self.order, self.points, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    @classmethod
    def zeros(cls, points, order):
        pts = _as_points(points)
        return cls(order, pts, np.zeros((pts.shape[0], n_multi_indices(pts.shape[1], order))))


def _check_order(jet, m):
    if m < 0 or m > jet.order:
        raise OrderError(f"order {m} not available in a jet of order {jet.order}")


def _base_index(jet, base):
    if isinstance(base, (int, np.integer)):
        if not 0 <= base < len(jet):
            raise MissingPointError(f"sample index {base} out of range")
        return int(base)
    return jet.point_index(base)


def taylor_poly(jet: JetField, base, m: int, target) -> float:
    """Formal Taylor polynomial of order ``m`` at a sample point, evaluated at ``target``."""
    _check_order(jet, m)
    i = _base_index(jet, base)
    y = np.asarray(target, dtype=float).reshape(1, jet.dimension)
    tab = index_table(jet.dimension, m)
    vals = jet.values[:, :len(tab.alphas)]
    return float(kernels.taylor_eval(y, jet.points, vals, np.array([0]), np.array([i]), tab)[0])


def taylor_remainder(jet: JetField, base, m: int, alpha, target) -> float:
    """``f^alpha(y) - d^alpha Tay_x^m f(y)`` for sample points ``x``, ``y``."""
    _check_order(jet, m)
    alpha = MultiIndex(alpha)
    if alpha.order() > m:
        raise OrderError(f"|alpha| = {alpha.order()} exceeds m = {m}")
    i = _base_index(jet, base)
    j = _base_index(jet, target)
    tab = jet.table
    delta = jet.points[j] - jet.points[i]
    acc = 0.0
    for beta in multi_indices(jet.dimension, m - alpha.order()):
        mono = math.prod(float(delta[k]) ** beta[k] for k in range(len(beta))) / beta.factorial()
        acc += jet.values[i, tab.index[alpha + beta]] * mono
    return float(jet.values[j, tab.index[alpha]] - acc)


def seminorm_abs(jet: JetField, m: int) -> float:
    """``max |f^alpha(x)|`` over samples and ``|alpha| <= m``."""
    _check_order(jet, m)
    cols = jet.values[:, :n_multi_indices(jet.dimension, m)]
    return float(np.max(np.abs(cols))) if cols.size else 0.0


@dataclass(frozen=True)
class RemainderWitness:
    base: tuple
    target: tuple
    alpha: MultiIndex
    ratio: float
    distance: float

    def as_dict(self):
        return {"base": list(self.base), "target": list(self.target),
                "alpha": list(self.alpha), "ratio": self.ratio, "distance": self.distance}


@dataclass(frozen=True)
class QProfile:
    """Largest scaled remainder among pairs closer than each ``t``.

    ``subsampled[k]`` is True when the pairs at ``t[k]`` were too many and a
    seeded subset of base points was used; the value is then a lower bound.
    """

    t: np.ndarray
    q: np.ndarray
    empty: np.ndarray
    witnesses: tuple
    subsampled: np.ndarray


MAX_PAIRS = 1_000_000


def _pairs_within(tree, pts, t, max_pairs, rng):
    n = pts.shape[0]
    count = int(tree.count_neighbors(tree, t)) - n  # ordered pairs, self excluded
    if count <= 2 * max_pairs:
        pairs = tree.query_pairs(t, output_type="ndarray")
        return (np.concatenate([pairs[:, 0], pairs[:, 1]]),
                np.concatenate([pairs[:, 1], pairs[:, 0]]), False)
    n_base = max(1, int(n * max_pairs / count))
    base = np.sort(rng.choice(n, size=n_base, replace=False))
    hits = tree.query_ball_point(pts[base], t, return_sorted=True)
    pi = np.repeat(base, [len(h) for h in hits])
    pj = np.concatenate([np.asarray(h, dtype=np.int64) for h in hits])
    keep = pi != pj
    pi, pj = pi[keep], pj[keep]
    return np.concatenate([pi, pj]), np.concatenate([pj, pi]), True


def q_profile(jet: JetField, m: int, t_grid: Sequence[float], max_pairs: int = MAX_PAIRS,
              seed: int = 0) -> QProfile:
    _check_order(jet, m)
    t = np.asarray(t_grid, dtype=float).ravel()
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    tab = index_table(jet.dimension, m)
    vals = np.ascontiguousarray(jet.values[:, :len(tab.alphas)])
    tree = cKDTree(jet.points)
    rng = np.random.default_rng(seed)
    q = np.zeros(t.size)
    empty = np.ones(t.size, dtype=bool)
    sub = np.zeros(t.size, dtype=bool)
    wits = [None] * t.size
    best, best_w = 0.0, None
    have = False
    # ascending t: a pair within a small t is also within every larger t,
    # so the running maximum keeps q monotone even when pairs are subsampled
    for k in np.argsort(t, kind="stable"):
        pi, pj, sub[k] = _pairs_within(tree, jet.points, float(t[k]), max_pairs, rng)
        if pi.size:
            ratio, arg = kernels.remainder_ratios(jet.points, vals, pi, pj, tab, m)
            dist = np.linalg.norm(jet.points[pj] - jet.points[pi], axis=1)
            ratio = np.where(dist > 0, ratio, -1.0)
            c = int(np.argmax(ratio))
            if ratio[c] >= 0:
                have = True
                if ratio[c] > best or best_w is None:
                    best = float(ratio[c])
                    best_w = RemainderWitness(
                        tuple(jet.points[pi[c]].tolist()), tuple(jet.points[pj[c]].tolist()),
                        tab.alphas[int(arg[c])], best, float(dist[c]))
        if have:
            q[k], empty[k], wits[k] = best, False, best_w
    return QProfile(t, q, empty, tuple(wits), sub)


def q_seminorm(jet: JetField, m: int, t: float) -> float:
    """Sampled ``q_m(f, t)``; 0 when no pair lies within ``t`` (see :func:`q_profile`)."""
    if not t > 0:
        raise ValueError("t must be positive")
    return float(q_profile(jet, m, [t]).q[0])


@dataclass(frozen=True)
class SeminormReport:
    m: int
    abs: float
    q_values: tuple
    whitney_norm: float
    empty: tuple
    sample_count: int
    subsampled: tuple = ()

    def as_dict(self):
        return {"m": self.m, "abs": self.abs, "q_values": [list(p) for p in self.q_values],
                "whitney_norm": self.whitney_norm, "empty": list(self.empty),
                "sample_count": self.sample_count, "subsampled": list(self.subsampled)}


def seminorm_report(jet: JetField, m: int, t_grid: Sequence[float]) -> SeminormReport:
    prof = q_profile(jet, m, sorted(t_grid, reverse=True))
    a = seminorm_abs(jet, m)
    qmax = float(prof.q.max()) if prof.q.size else 0.0
    return SeminormReport(m, a, tuple(zip(prof.t.tolist(), prof.q.tolist())), a + qmax,
                          tuple(bool(e) for e in prof.empty), len(jet),
                          tuple(bool(e) for e in prof.subsampled))


@dataclass(frozen=True)
class JetCheckResult:
    passed: bool
    m: int
    tol: float
    q_values: tuple
    witness: RemainderWitness | None

    @property
    def verdict(self):
        return "PASS" if self.passed else "FAIL"

    def as_dict(self):
        return {"verdict": self.verdict, "m": self.m, "tol": self.tol,
                "q_values": [list(p) for p in self.q_values],
                "witness": None if self.witness is None else self.witness.as_dict()}


def whitney_jet_check(jet: JetField, m: int, t_grid: Sequence[float], tol: float,
                      max_pairs: int = MAX_PAIRS) -> JetCheckResult:
    """Decide whether the sampled ``q_m(t)`` has decayed below ``tol`` at the finest ``t``."""
    t = np.sort(np.asarray(t_grid, dtype=float).ravel())[::-1]
    if t.size < 3 or np.any(t <= 0) or t[0] / t[-1] < 100.0 * (1 - 1e-12):
        raise ConfigurationError("t_grid needs >= 3 positive entries spanning >= 2 decades")
    prof = q_profile(jet, m, t, max_pairs=max_pairs)
    q_small = float(prof.q[-1])
    passed = q_small < tol
    witness = None
    if not passed:
        witness = prof.witnesses[-1]
    return JetCheckResult(passed, m, float(tol), tuple(zip(prof.t.tolist(), prof.q.tolist())), witness)


def fd_step(order: int, x: np.ndarray) -> np.ndarray:
    """Per-axis central-difference step for a derivative of total order ``order``."""
    scale = np.maximum(1.0, np.abs(x))
    if order <= 1:
        return 1e-5 * scale
    return np.finfo(float).eps ** (1.0 / (order + 2)) * scale


def _fd_partial(f, pts, alpha, h, membership):
    d = pts.shape[1]
    axes = [range(a + 1) for a in alpha]
    out = np.zeros(pts.shape[0])
    for js in itertools.product(*axes):
        w = 1.0
        shift = np.zeros_like(pts)
        for k, (a, j) in enumerate(zip(alpha, js)):
            if a == 0:
                continue
            w *= (-1) ** j * math.comb(a, j)
            shift[:, k] = (a / 2.0 - j) * h[:, k]
        stencil = pts + shift
        if membership is not None:
            ok = np.asarray(membership(stencil), dtype=bool)
            if not np.all(ok):
                bad = int(np.argmin(ok))
                raise StencilError(
                    f"finite-difference stencil leaves the set near {pts[bad].tolist()}",
                    location=pts[bad].tolist())
        out += w * np.asarray(f(stencil), dtype=float).reshape(-1)
    denom = np.ones(pts.shape[0])
    for k in range(d):
        denom *= h[:, k] ** alpha[k]
    return out / denom


def jet_of_function(f: Callable, points, m: int, partials=None, h=None,
                    membership: Callable | None = None) -> JetField:
    """Jet ``(d^alpha f(x))_{|alpha| <= m}`` at the sample points.

    ``partials`` may be a callable ``(alpha, points) -> values`` or a mapping
    from multi-index tuples to callables; without it central differences are
    used, with step ``h`` (scalar) or :func:`fd_step`.
    """
    pts = _as_points(points)
    d = pts.shape[1]
    alphas = multi_indices(d, m)
    vals = np.empty((pts.shape[0], len(alphas)))
    for c, a in enumerate(alphas):
        if partials is not None:
            if isinstance(partials, Mapping):
                fn = partials.get(tuple(a))
                if fn is None and a.order() > 0:
                    raise KeyError(f"no partial supplied for multi-index {tuple(a)}")
                col = f(pts) if fn is None else fn(pts)
            else:
                col = partials(a, pts)
        elif a.order() == 0:
            col = f(pts)
        else:
            step = np.full_like(pts, float(h)) if h is not None else fd_step(a.order(), pts)
            col = _fd_partial(f, pts, a, step, membership)
        vals[:, c] = np.broadcast_to(np.asarray(col, dtype=float).reshape(-1), (pts.shape[0],))
    return JetField(m, pts, vals)

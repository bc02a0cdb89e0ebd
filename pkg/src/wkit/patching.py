"""Atlases, vector bundles and the assembled extension operator on a manifold.

Manifolds are chart systems. Two kinds are supported:

* ``"euclidean"``: an open union of axis-aligned boxes in ``R^d``; chart ``i``
  is the diagonal affine map ``u = (x - offset) / scale``.
* ``"circle"``: ``S^1`` in angle coordinates ``theta in [0, 2 pi)``; chart ``i``
  unwraps the angle around a centre ``c`` into ``(c - w, c + w)``.

A section of a rank ``r`` bundle is carried chart by chart as a *local
representative* ``f_i : U_i -> R^r`` (stages ``U`` and ``V``) or as per-chart
jets on the samples of ``C`` (stage ``C``). Transition matrices come from
per-chart gauges, ``Phi_ij = G_i G_j^{-1}``, so the cocycle identity holds by
construction.

The global extension operator is the composite
``glue . mixing_map . local_extend . restrict_section``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.spatial import cKDTree

from .cusp import (CuspCertificate, FjordCertificate, check_no_narrow_fjords,
                   check_outward_cusps)
from .domains import SampledClosedSet
from .errors import (ConfigurationError, CoverageError, CuspConditionError, GlueError,
                     IndexingError)
from .extension import BumpSystem, extend_jet, mollifier, whitney_decompose
from .jets import JetField, jet_of_function

TWO_PI = 2.0 * math.pi
DEFAULT_TOL = 1e-8


def wrap_angle(t):
    """Map angles to ``(-pi, pi]``; values already in range are returned untouched."""
    t = np.asarray(t, dtype=float)
    return np.where(t > math.pi, t - TWO_PI, np.where(t <= -math.pi, t + TWO_PI, t))


# -- charts -------------------------------------------------------------------

@dataclass
class Chart:
    """One chart: the open box ``U`` and the shrunken box ``V`` in chart coordinates."""

    name: str
    lo: np.ndarray
    hi: np.ndarray
    vlo: np.ndarray
    vhi: np.ndarray
    kind: str = "affine"
    scale: np.ndarray = None
    offset: np.ndarray = None
    center: float = 0.0

    def __post_init__(self):
        for attr in ("lo", "hi", "vlo", "vhi"):
            setattr(self, attr, np.atleast_1d(np.asarray(getattr(self, attr), dtype=float)))
        d = self.lo.size
        if self.kind == "affine":
            self.scale = np.ones(d) if self.scale is None else np.atleast_1d(np.asarray(self.scale, float))
            self.offset = np.zeros(d) if self.offset is None else np.atleast_1d(np.asarray(self.offset, float))
            if np.any(self.scale == 0):
                raise ConfigurationError(f"chart {self.name}: scale entries must be nonzero")
        elif self.kind == "angle":
            if d != 1:
                raise ConfigurationError("angle charts are one-dimensional")
            self.scale = np.ones(1)
            self.offset = np.zeros(1)
            if self.hi[0] - self.lo[0] >= TWO_PI:
                raise ConfigurationError(f"chart {self.name}: an angle chart must be shorter than 2 pi")
        else:
            raise ConfigurationError(f"unknown chart kind {self.kind!r}")
        if not (np.all(self.lo < self.vlo) and np.all(self.vlo < self.vhi) and np.all(self.vhi < self.hi)):
            raise ConfigurationError(f"chart {self.name}: need lo < v_lo < v_hi < hi")

    @property
    def dimension(self):
        return self.lo.size

    @property
    def jacobian(self):
        """Constant diagonal of ``dx/du``."""
        return self.scale

    def to_chart(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "angle":
            return self.center + wrap_angle(x - self.center)
        return (x - self.offset) / self.scale

    def from_chart(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if self.kind == "angle":
            return np.mod(u, TWO_PI)
        return self.scale * u + self.offset

    def _in_box(self, u, lo, hi, closed=False):
        if closed:
            return np.all((u >= lo) & (u <= hi), axis=1)
        return np.all((u > lo) & (u < hi), axis=1)

    def in_U(self, x):
        return self._in_box(self.to_chart(x), self.lo, self.hi)

    def in_V(self, x, closed=False):
        return self._in_box(self.to_chart(x), self.vlo, self.vhi, closed)

    def u_in_V(self, u, closed=False):
        return self._in_box(np.atleast_2d(u), self.vlo, self.vhi, closed)

    def psi(self, x):
        """Product bump on ``V``: positive exactly on the open box ``V``."""
        u = self.to_chart(x)
        mid = 0.5 * (self.vlo + self.vhi)
        half = 0.5 * (self.vhi - self.vlo)
        out = np.prod(mollifier((u - mid) / half), axis=1)
        return np.where(self.in_U(x), out, 0.0)

    def global_box(self):
        """``U`` as a box in global coordinates (affine charts only)."""
        a = self.scale * self.lo + self.offset
        b = self.scale * self.hi + self.offset
        return np.minimum(a, b), np.maximum(a, b)

    def to_spec(self):
        out = {"name": self.name, "box": [self.lo.tolist(), self.hi.tolist()],
               "v_box": [self.vlo.tolist(), self.vhi.tolist()]}
        if self.kind == "angle":
            out["to_global"] = {"angle_center": self.center}
        else:
            out["to_global"] = {"scale": self.scale.tolist(), "offset": self.offset.tolist()}
        return out


# -- bundle gauges --------------------------------------------------------------

def _rotation(t):
    c, s = np.cos(t), np.sin(t)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


class Gauge:
    """Per-chart frame change ``G_i(x)``; transitions are ``G_i G_j^{-1}``."""

    def __init__(self, rank, kind="trivial", params=None):
        self.rank = int(rank)
        self.kind = kind
        self.params = params or {}
        if kind == "rotation" and self.rank != 2:
            raise ConfigurationError("rotation gauge needs rank 2")
        if kind == "constant":
            mats = [np.asarray(m, dtype=float) for m in self.params["matrices"]]
            for m in mats:
                if m.shape != (self.rank, self.rank) or abs(np.linalg.det(m)) < 1e-12:
                    raise ConfigurationError("constant gauge matrices must be invertible rank x rank")
            self._mats = mats
            self._inv = [np.linalg.inv(m) for m in mats]
        elif kind not in ("trivial", "rotation"):
            raise ConfigurationError(f"unknown bundle transition kind {kind!r}")

    @property
    def is_constant(self):
        return self.kind in ("trivial", "constant")

    def matrix(self, i, x):
        n = len(x)
        if self.kind == "trivial":
            return np.broadcast_to(np.eye(self.rank), (n, self.rank, self.rank))
        if self.kind == "constant":
            return np.broadcast_to(self._mats[i], (n, self.rank, self.rank))
        rate = self.params["rates"][i]
        return _rotation(rate * x[:, 0])

    def inverse(self, i, x):
        n = len(x)
        if self.kind == "trivial":
            return np.broadcast_to(np.eye(self.rank), (n, self.rank, self.rank))
        if self.kind == "constant":
            return np.broadcast_to(self._inv[i], (n, self.rank, self.rank))
        return _rotation(-self.params["rates"][i] * x[:, 0])

    def to_spec(self):
        if self.kind == "trivial":
            return "trivial"
        if self.kind == "constant":
            return {"gauge": "constant", "matrices": [m.tolist() for m in self._mats]}
        return {"gauge": "rotation", "rates": list(self.params["rates"])}


# -- atlas --------------------------------------------------------------------

class Atlas:
    """Finite atlas with shrunken cover, product-bump partition of unity and a bundle."""

    def __init__(self, charts, manifold="euclidean", rank=1, gauge=None):
        if not charts:
            raise ConfigurationError("an atlas needs at least one chart")
        self.charts = list(charts)
        self.manifold = manifold
        self.rank = int(rank)
        self.gauge = Gauge(rank) if gauge is None else gauge
        if self.gauge.rank != self.rank:
            raise ConfigurationError("gauge rank differs from bundle rank")
        d = {c.dimension for c in self.charts}
        if len(d) != 1:
            raise ConfigurationError("all charts must share one dimension")
        self.dimension = d.pop()
        if manifold == "circle" and any(c.kind != "angle" for c in self.charts):
            raise ConfigurationError("circle atlases use angle charts")
        if manifold == "euclidean" and any(c.kind != "affine" for c in self.charts):
            raise ConfigurationError("euclidean atlases use affine charts")
        self.J = self._neighbours()

    def __len__(self):
        return len(self.charts)

    # geometry -------------------------------------------------------------
    def _neighbours(self):
        n = len(self.charts)
        if self.manifold == "euclidean":
            boxes = [c.global_box() for c in self.charts]
            return [tuple(j for j in range(n)
                          if np.all(np.maximum(boxes[i][0], boxes[j][0]) < np.minimum(boxes[i][1], boxes[j][1])))
                    for i in range(n)]
        x = self.sample_points(1e-3)
        inside = np.stack([c.in_U(x) for c in self.charts], axis=1)
        return [tuple(j for j in range(n) if np.any(inside[:, i] & inside[:, j])) for i in range(n)]

    def sample_points(self, spacing=0.01):
        """Grid of manifold points covering every chart domain."""
        if self.manifold == "circle":
            n = max(8, int(math.ceil(TWO_PI / spacing)))
            return (TWO_PI * np.arange(n) / n).reshape(-1, 1)
        boxes = [c.global_box() for c in self.charts]
        lo = np.min([b[0] for b in boxes], axis=0)
        hi = np.max([b[1] for b in boxes], axis=0)
        axes = [np.linspace(a, b, int(math.ceil((b - a) / spacing)) + 1) for a, b in zip(lo, hi)]
        grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
        return grid[self.covered(grid)]

    def covered(self, x):
        return np.any(np.stack([c.in_U(x) for c in self.charts], axis=1), axis=1)

    def in_V_union(self, x):
        return np.any(np.stack([c.in_V(x) for c in self.charts], axis=1), axis=1)

    # bundle -----------------------------------------------------------------
    def transition(self, i, j, x):
        """``Phi_ij(x)``: maps chart-``j`` fibre coordinates to chart-``i`` ones."""
        x = np.atleast_2d(x)
        if i == j or self.gauge.kind == "trivial":
            return np.broadcast_to(np.eye(self.rank), (len(x), self.rank, self.rank))
        return self.gauge.matrix(i, x) @ self.gauge.inverse(j, x)

    def apply_transition(self, i, j, x, values):
        if i == j or self.gauge.kind == "trivial":
            return np.asarray(values, dtype=float)
        return np.einsum("nab,nb->na", self.transition(i, j, x), values)

    # partition of unity -----------------------------------------------------
    def psi(self, x):
        x = np.atleast_2d(x)
        return np.stack([c.psi(x) for c in self.charts], axis=1)

    def chi(self, x):
        """``(n, charts)`` partition of unity; rows are zero where no ``V_i`` covers ``x``."""
        p = self.psi(x)
        total = p.sum(axis=1, keepdims=True)
        return np.divide(p, total, out=np.zeros_like(p), where=total > 0)

    def check(self, spacing=0.01, tol_cocycle=1e-9, tol_pou=1e-10):
        """Cocycle, partition-of-unity and local-finiteness report on sampled points."""
        x = self.sample_points(spacing)
        inU = np.stack([c.in_U(x) for c in self.charts], axis=1)
        inV = np.stack([c.in_V(x) for c in self.charts], axis=1)
        chi = self.chi(x)
        cover = inV.any(axis=1)
        pou_err = float(np.abs(chi[cover].sum(axis=1) - 1).max(initial=0.0))
        support_ok = bool(np.all(chi[~inV] == 0)) and bool(np.all(chi >= 0))
        cocycle = 0.0
        n = len(self.charts)
        for i in range(n):
            for j in self.J[i]:
                for k in self.J[j]:
                    m = inU[:, i] & inU[:, j] & inU[:, k]
                    if m.any():
                        xs = x[m]
                        lhs = self.transition(i, k, xs)
                        rhs = self.transition(i, j, xs) @ self.transition(j, k, xs)
                        cocycle = max(cocycle, float(np.abs(lhs - rhs).max()))
        B = int(inU.sum(axis=1).max(initial=0))
        return {"cocycle_defect": cocycle, "cocycle_ok": cocycle <= tol_cocycle,
                "pou_defect": pou_err, "pou_ok": pou_err <= tol_pou, "support_ok": support_ok,
                "V_covers_samples": bool(cover.all()), "B": B, "samples": int(len(x))}

    # serialization ----------------------------------------------------------
    def to_spec(self):
        charts = []
        for i, c in enumerate(self.charts):
            spec = c.to_spec()
            trans = {}
            for j in self.J[i]:
                if j == i:
                    continue
                o = self.charts[j]
                if c.kind == "angle":
                    trans[str(j)] = "angle-shift"
                else:
                    trans[str(j)] = {"matrix": (c.scale / o.scale).tolist(),
                                     "offset": ((c.offset - o.offset) / o.scale).tolist()}
            spec["transition_to"] = trans
            charts.append(spec)
        return {"manifold": self.manifold, "dimension": self.dimension, "charts": charts,
                "pou": "product-mollifier",
                "bundle": {"rank": self.rank, "transitions": self.gauge.to_spec()}}


def atlas_from_spec(spec: dict) -> Atlas:
    """Rebuild an :class:`Atlas` from its JSON form; ``transition_to`` entries are cross-checked."""
    try:
        manifold = spec.get("manifold", "euclidean")
        charts = []
        for k, c in enumerate(spec["charts"]):
            tg = c.get("to_global", {})
            common = dict(name=c.get("name", f"chart{k}"), lo=c["box"][0], hi=c["box"][1],
                          vlo=c["v_box"][0], vhi=c["v_box"][1])
            if "angle_center" in tg:
                charts.append(Chart(kind="angle", center=float(tg["angle_center"]), **common))
            else:
                charts.append(Chart(kind="affine", scale=tg.get("scale"), offset=tg.get("offset"), **common))
        if spec.get("pou", "product-mollifier") != "product-mollifier":
            raise ConfigurationError(f"unsupported partition of unity {spec['pou']!r}")
        bundle = spec.get("bundle", {"rank": 1, "transitions": "trivial"})
        rank = int(bundle.get("rank", 1))
        tr = bundle.get("transitions", "trivial")
        if tr == "trivial":
            gauge = Gauge(rank)
        else:
            gauge = Gauge(rank, tr["gauge"], {k: v for k, v in tr.items() if k != "gauge"})
        atlas = Atlas(charts, manifold, rank, gauge)
    except (KeyError, TypeError, IndexError) as exc:
        raise ConfigurationError(f"malformed atlas spec: {exc!r}") from None
    derived = atlas.to_spec()["charts"]
    for k, c in enumerate(spec["charts"]):
        for j, t in c.get("transition_to", {}).items():
            want = derived[k]["transition_to"].get(str(j))
            if want is None:
                raise ConfigurationError(f"chart {k} declares a transition to non-overlapping chart {j}")
            if isinstance(t, dict) and not (np.allclose(t["matrix"], want["matrix"])
                                            and np.allclose(t["offset"], want["offset"])):
                raise ConfigurationError(f"transition {k}->{j} disagrees with the chart maps")
    return atlas


def circle_atlas(overlap=0.5, v_overlap=0.25, rank=1, gauge=None) -> Atlas:
    """``S^1`` as two arcs centred at ``pi/2`` and ``3 pi/2``."""
    if not 0 < v_overlap < overlap < math.pi / 2:
        raise ConfigurationError("need 0 < v_overlap < overlap < pi/2")
    charts = []
    for k, c in enumerate((0.5 * math.pi, 1.5 * math.pi)):
        w, v = 0.5 * math.pi + overlap, 0.5 * math.pi + v_overlap
        charts.append(Chart(f"arc{k}", [c - w], [c + w], [c - v], [c + v], kind="angle", center=c))
    return Atlas(charts, "circle", rank, gauge)


def box_atlas(boxes, scales=None, offsets=None, shrink=0.1, rank=1, gauge=None) -> Atlas:
    """Affine charts on given global boxes; ``V`` is ``U`` shrunk by ``shrink`` of its width per side."""
    charts = []
    for k, (lo, hi) in enumerate(boxes):
        lo = np.atleast_1d(np.asarray(lo, float))
        hi = np.atleast_1d(np.asarray(hi, float))
        s = np.ones_like(lo) if scales is None else np.atleast_1d(np.asarray(scales[k], float))
        o = np.zeros_like(lo) if offsets is None else np.atleast_1d(np.asarray(offsets[k], float))
        ua, ub = (lo - o) / s, (hi - o) / s
        ulo, uhi = np.minimum(ua, ub), np.maximum(ua, ub)
        pad = shrink * (uhi - ulo)
        charts.append(Chart(f"box{k}", ulo, uhi, ulo + pad, uhi - pad, scale=s, offset=o))
    return Atlas(charts, "euclidean", rank, gauge)


# -- closed subsets of the manifold -------------------------------------------

def closed_arc(a, b, resolution=0.01):
    """Closed arc from angle ``a`` counter-clockwise to ``b`` on ``S^1`` (length < 2 pi)."""
    length = float(b - a)
    if not 0 < length < TWO_PI:
        raise ConfigurationError("arc length must lie in (0, 2 pi)")
    n = int(math.ceil(length / resolution - 1e-9))
    t = np.mod(a + length * np.arange(n + 1) / n, TWO_PI)
    tol = 1e-12

    def offset(p):
        return np.mod(np.atleast_2d(p)[:, 0] - a, TWO_PI)

    def membership(p):
        o = offset(p)
        return (o <= length + tol) | (o >= TWO_PI - tol)

    def interior(p):
        o = offset(p)
        return (o > tol) & (o < length - tol)

    mask = np.zeros(n + 1, dtype=bool)
    mask[[0, -1]] = True
    return SampledClosedSet("closed_arc", 1, membership, interior, t.reshape(-1, 1), mask,
                            length / n, (np.zeros(1), np.full(1, TWO_PI)),
                            params={"generator": "closed_arc", "a": a, "b": b})


# -- sections -----------------------------------------------------------------

class ChartRep:
    """Local representative ``u -> (n, rank)`` with optional exact partials."""

    def __init__(self, fn, rank, partials=None):
        self.fn = fn
        self.rank = int(rank)
        self.partials = partials

    def __call__(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        out = np.asarray(self.fn(u), dtype=float)
        return out.reshape(len(u), self.rank)

    @classmethod
    def zero(cls, rank):
        return cls(lambda u: np.zeros((len(u), rank)), rank, lambda a, u: np.zeros((len(u), rank)))


@dataclass
class ChartJets:
    """Stage-``C`` data of one chart: jets per bundle component on the chart images of ``C``."""

    points: np.ndarray          # chart coordinates
    sample_index: np.ndarray    # rows of C.samples
    jets: list                  # one JetField per component

    def values(self):
        if not self.jets:
            return np.zeros((len(self.points), 0))
        return np.stack([j.values[:, 0] for j in self.jets], axis=1)


@dataclass(frozen=True)
class CompactSupportTag:
    """Charts where the section may be nonzero, with a bounding box per chart."""

    charts: frozenset
    boxes: dict = field(default_factory=dict, hash=False, compare=False)

    def as_dict(self):
        return {"charts": sorted(self.charts),
                "boxes": {str(k): [np.asarray(v[0]).tolist(), np.asarray(v[1]).tolist()]
                          for k, v in sorted(self.boxes.items())}}


@dataclass
class LocalSectionFamily:
    """Per-chart representatives at stage ``"U"``, ``"V"`` or ``"C"``."""

    atlas: Atlas
    stage: str
    reps: list
    tag: Optional[CompactSupportTag] = None
    subset: Optional[SampledClosedSet] = None
    consistent: Optional[bool] = None
    report: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.stage not in ("U", "V", "C"):
            raise ValueError(f"unknown stage {self.stage!r}")
        if len(self.reps) != len(self.atlas):
            raise IndexingError("one representative per chart is required")

    def evaluate(self, i, u):
        if self.stage == "C":
            raise TypeError("stage-C families are sampled; read .reps[i].values()")
        return self.reps[i](u)

    def values_at(self, x, chart=None):
        """Values at manifold points in the trivialization of ``chart`` (default: first chart containing each point)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.full((len(x), self.atlas.rank), np.nan)
        done = np.zeros(len(x), dtype=bool)
        order = range(len(self.atlas)) if chart is None else [chart]
        for i in order:
            c = self.atlas.charts[i]
            m = ~done & (c.in_U(x) if self.stage == "U" else c.in_V(x))
            if m.any():
                out[m] = self.reps[i](c.to_chart(x[m]))
                done |= m
        return out

    def scaled(self, a):
        if self.stage == "C":
            reps = [ChartJets(r.points, r.sample_index, [j * a for j in r.jets]) for r in self.reps]
        else:
            reps = [ChartRep(lambda u, r=r: a * r(u), r.rank) for r in self.reps]
        return LocalSectionFamily(self.atlas, self.stage, reps, self.tag, self.subset)

    def __add__(self, other):
        if self.stage != other.stage:
            raise ValueError("families must share a stage")
        if self.stage == "C":
            reps = [ChartJets(r.points, r.sample_index, [a + b for a, b in zip(r.jets, s.jets)])
                    for r, s in zip(self.reps, other.reps)]
        else:
            reps = [ChartRep(lambda u, r=r, s=s: r(u) + s(u), r.rank) for r, s in zip(self.reps, other.reps)]
        tag = None
        if self.tag is not None and other.tag is not None:
            boxes = dict(other.tag.boxes)
            boxes.update(self.tag.boxes)
            tag = CompactSupportTag(self.tag.charts | other.tag.charts, boxes)
        return LocalSectionFamily(self.atlas, self.stage, reps, tag, self.subset)


class GlobalSection:
    """A section given in a reference frame on the manifold, with optional exact partials.

    ``values(x) -> (n, rank)``; ``partials(alpha, x) -> (n, rank)`` in global
    coordinates (the angle on ``S^1``).
    """

    def __init__(self, values, rank, partials=None):
        self.values = values
        self.rank = int(rank)
        self.partials = partials

    @classmethod
    def trig(cls, polys):
        """Components given as :class:`~wkit.trig.TrigPoly` in the angle."""
        polys = list(polys)

        def values(x):
            t = np.atleast_2d(x)[:, 0]
            return np.stack([p(t) for p in polys], axis=1)

        def partials(alpha, x):
            t = np.atleast_2d(x)[:, 0]
            return np.stack([p.derivative(alpha[0])(t) if alpha[0] else p(t) for p in polys], axis=1)

        return cls(values, len(polys), partials)

    @classmethod
    def polynomial(cls, polys):
        polys = list(polys)

        def values(x):
            return np.stack([p(np.atleast_2d(x)) for p in polys], axis=1)

        def partials(alpha, x):
            return np.stack([p.partials(alpha, np.atleast_2d(x)) for p in polys], axis=1)

        return cls(values, len(polys), partials)


def family_from_global(atlas: Atlas, sec: GlobalSection, scan_spacing=0.01, zero_tol=1e-12):
    """Stage-``U`` family ``f_i = G_i sigma`` with a support tag found by scanning."""
    if sec.rank != atlas.rank:
        raise ValueError("section rank differs from bundle rank")
    reps = []
    for i, c in enumerate(atlas.charts):
        def fn(u, i=i, c=c):
            x = c.from_chart(u)
            v = sec.values(x)
            return v if atlas.gauge.kind == "trivial" else np.einsum("nab,nb->na", atlas.gauge.matrix(i, x), v)

        partials = None
        if sec.partials is not None and atlas.gauge.is_constant:
            def partials(alpha, u, i=i, c=c):
                x = c.from_chart(u)
                factor = float(np.prod(c.jacobian ** np.asarray(alpha)))
                v = factor * sec.partials(alpha, x)
                return v if atlas.gauge.kind == "trivial" else np.einsum("nab,nb->na", atlas.gauge.matrix(i, x), v)
        reps.append(ChartRep(fn, atlas.rank, partials))
    fam = LocalSectionFamily(atlas, "U", reps)
    return LocalSectionFamily(atlas, "U", reps, scan_support(fam, scan_spacing, zero_tol))


def scan_support(family, spacing=0.01, zero_tol=1e-12):
    """Tag charts whose representative exceeds ``zero_tol`` on a sample grid."""
    atlas = family.atlas
    x = atlas.sample_points(spacing)
    charts, boxes = set(), {}
    for i, c in enumerate(atlas.charts):
        m = c.in_U(x) if family.stage == "U" else c.in_V(x)
        if not m.any():
            continue
        u = c.to_chart(x[m])
        nz = np.abs(family.reps[i](u)).max(axis=1) > zero_tol
        if nz.any():
            charts.add(i)
            boxes[i] = (u[nz].min(axis=0), u[nz].max(axis=0))
    return CompactSupportTag(frozenset(charts), boxes)


# -- restriction ----------------------------------------------------------------

def restrict_section(sec: LocalSectionFamily, C: SampledClosedSet, m=0, h=None) -> LocalSectionFamily:
    """Order-``m`` jets of each representative on the chart images of ``C``'s samples."""
    if sec.stage != "U":
        raise ValueError("restrict_section expects a stage-U family")
    atlas = sec.atlas
    x = C.samples
    if x.shape[1] != atlas.dimension:
        raise IndexingError(f"C has dimension {x.shape[1]}, the atlas {atlas.dimension}")
    seen = np.zeros(len(x), dtype=bool)
    reps = []
    for i, c in enumerate(atlas.charts):
        mask = c.in_U(x)
        seen |= mask
        idx = np.nonzero(mask)[0]
        u = c.to_chart(x[idx]) if idx.size else np.zeros((0, atlas.dimension))
        jets = []
        rep = sec.reps[i]
        for comp in range(atlas.rank):
            if not idx.size:
                jets.append(JetField.zeros(np.zeros((0, atlas.dimension)), m))
                continue

            def f(p, rep=rep, comp=comp):
                return rep(p)[:, comp]

            partials = None
            if rep.partials is not None:
                def partials(alpha, p, rep=rep, comp=comp):
                    return rep.partials(alpha, p)[:, comp]
            jets.append(jet_of_function(f, u, m, partials=partials, h=h))
        reps.append(ChartJets(u, idx, jets))
    if not seen.all():
        k = int(np.argmin(seen))
        raise IndexingError(f"sample {x[k].tolist()} of C lies in no chart")
    tag = None
    if sec.tag is not None:
        tag = CompactSupportTag(frozenset(i for i in sec.tag.charts if len(reps[i].points)),
                                {i: sec.tag.boxes[i] for i in sec.tag.charts
                                 if len(reps[i].points) and i in sec.tag.boxes})
    return LocalSectionFamily(atlas, "C", reps, tag, C)


# -- mixing map -------------------------------------------------------------------

def mixing_map(family: LocalSectionFamily) -> LocalSectionFamily:
    """``h_i = sum_{j in J_i} chi_j Phi_ij f_j`` on ``V_i``, each summand zero off ``V_j``."""
    if family.stage != "U":
        raise ValueError("mixing_map expects a stage-U family")
    if family.tag is None:
        raise ValueError("mixing_map needs a CompactSupportTag (finite-support family)")
    atlas = family.atlas
    active = family.tag.charts
    reps = []
    out_charts, boxes = set(), {}
    for i, ci in enumerate(atlas.charts):
        js = tuple(j for j in atlas.J[i] if j in active)
        if js:
            out_charts.add(i)
            boxes[i] = (ci.vlo.copy(), ci.vhi.copy())
        reps.append(ChartRep(_mixed(atlas, family, i, js), atlas.rank))
    return LocalSectionFamily(atlas, "V", reps, CompactSupportTag(frozenset(out_charts), boxes),
                              family.subset)


def _mixed(atlas, family, i, js):
    ci = atlas.charts[i]

    def h(u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        out = np.zeros((len(u), atlas.rank))
        if not js:
            return out
        x = ci.from_chart(u)
        psi = atlas.psi(x)
        total = psi.sum(axis=1)
        bad = (total <= 0) & ci.u_in_V(u, closed=True)
        if bad.any():
            k = int(np.argmax(bad))
            raise CoverageError(f"no partition-of-unity weight at {x[k].tolist()} (chart {i})")
        safe = np.where(total > 0, total, 1.0)
        for j in js:
            cj = atlas.charts[j]
            mask = (psi[:, j] > 0) & cj.in_V(x)
            if not mask.any():
                continue
            xs = x[mask]
            fj = family.reps[j](cj.to_chart(xs))
            out[mask] += (psi[mask, j] / safe[mask])[:, None] * atlas.apply_transition(i, j, xs, fj)
        return out

    return h


# -- compatibility ----------------------------------------------------------------

def compatibility_check(family: LocalSectionFamily, tolerance=DEFAULT_TOL, spacing=0.005) -> dict:
    """Max overlap defect ``|f_i - Phi_ij f_j|`` per chart pair."""
    atlas = family.atlas
    pairs = {}
    worst = {"defect": 0.0, "pair": None, "sample": None}
    n = len(atlas)
    if family.stage == "C":
        for i in range(n):
            ri = family.reps[i]
            pos_i = {int(s): k for k, s in enumerate(ri.sample_index)}
            vi = ri.values()
            for j in range(i + 1, n):
                rj = family.reps[j]
                common = [(pos_i[int(s)], k) for k, s in enumerate(rj.sample_index) if int(s) in pos_i]
                if not common:
                    continue
                a, b = np.array(common).T
                xs = family.subset.samples[ri.sample_index[a]]
                diff = np.abs(vi[a] - atlas.apply_transition(i, j, xs, rj.values()[b])).max(axis=1)
                _record(pairs, worst, i, j, diff, xs)
    else:
        x = atlas.sample_points(spacing)
        for i in range(n):
            ci = atlas.charts[i]
            for j in atlas.J[i]:
                if j <= i:
                    continue
                cj = atlas.charts[j]
                if family.stage == "U":
                    m = ci.in_U(x) & cj.in_U(x)
                else:
                    m = ci.in_V(x) & cj.in_V(x)
                if not m.any():
                    continue
                xs = x[m]
                fi = family.reps[i](ci.to_chart(xs))
                fj = atlas.apply_transition(i, j, xs, family.reps[j](cj.to_chart(xs)))
                _record(pairs, worst, i, j, np.abs(fi - fj).max(axis=1), xs)
    max_defect = max(pairs.values(), default=0.0)
    return {"stage": family.stage, "pairs": {f"{i}-{j}": v for (i, j), v in sorted(pairs.items())},
            "max_defect": max_defect, "worst_pair": worst["pair"], "worst_sample": worst["sample"],
            "tolerance": tolerance, "passed": bool(max_defect <= tolerance)}


def _record(pairs, worst, i, j, diff, xs):
    k = int(np.argmax(diff))
    pairs[(i, j)] = max(pairs.get((i, j), 0.0), float(diff[k]))
    if diff[k] > worst["defect"] or worst["pair"] is None:
        worst.update(defect=float(diff[k]), pair=[i, j], sample=xs[k].tolist())


# -- glue -------------------------------------------------------------------------

def glue(family: LocalSectionFamily, tolerance=DEFAULT_TOL, c_family: LocalSectionFamily = None,
         spacing=0.005) -> LocalSectionFamily:
    """Assemble a compatible stage-``V`` family into one section, given chart by chart on ``U_i``.

    At each point the chart with the largest ``chi`` supplies the value. If
    ``c_family`` (stage ``C``) is given, points that coincide with a sample
    of ``C`` take the stage-``C`` value of the evaluating chart itself.
    """
    if family.stage != "V":
        raise ValueError("glue expects a stage-V family")
    atlas = family.atlas
    pre = compatibility_check(family, tolerance, spacing)
    if not pre["passed"]:
        raise GlueError(f"family is incompatible by {pre['max_defect']:.3e} on charts "
                        f"{pre['worst_pair']} at sample {pre['worst_sample']}",
                        chart_pair=pre["worst_pair"], sample=pre["worst_sample"],
                        defect=pre["max_defect"])
    reps = []
    for i in range(len(atlas)):
        member = None
        if c_family is not None and len(c_family.reps[i].points):
            member = (cKDTree(c_family.reps[i].points), c_family.reps[i].values())
        reps.append(ChartRep(_glued(atlas, family, i, member), atlas.rank))
    tag = family.tag
    if tag is not None:
        charts = frozenset(i for i in range(len(atlas)) if set(atlas.J[i]) & tag.charts)
        tag = CompactSupportTag(charts, {i: (atlas.charts[i].lo.copy(), atlas.charts[i].hi.copy())
                                         for i in charts})
    out = LocalSectionFamily(atlas, "U", reps, tag, family.subset)
    post = compatibility_check(out, tolerance, spacing)
    out.consistent = post["passed"]
    out.report = {"pre": pre, "post": post}
    return out


def _glued(atlas, family, i, member):
    ci = atlas.charts[i]

    def g(u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        x = ci.from_chart(u)
        chi = atlas.chi(x)
        best = np.argmax(chi, axis=1)
        covered = chi[np.arange(len(x)), best] > 0
        out = np.zeros((len(u), atlas.rank))
        for j in np.unique(best[covered]):
            m = covered & (best == j)
            xs = x[m]
            hj = family.reps[j](atlas.charts[j].to_chart(xs))
            out[m] = atlas.apply_transition(i, int(j), xs, hj)
        if member is not None:
            tree, vals = member
            dist, k = tree.query(u)
            hit = dist <= 1e-12 * (1.0 + np.abs(u).max(axis=1))
            out[hit] = vals[k[hit]]
        return out

    return g


# -- local extension and the assembled operator -------------------------------------

def _chart_set(C, chart, points, sample_index, resolution, margin):
    """Closed set ``phi_i(C) cap W_i`` in chart coordinates, with ``V_i`` inside ``W_i`` inside ``U_i``."""
    wlo = chart.vlo + margin * (chart.lo - chart.vlo)
    whi = chart.vhi + margin * (chart.hi - chart.vhi)
    keep = np.all((points >= wlo) & (points <= whi), axis=1)
    pts = points[keep]

    def membership(u):
        u = np.atleast_2d(u)
        return C.contains(chart.from_chart(u)) & np.all((u >= wlo) & (u <= whi), axis=1)

    def interior(u):
        u = np.atleast_2d(u)
        return np.asarray(C.interior(chart.from_chart(u)), dtype=bool) & np.all((u > wlo) & (u < whi), axis=1)

    edge = np.minimum(pts - wlo, whi - pts).min(axis=1) < resolution if len(pts) else np.zeros(0, bool)
    bnd = ~interior(pts) | edge if len(pts) else np.zeros(0, bool)
    box = (pts.min(axis=0), pts.max(axis=0)) if len(pts) else (wlo, whi)
    dom = SampledClosedSet(f"{C.name}@{chart.name}", chart.dimension, membership, interior, pts, bnd,
                           resolution, box, params={"generator": f"{C.name}@{chart.name}",
                                                    "set": C.set_id(), "chart": chart.name})
    return dom, keep


class ExtensionOperator:
    """``E_C^M = glue . mixing_map . local_extend . restrict_section`` for a fixed ``(atlas, C, m)``.

    Per-chart closed sets, Whitney decompositions and bump systems are built
    once. With ``check_cusp`` each nonempty chart set must receive both cusp
    certificates, otherwise :class:`CuspConditionError` is raised.
    """

    def __init__(self, atlas: Atlas, C: SampledClosedSet, m: int, check_cusp=True, margin=0.5,
                 tolerance=DEFAULT_TOL, jet_check=True, seed=0):
        self.atlas = atlas
        self.C = C
        self.m = int(m)
        self.tolerance = tolerance
        self.jet_check = jet_check
        self.charts = []
        self.certificates = {}
        for i, c in enumerate(atlas.charts):
            mask = c.in_U(C.samples)
            idx = np.nonzero(mask)[0]
            if not idx.size:
                self.charts.append(None)
                continue
            res = C.resolution / float(np.min(np.abs(c.jacobian)))
            dom, keep = _chart_set(C, c, c.to_chart(C.samples[idx]), idx, res, margin)
            if not len(dom.samples):
                self.charts.append(None)
                continue
            if check_cusp:
                self.certificates[i] = _cusp_certify(dom, seed)
            decomp = whitney_decompose(dom, box=(c.lo, c.hi), min_side=res / 4)
            self.charts.append((dom, keep, decomp, BumpSystem(decomp)))

    def local_extend(self, c_family: LocalSectionFamily) -> LocalSectionFamily:
        return local_extend(c_family, self.m, operator=self)

    def __call__(self, c_family: LocalSectionFamily) -> LocalSectionFamily:
        if c_family.stage != "C":
            raise ValueError("the extension operator takes a stage-C family")
        ext = self.local_extend(c_family)
        mixed = mixing_map(ext)
        return glue(mixed, self.tolerance, c_family=c_family)


def _cusp_certify(dom, seed):
    # scales below a couple of sample spacings cannot be resolved, so the grid
    # stops at 2 * resolution; degenerate sets still get checked (and fail)
    span = float(np.max(dom.box[1] - dom.box[0]))
    res = dom.resolution
    eps0 = min(0.5, max(span / 4, 8 * res))
    eps_grid = np.unique(np.geomspace(eps0 / 2, max(eps0 / 8, 2 * res), 3))
    outward = check_outward_cusps(dom, epsilon0=eps0, rho=0.25, r=1.0, eps_grid=eps_grid,
                                  probe_count=128, seed=seed)
    if not isinstance(outward, CuspCertificate):
        raise CuspConditionError(f"{dom.name}: outward-cusp check failed at {outward.z}",
                                 violation=outward)
    centre = dom.samples[len(dom.samples) // 2]
    fjords = check_no_narrow_fjords(dom, centre, p=1, D=0.5, radius=span, seed=seed)
    if not isinstance(fjords, FjordCertificate):
        raise CuspConditionError(f"{dom.name}: narrow fjord between {fjords.x} and {fjords.y}",
                                 violation=fjords)
    return {"outward": outward, "fjords": fjords}


def local_extend(family: LocalSectionFamily, m: int, operator: ExtensionOperator = None,
                 check_cusp=True) -> LocalSectionFamily:
    """Whitney-extend each chart's stage-``C`` jets to ``U_i``; empty ``C_i`` gives 0."""
    if family.stage != "C":
        raise ValueError("local_extend expects a stage-C family")
    atlas = family.atlas
    if operator is None:
        operator = ExtensionOperator(atlas, family.subset, m, check_cusp=check_cusp)
    reps = []
    charts = set()
    for i, data in enumerate(operator.charts):
        if data is None or family.tag is not None and i not in family.tag.charts:
            reps.append(ChartRep.zero(atlas.rank))
            continue
        dom, keep, decomp, bumps = data
        exts = []
        for jet in family.reps[i].jets:
            sub = JetField(jet.order, jet.points[keep], jet.values[keep])
            exts.append(extend_jet(sub, decomp, bumps, m=m, check=operator.jet_check))

        def fn(u, exts=exts):
            return np.stack([E(u) for E in exts], axis=1)
        reps.append(ChartRep(fn, atlas.rank))
        charts.add(i)
    boxes = {i: (atlas.charts[i].lo.copy(), atlas.charts[i].hi.copy()) for i in charts}
    return LocalSectionFamily(atlas, "U", reps, CompactSupportTag(frozenset(charts), boxes), family.subset)


def global_extension_operator(sec_on_C: LocalSectionFamily, atlas: Atlas, C: SampledClosedSet, m: int,
                              **kw) -> LocalSectionFamily:
    """One-shot ``E_C^M``; build :class:`ExtensionOperator` directly to reuse its setup."""
    return ExtensionOperator(atlas, C, m, **kw)(sec_on_C)


# -- diagnostics ------------------------------------------------------------------

def restriction_defect(glued: LocalSectionFamily, c_family: LocalSectionFamily) -> float:
    """Max ``|g_i - f_i^0|`` over every chart's stage-``C`` samples."""
    worst = 0.0
    for i, r in enumerate(c_family.reps):
        if len(r.points):
            worst = max(worst, float(np.abs(glued.reps[i](r.points) - r.values()).max()))
    return worst


def seam_jumps(family: LocalSectionFamily, delta=1e-4, spacing=0.01) -> dict:
    """Value and central-difference jumps between chart representatives on overlaps.

    For each pair and overlap point ``x`` the functions ``x -> f_i(phi_i x)``
    and ``x -> Phi_ij f_j(phi_j x)`` are compared, together with their
    central differences of step ``delta`` along every manifold axis.
    """
    atlas = family.atlas
    x = atlas.sample_points(spacing)
    d = atlas.dimension
    value, deriv = 0.0, 0.0
    for i, ci in enumerate(atlas.charts):
        for j in atlas.J[i]:
            if j <= i:
                continue
            cj = atlas.charts[j]
            ok = ci.in_U(x) & cj.in_U(x)
            for k in range(d):
                e = np.zeros(d)
                e[k] = delta
                ok &= ci.in_U(_shift(atlas, x, e)) & cj.in_U(_shift(atlas, x, e))
                ok &= ci.in_U(_shift(atlas, x, -e)) & cj.in_U(_shift(atlas, x, -e))
            xs = x[ok]
            if not len(xs):
                continue

            def Fi(p):
                return family.reps[i](ci.to_chart(p))

            def Fj(p):
                return atlas.apply_transition(i, j, p, family.reps[j](cj.to_chart(p)))

            value = max(value, float(np.abs(Fi(xs) - Fj(xs)).max()))
            for k in range(d):
                e = np.zeros(d)
                e[k] = delta
                di = (Fi(_shift(atlas, xs, e)) - Fi(_shift(atlas, xs, -e))) / (2 * delta)
                dj = (Fj(_shift(atlas, xs, e)) - Fj(_shift(atlas, xs, -e))) / (2 * delta)
                deriv = max(deriv, float(np.abs(di - dj).max()))
    return {"value_jump": value, "derivative_jump": deriv, "delta": delta}


def _shift(atlas, x, e):
    y = x + e
    return np.mod(y, TWO_PI) if atlas.manifold == "circle" else y


def section_csv(family: LocalSectionFamily, points_per_chart=None, spacing=0.01) -> str:
    """Per-chart CSV dump with columns ``chart, u0.., v0..``."""
    atlas = family.atlas
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    d, r = atlas.dimension, atlas.rank
    w.writerow(["chart"] + [f"u{k}" for k in range(d)] + [f"v{k}" for k in range(r)])
    for i, c in enumerate(atlas.charts):
        if family.stage == "C":
            u, vals = family.reps[i].points, family.reps[i].values()
        else:
            if points_per_chart is not None:
                u = np.atleast_2d(points_per_chart[i])
            else:
                x = atlas.sample_points(spacing)
                x = x[c.in_U(x) if family.stage == "U" else c.in_V(x)]
                u = c.to_chart(x)
                u = u[np.lexsort(u.T[::-1])] if len(u) else u
            vals = family.reps[i](u) if len(u) else np.zeros((0, r))
        for p, v in zip(u, vals):
            w.writerow([i] + [repr(float(a)) for a in p] + [repr(float(b)) for b in v])
    return buf.getvalue()


__all__ = [
    "Atlas", "Chart", "ChartJets", "ChartRep", "CompactSupportTag", "ExtensionOperator", "Gauge",
    "GlobalSection", "LocalSectionFamily", "atlas_from_spec", "box_atlas", "circle_atlas",
    "closed_arc", "compatibility_check", "family_from_global", "glue", "global_extension_operator",
    "local_extend", "mixing_map", "restrict_section", "restriction_defect", "scan_support",
    "seam_jumps", "section_csv", "wrap_angle",
]

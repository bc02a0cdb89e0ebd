"""Canonical charts on spaces of maps, sampled on grids.

A map ``f : M -> N`` is known through its values at grid nodes. A local
addition ``Sigma`` on ``N`` turns a map ``g`` close to ``f`` into the tangent
field ``x -> Sigma^{-1}(f(x), g(x))`` along ``f`` and back. Targets are flat
``R^n`` and round spheres ``S^{n-1}`` in ``R^n``, for which every formula is
closed-form.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ChartDomainError
from .patching import ExtensionOperator, GlobalSection, family_from_global, restrict_section
from .trig import TrigPoly


def _rows(a):
    return np.atleast_2d(np.asarray(a, dtype=float))


def _dot(a, b):
    return np.einsum("ij,ij->i", a, b)


# -- local additions ----------------------------------------------------------

class LocalAddition:
    """``Sigma(q, v)`` and its inverse on a target manifold ``N`` inside ``R^n``.

    ``bound`` is the radius, in the distance of ``N``, on which ``Sigma`` is
    injective. ``g`` counts as near ``f`` when every node is within
    ``bound / 2``.
    """

    name = "abstract"
    bound = math.inf

    def __init__(self, n):
        self.n = int(n)

    def sigma(self, q, v):
        raise NotImplementedError

    def inverse(self, q, p):
        raise NotImplementedError

    def distance(self, q, p):
        raise NotImplementedError

    def tangent_project(self, q, v):
        return _rows(v)

    def on_manifold(self, p, tol=1e-12):
        return np.ones(len(_rows(p)), dtype=bool)

    def tangent_limit(self):
        """Largest ``|v|`` whose image stays within ``bound / 2`` of the base point."""
        return math.inf

    def spec(self):
        return {"kind": self.name, "n": self.n}


class FlatAddition(LocalAddition):
    """``R^n`` with ``Sigma(q, v) = q + v``."""

    name = "flat"

    def sigma(self, q, v):
        return _rows(q) + _rows(v)

    def inverse(self, q, p):
        return _rows(p) - _rows(q)

    def distance(self, q, p):
        return np.linalg.norm(_rows(p) - _rows(q), axis=1)


class _Sphere(LocalAddition):
    def distance(self, q, p):
        q, p = _rows(q), _rows(p)
        c = _dot(q, p)
        s = np.linalg.norm(p - c[:, None] * q, axis=1)
        return np.arctan2(s, c)

    def tangent_project(self, q, v):
        q, v = _rows(q), _rows(v)
        return v - _dot(q, v)[:, None] * q

    def on_manifold(self, p, tol=1e-12):
        return np.abs(np.linalg.norm(_rows(p), axis=1) - 1.0) <= tol


class SphereExponential(_Sphere):
    """Riemannian exponential of the round unit sphere."""

    name = "sphere_exp"
    bound = math.pi

    def sigma(self, q, v):
        q, v = _rows(q), _rows(v)
        t = np.linalg.norm(v, axis=1)
        # np.sinc(t / pi) = sin(t) / t with value 1 at t = 0, so v = 0 returns q exactly
        return np.cos(t)[:, None] * q + np.sinc(t / math.pi)[:, None] * v

    def inverse(self, q, p):
        q, p = _rows(q), _rows(p)
        c = _dot(q, p)
        w = p - c[:, None] * q
        s = np.linalg.norm(w, axis=1)
        theta = np.arctan2(s, c)
        factor = np.divide(theta, s, out=np.zeros_like(s), where=s > 0)
        factor[np.all(p == q, axis=1)] = 0.0
        return factor[:, None] * w

    def tangent_limit(self):
        return self.bound / 2


class SphereProjection(_Sphere):
    """``Sigma(q, v) = (q + v) / |q + v|``, injective onto the open hemisphere at ``q``."""

    name = "sphere_projection"
    bound = math.pi / 2

    def sigma(self, q, v):
        q, v = _rows(q), _rows(v)
        w = q + v
        out = w / np.linalg.norm(w, axis=1, keepdims=True)
        zero = np.all(v == 0, axis=1)
        out[zero] = q[zero]
        return out

    def inverse(self, q, p):
        q, p = _rows(q), _rows(p)
        out = p / _dot(q, p)[:, None] - q
        out[np.all(p == q, axis=1)] = 0.0
        return out

    def tangent_limit(self):
        return math.tan(self.bound / 2)


ADDITIONS = {"flat": FlatAddition, "sphere_exp": SphereExponential,
             "sphere_projection": SphereProjection}


def addition_from_spec(spec) -> LocalAddition:
    return ADDITIONS[spec["kind"]](spec["n"])


# -- grid maps and tangent fields --------------------------------------------

@dataclass
class MapGridFunction:
    """Values of a map ``M -> N`` at grid nodes.

    ``stencil_ok`` marks nodes whose neighbours at distance ``spacing`` along
    every axis are nodes too, so finite differences are available there.
    """

    nodes: np.ndarray
    values: np.ndarray
    addition: LocalAddition
    spacing: Optional[float] = None
    periodic: bool = False
    stencil_ok: Optional[np.ndarray] = None

    def __post_init__(self):
        self.nodes = _rows(self.nodes) if np.ndim(self.nodes) > 1 else np.asarray(self.nodes, float).reshape(-1, 1)
        self.values = _rows(self.values)
        if len(self.nodes) != len(self.values):
            raise ValueError("one value per node is required")
        if self.values.shape[1] != self.addition.n:
            raise ValueError(f"values must live in R^{self.addition.n}")
        bad = ~self.addition.on_manifold(self.values)
        if bad.any():
            k = int(np.argmax(bad))
            raise ChartDomainError(f"value at node {k} {self.nodes[k].tolist()} is off the target manifold",
                                   node=k)
        if self.stencil_ok is None:
            self.stencil_ok = self._stencils()

    def _stencils(self):
        if self.periodic or self.spacing is None:
            return np.full(len(self.nodes), self.periodic)
        key = {tuple(np.round(p / self.spacing).astype(np.int64)) for p in self.nodes}
        ok = np.ones(len(self.nodes), dtype=bool)
        for r, p in enumerate(np.round(self.nodes / self.spacing).astype(np.int64)):
            for k in range(len(p)):
                for s in (-1, 1):
                    q = p.copy()
                    q[k] += s
                    if tuple(q) not in key:
                        ok[r] = False
        return ok

    def restrict(self, idx):
        idx = np.asarray(idx)
        return MapGridFunction(self.nodes[idx], self.values[idx], self.addition, self.spacing,
                               False, self.stencil_ok[idx] if self.stencil_ok is not None else None)

    def to_csv(self):
        return _csv(["node", "value"], self.nodes, self.values)


@dataclass
class TangentField:
    """Vectors ``v(x) in T_{f(x)} N`` along a grid map ``f``."""

    base: MapGridFunction
    vectors: np.ndarray

    def __post_init__(self):
        self.vectors = _rows(self.vectors)
        if self.vectors.shape != self.base.values.shape:
            raise ValueError("one tangent vector per node is required")

    def restrict(self, idx):
        return TangentField(self.base.restrict(idx), self.vectors[np.asarray(idx)])

    def norms(self):
        return np.linalg.norm(self.vectors, axis=1)

    def to_csv(self):
        return _csv(["node", "base", "vector"], self.base.nodes, self.base.values, self.vectors)


def _csv(prefixes, *arrays):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = []
    for name, a in zip(prefixes, arrays):
        header += [f"{name}_{k}" for k in range(a.shape[1])]
    w.writerow(header)
    for row in zip(*arrays):
        w.writerow([repr(float(v)) for part in row for v in part])
    return buf.getvalue()


# -- charts -------------------------------------------------------------------

def _require_near(add, q, p, nodes):
    if add.bound == math.inf:
        return
    dist = add.distance(q, p)
    bad = ~(dist <= add.bound / 2)
    if bad.any():
        k = int(np.argmax(bad))
        raise ChartDomainError(
            f"node {k} {nodes[k].tolist()}: distance {dist[k]:.6g} exceeds half the injectivity "
            f"bound {add.bound / 2:.6g}", node=k)


def chart_forward(f: MapGridFunction, g: MapGridFunction) -> TangentField:
    """``phi_f(g)(x) = Sigma^{-1}(f(x), g(x))``."""
    if len(f.nodes) != len(g.nodes) or not np.array_equal(f.nodes, g.nodes):
        raise ValueError("f and g must share their nodes")
    add = f.addition
    _require_near(add, f.values, g.values, f.nodes)
    return TangentField(f, add.inverse(f.values, g.values))


def chart_backward(f: MapGridFunction, tau: TangentField) -> MapGridFunction:
    """``phi_f^{-1}(tau)(x) = Sigma(f(x), tau(x))``."""
    add = f.addition
    lim = add.tangent_limit()
    if lim != math.inf:
        nrm = tau.norms()
        bad = ~(nrm <= lim)
        if bad.any():
            k = int(np.argmax(bad))
            raise ChartDomainError(f"node {k} {f.nodes[k].tolist()}: |tau| = {nrm[k]:.6g} exceeds "
                                   f"the chart bound {lim:.6g}", node=k)
    return MapGridFunction(f.nodes, add.sigma(f.values, tau.vectors), add, f.spacing, f.periodic,
                           f.stencil_ok)


def change_of_charts(f: MapGridFunction, g: MapGridFunction, tau_in: TangentField) -> TangentField:
    """``h(tau)(x) = Sigma^{-1}(f(x), Sigma(g(x), tau(x)))``: the chart at ``g`` read in the chart at ``f``."""
    return chart_forward(f, chart_backward(g, tau_in))


def switch_addition(f: MapGridFunction, tau: TangentField, target: LocalAddition) -> TangentField:
    """Re-express a chart representative at ``f`` in the chart of another local addition."""
    g = chart_backward(f, tau)
    f2 = MapGridFunction(f.nodes, f.values, target, f.spacing, f.periodic, f.stencil_ok)
    g2 = MapGridFunction(g.nodes, g.values, target, g.spacing, g.periodic, g.stencil_ok)
    return chart_forward(f2, g2)


def directional_smoothness(f, g, tau, delta, eps=1e-6):
    """Compare forward and central differences of ``change_of_charts`` in direction ``delta``."""
    def h(s):
        return change_of_charts(f, g, TangentField(g, tau.vectors + s * delta)).vectors

    base = h(0.0)
    forward = (h(eps) - base) / eps
    central = (h(eps) - h(-eps)) / (2 * eps)
    return float(np.abs(forward - central).max())


# -- maps from the circle -------------------------------------------------------

class CircleMap:
    """A map ``S^1 -> N`` whose ambient components are trigonometric polynomials."""

    def __init__(self, components, addition: LocalAddition):
        self.components = list(components)
        self.addition = addition
        if len(self.components) != addition.n:
            raise ValueError("one component per ambient coordinate")

    def __call__(self, theta):
        t = np.asarray(theta, dtype=float).reshape(-1)
        return np.stack([c(t) for c in self.components], axis=1)

    def on(self, nodes, spacing=None, periodic=False) -> MapGridFunction:
        nodes = np.asarray(nodes, dtype=float).reshape(-1, 1)
        return MapGridFunction(nodes, self(nodes[:, 0]), self.addition, spacing, periodic)

    @classmethod
    def latitude_circle(cls, height=0.3, tilt=0.4, addition=None):
        """Rotated circle of latitude ``z = height`` on ``S^2``."""
        addition = SphereExponential(3) if addition is None else addition
        r = math.sqrt(1.0 - height ** 2)
        c, s = math.cos(tilt), math.sin(tilt)
        x = TrigPoly([0.0, r])
        y = TrigPoly([0.0, 0.0], [0.0, r]) * c + TrigPoly([height]) * (-s)
        z = TrigPoly([0.0, 0.0], [0.0, r]) * s + TrigPoly([height]) * c
        return cls([x, y, z], addition)

    def random_tangent_field(self, rng, degree=2, amplitude=0.1, check_points=2048):
        """Trigonometric tangent field along the map with ``max |sigma| <= amplitude``.

        The sampled peak is inflated by Bernstein's inequality ``|sigma'| <= n |sigma|``
        (``n`` the degree), so the bound holds between the check points too.
        """
        s = [TrigPoly.random(degree, rng) for _ in range(self.addition.n)]
        if isinstance(self.addition, _Sphere):
            dot = sum((a * b for a, b in zip(self.components, s)), TrigPoly([0.0]))
            s = [b - a * dot for a, b in zip(self.components, s)]
        n = max(p.degree for p in s)
        slack = 1.0 - n * math.pi / check_points
        if slack <= 0:
            raise ValueError("check_points too small for the field degree")
        t = 2 * math.pi * np.arange(check_points) / check_points
        peak = float(np.max(np.linalg.norm(np.stack([p(t) for p in s], axis=1), axis=1))) / slack
        return [p * (amplitude / peak) for p in s] if peak > 0 else s


# -- the submersion diagram ----------------------------------------------------------

def circle_grid(spacing):
    n = int(math.ceil(2 * math.pi / spacing))
    return 2 * math.pi * np.arange(n) / n


def submersion_chart_check(F: CircleMap, C, pipeline: ExtensionOperator, trials=50, seed=0,
                           amplitude=0.1, degree=2, spacing=1e-2, tolerance=1e-6) -> dict:
    """Check the chart diagram of the restriction map ``C^inf(M, N) -> C^inf(C, N)``.

    ``M = S^1`` is sampled on a uniform grid together with the samples of
    ``C``. For random tangent fields ``sigma`` along ``F`` two defects are
    measured at ``C``'s nodes:

    * ``phi_f(res_C(phi_F^{-1}(sigma))) - res_C(sigma)`` (the diagram);
    * ``res_C(phi_F^{-1}(P E(tau))) - phi_f^{-1}(tau)`` for ``tau = res_C sigma``,
      where ``E`` is the extension pipeline and ``P`` projects onto ``F^* TN``
      (the right-inverse property).
    """
    rng = np.random.default_rng(seed)
    add = F.addition
    if pipeline.atlas.rank != add.n:
        raise ValueError("the pipeline must act on rank-n sections (F^* TN inside trivial R^n)")
    grid = circle_grid(spacing)
    nodes = np.concatenate([grid, C.samples[:, 0]])
    c_idx = np.arange(len(grid), len(nodes))
    FM = F.on(nodes, spacing)
    f = FM.restrict(c_idx)
    diag, right, interp = [], [], []
    mids = 0.5 * (C.samples[:-1, 0] + C.samples[1:, 0]) if len(C.samples) > 1 else np.zeros(0)
    mids = mids[C.contains(mids.reshape(-1, 1))] if mids.size else mids
    for _ in range(trials):
        polys = F.random_tangent_field(rng, degree, amplitude)
        section = GlobalSection.trig(polys)
        sigma = TangentField(FM, section.values(nodes.reshape(-1, 1)))
        # diagram: phi_f . res_C . phi_F^{-1} = res_C on tangent fields
        g = chart_backward(FM, sigma)
        lhs = chart_forward(f, g.restrict(c_idx)).vectors
        rhs = sigma.restrict(c_idx).vectors
        diag.append(np.abs(lhs - rhs).max(axis=1))
        # right inverse through the extension pipeline
        tau = sigma.restrict(c_idx)
        fam = family_from_global(pipeline.atlas, section)
        c_family = restrict_section(fam, C, pipeline.m)
        ext = pipeline(c_family)
        E_vals = add.tangent_project(FM.values, ext.values_at(nodes.reshape(-1, 1)))
        g2 = chart_backward(FM, TangentField(FM, E_vals)).restrict(c_idx)
        want = chart_backward(f, tau)
        right.append(np.abs(g2.values - want.values).max(axis=1))
        if mids.size:
            got = add.tangent_project(F(mids), ext.values_at(mids.reshape(-1, 1)))
            interp.append(float(np.abs(got - section.values(mids.reshape(-1, 1))).max()))
    diag = np.concatenate(diag) if diag else np.zeros(0)
    right = np.concatenate(right) if right else np.zeros(0)
    both = np.concatenate([diag, right])
    dmax = float(both.max(initial=0.0))
    return {"defect_max": dmax, "defect_mean": float(both.mean()) if both.size else 0.0,
            "diagram_defect_max": float(diag.max(initial=0.0)),
            "right_inverse_defect_max": float(right.max(initial=0.0)),
            "between_samples_max": max(interp, default=0.0),
            "trials": int(trials), "grid_spacing": float(spacing), "tolerance": tolerance,
            "seed": int(seed), "addition": add.spec(), "passed": bool(dmax <= tolerance)}


__all__ = [
    "ADDITIONS", "CircleMap", "FlatAddition", "LocalAddition", "MapGridFunction",
    "SphereExponential", "SphereProjection", "TangentField", "addition_from_spec",
    "chart_backward", "chart_forward", "change_of_charts", "circle_grid",
    "directional_smoothness", "submersion_chart_check", "switch_addition",
]

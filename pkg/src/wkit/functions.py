"""Test functions with closed-form partial derivatives, and the cusp example jets."""
from __future__ import annotations

import math

import numpy as np

from .domains import cusp_profile
from .jets import JetField, jet_of_function, multi_indices


class Polynomial:
    """Real polynomial in ``d`` variables stored as ``{exponent tuple: coefficient}``."""

    def __init__(self, terms, d):
        self.d = int(d)
        self.terms = {tuple(int(e) for e in k): float(v) for k, v in dict(terms).items() if v != 0}

    @property
    def degree(self):
        return max((sum(k) for k in self.terms), default=0)

    def __call__(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(pts.shape[0])
        for exps, c in self.terms.items():
            term = np.full(pts.shape[0], c)
            for k, e in enumerate(exps):
                if e:
                    term = term * pts[:, k] ** e
            out += term
        return out

    def partial(self, alpha):
        new = {}
        for exps, c in self.terms.items():
            if any(e < a for e, a in zip(exps, alpha)):
                continue
            factor = math.prod(math.perm(e, a) for e, a in zip(exps, alpha))
            key = tuple(e - a for e, a in zip(exps, alpha))
            new[key] = new.get(key, 0.0) + c * factor
        return Polynomial(new, self.d)

    def partials(self, alpha, points):
        return self.partial(alpha)(points)

    def max_abs(self, points):
        return float(np.max(np.abs(self(points))))

    @classmethod
    def random(cls, d, degree, rng, scale=1.0):
        terms = {tuple(a): scale * rng.uniform(-1, 1) for a in multi_indices(d, degree)}
        return cls(terms, d)

    def to_dict(self):
        return {"d": self.d, "terms": [[list(k), v] for k, v in sorted(self.terms.items())]}


def sin_cos(points):
    p = np.atleast_2d(points)
    return np.sin(p[:, 0]) * np.cos(p[:, 1])


def sin_cos_partials(alpha, points):
    """``d^alpha (sin u cos v)``, using that derivatives cycle with period 4."""
    p = np.atleast_2d(points)
    a, b = alpha[0], alpha[1]
    du = (np.sin, np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x))[a % 4](p[:, 0])
    dv = (np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x), np.sin)[b % 4](p[:, 1])
    return du * dv


def cusp_profile_derivatives(x, order):
    """Derivatives of ``g(x) = exp(-1/x^2)`` (zero for ``x <= 0``) up to ``order <= 3``."""
    x = np.asarray(x, dtype=float)
    g = cusp_profile(x)
    xs = np.where(x > 0, x, 1.0)
    out = [g]
    if order >= 1:
        out.append(np.where(x > 0, 2 * xs ** -3 * g, 0.0))
    if order >= 2:
        out.append(np.where(x > 0, (4 * xs ** -6 - 6 * xs ** -4) * g, 0.0))
    if order >= 3:
        out.append(np.where(x > 0, (8 * xs ** -9 - 36 * xs ** -7 + 24 * xs ** -5) * g, 0.0))
    if order > 3:
        raise ValueError("derivatives implemented up to order 3")
    return out


def exp_cusp_jet(m=1, xs=None):
    """Jet of the function that is ``g(x)`` above the fjord and 0 below it.

    Samples sit in pairs ``(x, 0)`` / ``(x, g(x))`` across the fjord; at the
    lower wall every entry is 0, at the upper wall the jet is that of the
    smooth branch ``g(x)`` (independent of ``y``).
    """
    xs = np.linspace(0.2, 1.0, 200) if xs is None else np.asarray(xs, dtype=float)
    g = cusp_profile(xs)
    keep = g > 0
    xs, g = xs[keep], g[keep]
    lower = np.stack([xs, np.zeros_like(xs)], axis=1)
    upper = np.stack([xs, g], axis=1)
    pts = np.concatenate([lower, upper])
    vals = np.zeros((len(pts), len(multi_indices(2, m))))
    vals[len(xs):] = _branch_jet(xs, m)
    return JetField(m, pts, vals)


def _branch_jet(xs, m):
    ders = cusp_profile_derivatives(xs, m)
    cols = []
    for a in multi_indices(2, m):
        cols.append(ders[a[0]] if a[1] == 0 else np.zeros_like(xs))
    return np.stack(cols, axis=1)


def half_space_variant_jet(m=1, xs=None):
    """The same ``x`` locations sampled on ``{y >= 0}`` without the fjord.

    Removing the fjord leaves a single smooth branch ``g(x)``, so every
    sample carries its jet; this is a genuine Whitney jet.
    """
    xs = np.linspace(0.2, 1.0, 200) if xs is None else np.asarray(xs, dtype=float)
    g = cusp_profile(xs)
    keep = g > 0
    xs, g = xs[keep], g[keep]
    pts = np.concatenate([np.stack([xs, np.zeros_like(xs)], axis=1), np.stack([xs, g], axis=1)])
    vals = np.concatenate([_branch_jet(xs, m), _branch_jet(xs, m)])
    return JetField(m, pts, vals)


def exp_cusp_function(points):
    """``g(x)`` on or above the upper wall, 0 elsewhere (the non-extendable function)."""
    p = np.atleast_2d(points)
    g = cusp_profile(p[:, 0])
    return np.where((p[:, 0] > 0) & (p[:, 1] >= g), g, 0.0)


def exp_cusp_partials(alpha, points):
    p = np.atleast_2d(points)
    if alpha[1] != 0:
        return np.zeros(p.shape[0])
    g = cusp_profile(p[:, 0])
    upper = (p[:, 0] > 0) & (p[:, 1] >= g)
    return np.where(upper, cusp_profile_derivatives(p[:, 0], alpha[0])[alpha[0]], 0.0)


def registry_jet(name, points, m, rng=None, params=None):
    """Jet of a named test function on the given points."""
    params = params or {}
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if name == "sin_cos":
        return jet_of_function(sin_cos, pts, m, partials=sin_cos_partials)
    if name == "polynomial":
        if "terms" in params:
            poly = Polynomial({tuple(k): v for k, v in params["terms"]}, pts.shape[1])
        else:
            rng = np.random.default_rng(0) if rng is None else rng
            poly = Polynomial.random(pts.shape[1], int(params.get("degree", m)), rng)
        return jet_of_function(poly, pts, m, partials=poly.partials)
    if name == "exp_cusp_example":
        return jet_of_function(exp_cusp_function, pts, m, partials=exp_cusp_partials)
    if name == "zero":
        return JetField.zeros(pts, m)
    raise KeyError(f"unknown test function {name!r}")


TEST_FUNCTIONS = ("polynomial", "sin_cos", "exp_cusp_example", "zero")

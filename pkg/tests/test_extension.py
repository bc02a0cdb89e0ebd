import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wkit.domains import (SampledClosedSet, closed_ball, full_space, half_space, koch_snowflake)
from wkit.errors import DomainError, JetCheckError
from wkit.extension import (BumpSystem, boundary_probes, extend_jet, mollifier, operator_growth,
                            verify_jet_agreement, whitney_decompose)
from wkit.functions import Polynomial, exp_cusp_jet, registry_jet
from wkit.jets import JetField, jet_of_function


def point_set(resolution=0.05):
    def member(p):
        return np.all(np.atleast_2d(p) == 0, axis=1)

    def interior(p):
        return np.zeros(len(np.atleast_2d(p)), dtype=bool)

    return SampledClosedSet("point", 2, member, interior, np.zeros((1, 2)), np.array([True]),
                            resolution, (np.full(2, -1.0), np.full(2, 1.0)))


@pytest.fixture(scope="module")
def disk():
    return closed_ball(2)


@pytest.fixture(scope="module")
def disk_decomp(disk):
    return whitney_decompose(disk)


# -- decomposition ----------------------------------------------------------------

def test_half_space_decomposition_invariants():
    dom = half_space(2)
    dec = whitney_decompose(dom, box=((-1.0, 0.0), (0.0, 1.0)), min_side=1 / 64)
    rep = dec.check_invariants()
    assert rep["proximity_lower_violations"] == 0
    assert rep["proximity_upper_violations"] == 0
    assert rep["anchor_mismatch"] == 0
    assert rep["overlaps"] == 0
    # sides halve toward the face u = 0
    near = dec.sides[np.argsort(-dec.centers[:, 0])]
    assert near[0] == dec.sides.min()
    assert set(np.log2(dec.sides).round(12)) <= set(float(k) for k in range(-6, 0))


def test_whole_box_inside_set_gives_no_cubes():
    dom = full_space(2, resolution=0.1)
    dec = whitney_decompose(dom, box=((-0.5, -0.5), (0.5, 0.5)))
    assert len(dec) == 0


def test_point_decomposition_count_grows_logarithmically():
    dom = point_set()
    counts = [len(whitney_decompose(dom, box=((-1, -1), (1, 1)), min_side=2.0 ** -k)) for k in range(4, 9)]
    steps = np.diff(counts)
    # every extra dyadic level adds the same ring of cubes around the point
    assert np.all(steps == steps[0]) and steps[0] > 0
    assert counts == [_point_oracle(2.0 ** -k) for k in range(4, 9)]


def _point_oracle(min_side):
    # plain recursion over the dyadic tree: keep a cube once dist(center, 0) >= side * sqrt(2)
    def visit(cx, cy, s):
        if math.hypot(cx, cy) >= s * math.sqrt(2):
            return 1
        if s / 2 < min_side:
            return 0
        q = s / 4
        return sum(visit(cx + dx * q, cy + dy * q, s / 2) for dx in (-1, 1) for dy in (-1, 1))

    return sum(visit(-0.75 + 0.5 * i, -0.75 + 0.5 * j, 0.5) for i in range(4) for j in range(4))


def test_decomposition_json_dump(disk_decomp):
    import json
    data = json.loads(disk_decomp.to_json())
    assert len(data["cubes"]) == len(disk_decomp)
    assert set(data["cubes"][0]) == {"center", "side", "anchor"}


def test_decomposition_bad_sides(disk):
    with pytest.raises(ValueError):
        whitney_decompose(disk, min_side=0.5, max_side=0.1)


# -- bumps ------------------------------------------------------------------------

def test_mollifier_profile():
    t = np.linspace(-1.5, 1.5, 301)
    v = mollifier(t)
    assert v.max() == 1.0 and v.min() == 0.0
    assert np.all(v[np.abs(t) >= 1] == 0)


def test_partition_of_unity(disk, disk_decomp):
    bumps = BumpSystem(disk_decomp)
    lo, hi = disk_decomp.box
    g = np.linspace(lo[0], hi[0], 121)
    pts = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
    far = disk.distance_to_set(pts) >= disk_decomp.min_side
    s = bumps.partition_sum(pts[far])
    covered = bumps.overlap_count(pts[far]) > 0
    assert covered.mean() > 0.95
    assert np.max(np.abs(s[covered] - 1)) <= 1e-10
    p, q, w, total = bumps.weights(pts[far])
    assert np.all((w >= 0) & (w <= 1))
    assert bumps.overlap_count(pts[far]).max() <= 4 ** 2


def test_poly_profile_requires_k(disk_decomp):
    with pytest.raises(ValueError):
        BumpSystem(disk_decomp, profile="poly")
    b = BumpSystem(disk_decomp, profile="poly", k=3)
    assert b.partition_sum(np.array([[1.5, 0.0]]))[0] == pytest.approx(1.0)


# -- extension --------------------------------------------------------------------

def test_zero_jet_extends_to_zero(disk, disk_decomp):
    Ef = extend_jet(JetField.zeros(disk.samples, 2), disk_decomp)
    pts = np.random.default_rng(0).uniform(-1.4, 1.4, (500, 2))
    assert np.all(Ef(pts) == 0)


def test_linear_polynomial_reproduced(disk, disk_decomp):
    p = Polynomial({(0, 0): 1.0, (1, 0): 1.0, (0, 1): -1.0}, 2)
    jet = jet_of_function(p, disk.samples, 1, partials=p.partials)
    Ef = extend_jet(jet, disk_decomp)
    pts, _ = boundary_probes(disk, jet, 1000, 1e-3, 0.5, seed=1, box=disk_decomp.box)
    assert np.max(np.abs(Ef(pts) - p(pts))) <= 5e-3


def test_restriction_identity_exact(disk, disk_decomp):
    jet = registry_jet("sin_cos", disk.samples, 3)
    Ef = extend_jet(jet, disk_decomp)
    assert np.array_equal(Ef(disk.samples), jet.values[:, 0])


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-5, 5), st.floats(-5, 5))
def test_linearity(seed, a, b):
    dom = closed_ball(2, resolution=0.1)
    dec = whitney_decompose(dom)
    rng = np.random.default_rng(seed)
    f = jet_of_function(Polynomial.random(2, 3, rng), dom.samples, 2)
    g = jet_of_function(Polynomial.random(2, 3, rng), dom.samples, 2)
    pts = rng.uniform(-1.4, 1.4, (300, 2))
    lhs = extend_jet(a * f + b * g, dec, check=False)(pts)
    rhs = a * extend_jet(f, dec, check=False)(pts) + b * extend_jet(g, dec, check=False)(pts)
    scale = abs(a) * np.abs(f.values).max() + abs(b) * np.abs(g.values).max()
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(scale, 1e-300)


def test_locality(disk, disk_decomp):
    jet = registry_jet("sin_cos", disk.samples, 2)
    Ef = extend_jet(jet, disk_decomp)
    rng = np.random.default_rng(5)
    pts, rows = boundary_probes(disk, jet, 30, 0.01, 0.2, seed=3, box=disk_decomp.box)
    for y, r in zip(pts, rows):
        dist = float(disk.distance_to_set(y[None])[0])
        idx, _ = disk.nearest_sample(y[None])
        anchor = disk.samples[idx[0]]
        far = np.linalg.norm(disk.samples - anchor, axis=1) > 10 * dist
        vals = np.array(jet.values)
        vals[far] += rng.standard_normal(vals[far].shape)
        moved = extend_jet(JetField(2, jet.points, vals), disk_decomp, check=False)
        assert moved(y[None])[0] == Ef(y[None])[0]


def test_refinement_stability(disk):
    jet = registry_jet("sin_cos", disk.samples, 3)
    coarse = extend_jet(jet, whitney_decompose(disk))
    fine = extend_jet(jet, whitney_decompose(disk, min_side=disk.resolution / 8))
    pts, _ = boundary_probes(disk, jet, 400, 0.02, 0.4, seed=2, box=((-1.5, -1.5), (1.5, 1.5)))
    assert np.max(np.abs(coarse(pts) - fine(pts))) <= 1e-2


def test_outside_box_is_domain_error(disk, disk_decomp):
    Ef = extend_jet(JetField.zeros(disk.samples, 1), disk_decomp)
    with pytest.raises(DomainError):
        Ef(np.array([[10.0, 0.0]]))


def test_refuses_exp_cusp_jet():
    jet = exp_cusp_jet(1)
    dom = SampledClosedSet("pairs", 2, lambda p: np.ones(len(np.atleast_2d(p)), bool),
                           lambda p: np.zeros(len(np.atleast_2d(p)), bool), jet.points,
                           np.ones(len(jet), bool), 0.01, (jet.points.min(0), jet.points.max(0)))
    dec = whitney_decompose(dom, min_side=0.05)
    with pytest.raises(JetCheckError) as exc:
        extend_jet(jet, dec, t_grid=[1e-1, 1e-2, 1e-3])
    assert 0.99 <= exc.value.witness.ratio <= 1.01


# -- agreement --------------------------------------------------------------------

def test_polynomial_agreement(disk, disk_decomp):
    p = Polynomial.random(2, 2, np.random.default_rng(4))
    jet = jet_of_function(p, disk.samples, 2, partials=p.partials)
    rep = verify_jet_agreement(extend_jet(jet, disk_decomp), jet, h=1e-4)
    assert rep.max_discrepancy <= 1e-6


def test_zero_agreement(disk, disk_decomp):
    jet = JetField.zeros(disk.samples, 2)
    rep = verify_jet_agreement(extend_jet(jet, disk_decomp), jet,
                               boundary_probes(disk, jet, 50, 0.01, 0.1, box=disk_decomp.box))
    assert all(v == 0 for v in rep.discrepancy.values())


def test_sin_cos_decay_order_on_disk(disk, disk_decomp):
    jet = registry_jet("sin_cos", disk.samples, 3)
    Ef = extend_jet(jet, disk_decomp)
    probes = boundary_probes(disk, jet, 400, 0.005, 0.1, box=disk_decomp.box)
    rep = verify_jet_agreement(Ef, jet, probes)
    assert rep.decay_order >= 3 - 0.25


def test_sin_cos_koch_fit_constant():
    dom = koch_snowflake(3)
    jet = registry_jet("sin_cos", dom.samples, 3)
    dec = whitney_decompose(dom)
    Ef = extend_jet(jet, dec)
    pts, _ = boundary_probes(dom, jet, 400, 0.005, 0.1, box=dec.box)
    dist = dom.distance_to_set(pts)
    err = np.abs(Ef(pts) - jet_of_function(lambda p: np.sin(p[:, 0]) * np.cos(p[:, 1]), pts, 0).values[:, 0])
    assert np.max(err / dist ** 3) <= 10


def test_growth_of_zero_jet(disk, disk_decomp):
    jet = JetField.zeros(disk.samples, 2)
    rep = operator_growth(extend_jet(jet, disk_decomp), jet, np.array([[1.2, 0.0], [0.0, -1.1]]))
    assert rep["ratio"] == {"0": 0.0, "1": 0.0, "2": 0.0}


def test_growth_of_linear_polynomial(disk, disk_decomp):
    p = Polynomial({(0, 0): 1.0, (1, 0): 2.0}, 2)
    jet = jet_of_function(p, disk.samples, 1, partials=p.partials)
    pts = np.array([[1.3, 0.0], [-1.2, 0.1]])
    rep = operator_growth(extend_jet(jet, disk_decomp), jet, pts)
    assert rep["extension_sup"]["0"] == pytest.approx(np.max(np.abs(p(pts))), abs=5e-3)
    assert rep["extension_sup"]["1"] == pytest.approx(2.0, abs=5e-3)
    assert rep["ratio"]["1"] == pytest.approx(3.6 / 3.0, abs=5e-3)

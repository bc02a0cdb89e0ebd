import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wkit.domains import SampledClosedSet, closed_box
from wkit.errors import (ConfigurationError, CoverageError, CuspConditionError, GlueError,
                         IndexingError)
from wkit.functions import Polynomial
from wkit.patching import (ChartJets, ChartRep, CompactSupportTag, ExtensionOperator, Gauge,
                           GlobalSection, LocalSectionFamily, atlas_from_spec, box_atlas,
                           circle_atlas, closed_arc, compatibility_check, family_from_global,
                           global_extension_operator, glue, local_extend, mixing_map,
                           restrict_section, restriction_defect, scan_support, seam_jumps,
                           section_csv, wrap_angle)
from wkit.trig import TrigPoly


def three_chart_atlas():
    gauge = Gauge(2, "rotation", {"rates": [0.3, -0.7, 1.1]})
    return box_atlas([(-0.2, 1.2), (0.8, 2.2), (1.8, 3.2)], scales=[[1.0], [2.0], [-0.5]],
                     offsets=[[0.0], [1.0], [3.0]], rank=2, gauge=gauge)


def random_family(atlas, rng, degree=3):
    reps = []
    for _ in atlas.charts:
        polys = [Polynomial.random(atlas.dimension, degree, rng) for _ in range(atlas.rank)]
        reps.append(ChartRep(lambda u, p=polys: np.stack([q(u) for q in p], axis=1), atlas.rank))
    return LocalSectionFamily(atlas, "U", reps, CompactSupportTag(frozenset(range(len(atlas)))))


def family(atlas, fns, stage="U"):
    reps = [ChartRep(f, atlas.rank) for f in fns]
    return LocalSectionFamily(atlas, stage, reps, CompactSupportTag(frozenset(range(len(atlas)))))


@pytest.fixture(scope="module")
def circle():
    return circle_atlas()


@pytest.fixture(scope="module")
def arc():
    return closed_arc(math.pi / 4, 3 * math.pi / 4, 0.01)


@pytest.fixture(scope="module")
def circle_op(circle, arc):
    return ExtensionOperator(circle, arc, 3)


# -- atlases ----------------------------------------------------------------------

def test_wrap_angle():
    np.testing.assert_allclose(wrap_angle([0.1, math.pi, 4.0, -4.0]),
                               [0.1, math.pi, 4.0 - 2 * math.pi, -4.0 + 2 * math.pi])


def test_circle_atlas_invariants(circle):
    rep = circle.check()
    assert rep["cocycle_ok"] and rep["pou_ok"] and rep["support_ok"]
    assert rep["V_covers_samples"]
    assert rep["B"] == 2


def test_rotation_gauge_cocycle():
    atlas = three_chart_atlas()
    rep = atlas.check()
    assert rep["cocycle_defect"] <= 1e-9
    assert rep["pou_ok"] and rep["support_ok"]
    assert atlas.J == [(0, 1), (0, 1, 2), (1, 2)]


def test_chart_round_trip():
    atlas = three_chart_atlas()
    x = np.linspace(-0.1, 3.1, 50)[:, None]
    for c in atlas.charts:
        np.testing.assert_allclose(c.from_chart(c.to_chart(x)), x, atol=1e-14)


def test_atlas_spec_round_trip():
    atlas = three_chart_atlas()
    spec = json.loads(json.dumps(atlas.to_spec()))
    back = atlas_from_spec(spec)
    assert back.J == atlas.J
    x = atlas.sample_points(0.05)
    np.testing.assert_array_equal(back.chi(x), atlas.chi(x))
    spec["charts"][0]["transition_to"]["1"]["offset"] = [9.0]
    with pytest.raises(ConfigurationError):
        atlas_from_spec(spec)


def test_bad_atlas_specs():
    with pytest.raises(ConfigurationError):
        atlas_from_spec({"charts": [{"box": [[0], [1]]}]})
    with pytest.raises(ConfigurationError):
        box_atlas([(0, 1)], shrink=0.6)
    with pytest.raises(ConfigurationError):
        circle_atlas(overlap=0.1, v_overlap=0.2)


# -- restriction ------------------------------------------------------------------

def test_restrict_zero(circle, arc):
    fam = family(circle, [lambda u: np.zeros((len(u), 1))] * 2)
    cf = restrict_section(fam, arc, m=2)
    for r in cf.reps:
        assert all(np.all(j.values == 0) for j in r.jets)


def test_restrict_whole_box_is_identity():
    atlas = box_atlas([(-0.25, 1.25)])
    C = closed_box([-0.2], [1.2], 0.05)
    sec = GlobalSection(lambda x: np.sin(3 * x), 1)
    cf = restrict_section(family_from_global(atlas, sec), C)
    np.testing.assert_array_equal(cf.reps[0].values()[:, 0], np.sin(3 * C.samples[:, 0]))


def test_restrict_sin_half_interval():
    atlas = box_atlas([(-0.25, 1.25)])
    C = closed_box([0.0], [0.5], 0.01)
    sec = GlobalSection(lambda x: np.sin(x), 1)
    cf = restrict_section(family_from_global(atlas, sec), C)
    r = cf.reps[0]
    np.testing.assert_array_equal(r.values()[:, 0], np.sin(C.samples[r.sample_index, 0]))
    assert len(r.sample_index) == len(C.samples)


def test_restrict_indexing_error():
    atlas = box_atlas([(-0.25, 1.25)])
    C = closed_box([0.0], [2.0], 0.1)
    fam = family(atlas, [lambda u: u])
    with pytest.raises(IndexingError):
        restrict_section(fam, C)


def test_restrict_inherits_compatibility(circle, arc):
    sec = GlobalSection.trig([TrigPoly.random(3, np.random.default_rng(0))])
    cf = restrict_section(family_from_global(circle, sec), arc, 2)
    assert compatibility_check(cf)["max_defect"] == 0.0


# -- mixing map -------------------------------------------------------------------

def test_mixing_single_chart_identity():
    atlas = box_atlas([(-1.0, 1.0)])
    fam = family(atlas, [lambda u: np.cos(u)])
    h = mixing_map(fam)
    u = np.linspace(-0.79, 0.79, 41)[:, None]
    np.testing.assert_allclose(h.reps[0](u), np.cos(u), atol=1e-15)


def test_mixing_constant_one():
    atlas = box_atlas([(-0.5, 1.5), (0.5, 2.5)])
    h = mixing_map(family(atlas, [lambda u: np.ones((len(u), 1))] * 2))
    x = np.linspace(0.75, 1.25, 21)[:, None]
    for i in range(2):
        np.testing.assert_allclose(h.reps[i](x), 1.0, atol=1e-15)


def test_mixing_incompatible_pair_formula():
    atlas = box_atlas([(-0.5, 1.5), (0.5, 2.5)])
    h = mixing_map(family(atlas, [lambda u: u, lambda u: u + 1]))
    x = np.linspace(0.7, 1.3, 61)[:, None]
    chi = atlas.chi(x)
    want = chi[:, 0] * x[:, 0] + chi[:, 1] * (x[:, 0] + 1)
    np.testing.assert_allclose(h.reps[0](x)[:, 0], want, atol=1e-15)
    np.testing.assert_array_equal(h.reps[0](x), h.reps[1](x))


def test_mixing_coverage_error():
    atlas = box_atlas([(-0.5, 1.5), (0.5, 2.5)])
    h = mixing_map(family(atlas, [lambda u: u, lambda u: u]))
    vlo = atlas.charts[0].vlo
    with pytest.raises(CoverageError):
        h.reps[0](vlo[None])


def test_mixing_needs_tag():
    atlas = box_atlas([(-0.5, 1.5)])
    with pytest.raises(ValueError):
        mixing_map(LocalSectionFamily(atlas, "U", [ChartRep(lambda u: u, 1)]))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mixing_lands_in_compatible_space(seed):
    atlas = three_chart_atlas()
    h = mixing_map(random_family(atlas, np.random.default_rng(seed)))
    assert compatibility_check(h, 1e-10)["passed"]


# -- compatibility ----------------------------------------------------------------

def test_compatibility_reports_injected_defect():
    atlas = box_atlas([(-0.5, 1.5), (0.5, 2.5)])
    h = mixing_map(family(atlas, [lambda u: u, lambda u: u]))
    bump = 0.01
    bad = LocalSectionFamily(atlas, "V", [h.reps[0], ChartRep(
        lambda u, r=h.reps[1]: r(u) + bump * ((u > 0.9) & (u < 1.0)), 1)], h.tag)
    rep = compatibility_check(bad)
    assert abs(rep["max_defect"] - bump) <= 0.1 * bump
    assert rep["worst_pair"] == [0, 1]
    assert 0.9 < rep["worst_sample"][0] < 1.0
    assert not rep["passed"]


def test_compatibility_single_chart_vacuous():
    atlas = box_atlas([(0.0, 1.0)])
    rep = compatibility_check(family(atlas, [lambda u: u]))
    assert rep["passed"] and rep["pairs"] == {} and rep["max_defect"] == 0.0


# -- glue -------------------------------------------------------------------------

def test_glue_constant_seven(circle):
    h = family(circle, [lambda u: np.full((len(u), 1), 7.0)] * 2, stage="V")
    g = glue(h)
    x = circle.sample_points(0.01)
    assert g.consistent
    np.testing.assert_array_equal(g.values_at(x), 7.0)


def test_glue_rejects_incompatible():
    atlas = box_atlas([(-0.5, 1.5), (0.5, 2.5)])
    h = mixing_map(family(atlas, [lambda u: u, lambda u: u]))
    bad = LocalSectionFamily(atlas, "V", [h.reps[0], ChartRep(
        lambda u, r=h.reps[1]: r(u) + 1e-2 * ((u > 0.9) & (u < 1.0)), 1)], h.tag)
    with pytest.raises(GlueError) as exc:
        glue(bad, 1e-6)
    assert 0.9 < exc.value.sample[0] < 1.0
    assert exc.value.chart_pair == [0, 1]


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mixing_output_always_glues(seed):
    atlas = three_chart_atlas()
    g = glue(mixing_map(random_family(atlas, np.random.default_rng(seed))))
    assert g.consistent


# -- local extension --------------------------------------------------------------

def test_local_extend_all_empty_is_zero():
    atlas = box_atlas([(-0.25, 1.25), (1.0, 2.5)])
    far = closed_box([5.0], [6.0], 0.1)
    op = ExtensionOperator(atlas, far, 2)
    assert op.charts == [None, None]
    empty = [ChartJets(np.zeros((0, 1)), np.zeros(0, dtype=np.int64), []) for _ in range(2)]
    out = local_extend(LocalSectionFamily(atlas, "C", empty, subset=far), 2, operator=op)
    u = np.linspace(-0.2, 2.4, 30)[:, None]
    for r in out.reps:
        assert np.all(r(u) == 0)
    assert out.tag.charts == frozenset()


def test_local_extend_zero_input():
    atlas = box_atlas([(-0.25, 1.25)])
    C = closed_box([0.0], [0.5], 0.01)
    cf = restrict_section(family(atlas, [lambda u: np.zeros((len(u), 1))]), C, 2)
    out = local_extend(cf, 2)
    assert np.all(out.reps[0](np.linspace(-0.2, 1.2, 50)[:, None]) == 0)


def test_local_extend_square():
    atlas = box_atlas([(-0.25, 1.25)])
    C = closed_box([0.0], [0.5], 0.01)
    sec = GlobalSection.polynomial([Polynomial({(2,): 1.0}, 1)])
    cf = restrict_section(family_from_global(atlas, sec), C, m=2)
    ext = local_extend(cf, 2)
    np.testing.assert_array_equal(ext.reps[0](C.samples)[:, 0], C.samples[:, 0] ** 2)
    u = np.linspace(0.5, 1.0, 201)[1:, None]
    assert np.max(np.abs(ext.reps[0](u)[:, 0] - u[:, 0] ** 2)) <= 5e-3


def test_cusp_precondition_refuses_point_set():
    atlas = box_atlas([(-1.0, 1.0)])

    def member(p):
        return np.atleast_2d(p)[:, 0] == 0

    point = SampledClosedSet("point", 1, member, lambda p: np.zeros(len(np.atleast_2d(p)), bool),
                             np.zeros((1, 1)), np.array([True]), 0.01, (np.zeros(1), np.zeros(1) + 1e-3))
    with pytest.raises(CuspConditionError) as exc:
        ExtensionOperator(atlas, point, 1)
    assert exc.value.violation.passed is False


# -- the assembled operator -------------------------------------------------------

def test_global_zero(circle, arc, circle_op):
    cf = restrict_section(family(circle, [lambda u: np.zeros((len(u), 1))] * 2), arc, 3)
    g = circle_op(cf)
    assert np.all(g.values_at(circle.sample_points(0.01)) == 0)


def test_global_one_shot_matches_operator(circle, arc, circle_op):
    sec = GlobalSection.trig([TrigPoly([0.0, 1.0])])
    cf = restrict_section(family_from_global(circle, sec), arc, 3)
    x = circle.sample_points(0.02)
    np.testing.assert_array_equal(global_extension_operator(cf, circle, arc, 3).values_at(x),
                                  circle_op(cf).values_at(x))


def test_cos_on_quarter_arc_is_smooth_across_seams(circle):
    quarter = closed_arc(0.0, math.pi / 2, 0.01)
    op = ExtensionOperator(circle, quarter, 3)
    sec = GlobalSection.trig([TrigPoly([0.0, 1.0])])
    cf = restrict_section(family_from_global(circle, sec), quarter, 3)
    g = op(cf)
    assert restriction_defect(g, cf) == 0.0
    sj = seam_jumps(g)
    assert sj["value_jump"] <= 1e-6 and sj["derivative_jump"] <= 1e-6


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_round_trip_identity(circle, arc, circle_op, seed):
    sec = GlobalSection.trig([TrigPoly.random(3, np.random.default_rng(seed))])
    cf = restrict_section(family_from_global(circle, sec), arc, 3)
    g = circle_op(cf)
    assert g.consistent
    assert restriction_defect(g, cf) == 0.0
    # restricting the extension again reproduces the data at C's samples
    again = restrict_section(g, arc, 0)
    for r0, r1 in zip(cf.reps, again.reps):
        np.testing.assert_array_equal(r1.values(), r0.values())


def test_higher_order_agreement_on_arc(circle, arc, circle_op):
    poly = TrigPoly([0.2, 0.5, -0.3], [0.0, 0.4, 0.1])
    sec = GlobalSection.trig([poly])
    cf = restrict_section(family_from_global(circle, sec), arc, 3)
    g = circle_op(cf)
    t = arc.samples[5:-5, 0]
    h = 1e-4
    rep = g.reps[0]
    d1 = (rep(t[:, None] + h) - rep(t[:, None] - h))[:, 0] / (2 * h)
    assert np.max(np.abs(d1 - poly.derivative(1)(t))) <= 1e-5


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_pipeline_linearity(circle, arc, circle_op, seed, a, b):
    rng = np.random.default_rng(seed)
    f = restrict_section(family_from_global(circle, GlobalSection.trig([TrigPoly.random(3, rng)])), arc, 3)
    g = restrict_section(family_from_global(circle, GlobalSection.trig([TrigPoly.random(3, rng)])), arc, 3)
    x = circle.sample_points(0.01)
    lhs = circle_op(f.scaled(a) + g.scaled(b)).values_at(x)
    ef, eg = circle_op(f).values_at(x), circle_op(g).values_at(x)
    rhs = a * ef + b * eg
    scale = abs(a) * np.abs(ef).max() + abs(b) * np.abs(eg).max()
    assert np.max(np.abs(lhs - rhs)) <= 1e-9 * max(scale, 1e-300)


def test_splitting(circle, arc, circle_op):
    sec = GlobalSection.trig([TrigPoly.random(4, np.random.default_rng(11))])
    fam = family_from_global(circle, sec)
    ext = circle_op(restrict_section(fam, arc, 3))
    iota = LocalSectionFamily(circle, "U", [ChartRep(lambda u, r=r, e=e: r(u) - e(u), 1)
                                            for r, e in zip(fam.reps, ext.reps)])
    res = restrict_section(iota, arc, 0)
    for r in res.reps:
        assert np.all(r.values() == 0)
    x = circle.sample_points(0.01)
    np.testing.assert_allclose(ext.values_at(x) + iota.values_at(x), fam.values_at(x), atol=1e-12)


def test_support_bookkeeping_every_stage(circle):
    # a section supported on a small arc inside chart 0 only
    short = closed_arc(1.2, 1.9, 0.01)
    op = ExtensionOperator(circle, short, 2)

    def bumpy(x):
        t = np.atleast_2d(x)[:, 0]
        return (np.clip(1 - ((t - 1.55) / 0.3) ** 2, 0, None) ** 4)[:, None]

    fam = family_from_global(circle, GlobalSection(bumpy, 1))
    assert fam.tag.charts == frozenset({0})
    cf = restrict_section(fam, short, 2)
    stages = [fam]
    ext = op.local_extend(cf)
    stages += [ext, mixing_map(ext), op(cf)]
    for st_ in stages:
        if st_.tag is None:
            continue
        scanned = scan_support(st_, zero_tol=1e-12)
        assert scanned.charts <= st_.tag.charts


def test_section_csv_columns(circle, arc, circle_op):
    cf = restrict_section(family_from_global(circle, GlobalSection.trig([TrigPoly([1.0])])), arc, 3)
    text = section_csv(circle_op(cf))
    lines = text.splitlines()
    assert lines[0] == "chart,u0,v0"
    assert all(len(line.split(",")) == 3 for line in lines[1:])
    assert section_csv(cf).splitlines()[0] == "chart,u0,v0"


def test_rank_two_rotation_bundle_round_trip():
    atlas = three_chart_atlas()
    C = closed_box([0.1], [2.9], 0.01)
    op = ExtensionOperator(atlas, C, 2)
    rng = np.random.default_rng(3)
    polys = [Polynomial.random(1, 3, rng) for _ in range(2)]
    sec = GlobalSection.polynomial(polys)
    fam = family_from_global(atlas, sec)
    cf = restrict_section(fam, C, 2, h=1e-3)
    g = op(cf)
    assert g.consistent
    assert restriction_defect(g, cf) == 0.0

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from wkit.domains import (closed_ball, closed_box, convex_polytope, domain_from_spec, exp_cusp_domain,
                          full_space, half_space, koch_snowflake, koch_vertices)
from wkit.errors import ConfigurationError, SizeError


def test_half_space_membership():
    assert not half_space(2).membership(np.array([[-0.1, 3.0]]))[0]
    assert half_space(2).membership(np.array([[0.0, 3.0]]))[0]
    assert not half_space(2).interior(np.array([[0.0, 3.0]]))[0]


def test_exp_cusp_membership_in_fjord():
    dom = exp_cusp_domain()
    y = math.exp(-4) / 2
    assert not dom.membership(np.array([[0.5, y]]))[0]
    assert dom.membership(np.array([[0.5, 0.0], [0.5, math.exp(-4)], [-0.5, y]])).all()


def test_koch_zero_is_triangle():
    v = koch_vertices(0)
    assert v.shape == (3, 2)
    sides = np.linalg.norm(v - np.roll(v, 1, axis=0), axis=1)
    np.testing.assert_allclose(sides, sides[0], rtol=1e-12)
    dom = koch_snowflake(0)
    assert dom.membership(v.mean(axis=0, keepdims=True))[0]


def test_koch_vertex_count():
    assert len(koch_vertices(4)) == 3 * 4 ** 4


def test_koch_iteration_guard():
    with pytest.raises(SizeError):
        koch_vertices(9)


def test_bad_resolution():
    with pytest.raises(ConfigurationError):
        closed_ball(2, resolution=0.0)


@pytest.mark.parametrize("dom", [
    half_space(2), closed_ball(2), closed_ball(3, resolution=0.2),
    convex_polytope([[0, 0], [1, 0], [0, 1]]), koch_snowflake(3), exp_cusp_domain(0.02),
    closed_box((0.0, 0.0), (1.0, 0.5), 0.1), closed_box(), full_space(2, resolution=0.1),
], ids=lambda d: d.name)
def test_generator_invariants(dom):
    rep = dom.validate(np.random.default_rng(0))
    for key in ("interior_implies_member", "metric_symmetric", "metric_zero_iff_equal",
                "metric_triangle", "regular"):
        assert rep[key], key
    assert np.all(dom.membership(dom.samples))
    assert not np.any(dom.interior(dom.boundary_samples))
    assert np.all(dom.interior(dom.interior_samples))


def test_closed_box_corners_and_faces():
    dom = closed_box((0.0,), (1.0,), 0.3)
    xs = dom.samples[:, 0]
    assert xs.min() == 0.0 and xs.max() == 1.0
    assert np.max(np.diff(np.sort(xs))) <= 0.3
    assert sorted(dom.boundary_samples[:, 0]) == [0.0, 1.0]


def test_closed_box_rejects_empty():
    with pytest.raises(ConfigurationError):
        closed_box((1.0,), (0.0,))


def test_domain_from_spec_and_set_id():
    spec = {"generator": "closed_ball", "params": {"d": 2}, "resolution": 0.1}
    a, b = domain_from_spec(spec), domain_from_spec(spec)
    assert a.set_id() == b.set_id()
    assert a.set_id() != domain_from_spec({**spec, "resolution": 0.05}).set_id()
    with pytest.raises(ConfigurationError):
        domain_from_spec({"generator": "nope"})
    with pytest.raises(ConfigurationError):
        domain_from_spec({"generator": "closed_ball", "params": {"bogus": 1}})


@settings(max_examples=40, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_convex_segments_are_interior(x0, y0, x1, y1):
    dom = closed_ball(2, resolution=0.1)
    a = np.array([[x0, y0]]) * 0.7
    b = np.array([[x1, y1]]) * 0.7
    assume(np.any(a != b))
    assert dom.segment_interior(a, b)[0]


def test_exp_cusp_segment_across_fjord_is_not_interior():
    dom = exp_cusp_domain(0.02)
    a = np.array([[0.3, -0.01]])
    b = np.array([[0.3, 0.5]])
    assert not dom.segment_interior(a, b)[0]

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wkit.errors import ChartDomainError
from wkit.mappings import (CircleMap, FlatAddition, MapGridFunction, SphereExponential,
                           SphereProjection, TangentField, addition_from_spec, change_of_charts,
                           chart_backward, chart_forward, circle_grid, directional_smoothness,
                           submersion_chart_check, switch_addition)
from wkit.patching import ExtensionOperator, circle_atlas, closed_arc
from wkit.trig import TrigPoly

NORTH = np.array([0.0, 0.0, 1.0])


def unit(v):
    v = np.atleast_2d(v)
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def sphere_grid(rng, n=40):
    nodes = np.linspace(0, 1, n)
    return MapGridFunction(nodes, unit(rng.standard_normal((n, 3))), SphereExponential(3))


def tangent(f, rng, size):
    v = f.addition.tangent_project(f.values, rng.standard_normal(f.values.shape))
    return TangentField(f, size * v / np.linalg.norm(v, axis=1, keepdims=True))


def perturb(f, rng, size):
    return chart_backward(f, tangent(f, rng, size))


@pytest.mark.parametrize("cls", [SphereExponential, SphereProjection])
def test_sigma_of_zero_is_exact(cls):
    q = unit(np.random.default_rng(1).standard_normal((50, 3)))
    add = cls(3)
    assert np.array_equal(add.sigma(q, np.zeros_like(q)), q)


@pytest.mark.parametrize("cls", [SphereExponential, SphereProjection])
@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), frac=st.floats(0.0, 1.0))
def test_inverse_recovers_vector(cls, seed, frac):
    rng = np.random.default_rng(seed)
    add = cls(3)
    q = unit(rng.standard_normal((20, 3)))
    v = add.tangent_project(q, rng.standard_normal((20, 3)))
    v *= frac * add.tangent_limit() / np.linalg.norm(v, axis=1, keepdims=True)
    assert np.abs(add.inverse(q, add.sigma(q, v)) - v).max() <= 1e-9


def test_addition_spec_round_trip():
    for add in (FlatAddition(2), SphereExponential(3), SphereProjection(3)):
        back = addition_from_spec(add.spec())
        assert type(back) is type(add) and back.n == add.n


def test_values_must_lie_on_sphere():
    vals = unit(np.ones((4, 3)))
    vals[2] *= 1.01
    with pytest.raises(ChartDomainError) as exc:
        MapGridFunction(np.arange(4.0), vals, SphereExponential(3))
    assert exc.value.node == 2


# -- chart_forward / chart_backward -------------------------------------------

def test_forward_of_f_is_zero():
    f = sphere_grid(np.random.default_rng(2))
    assert np.all(chart_forward(f, f).vectors == 0)


def test_flat_forward_and_backward():
    rng = np.random.default_rng(3)
    add = FlatAddition(2)
    f = MapGridFunction(np.arange(10.0), rng.standard_normal((10, 2)), add)
    g = MapGridFunction(np.arange(10.0), rng.standard_normal((10, 2)), add)
    assert np.array_equal(chart_forward(f, g).vectors, g.values - f.values)
    tau = TangentField(f, rng.standard_normal((10, 2)))
    assert np.array_equal(chart_backward(f, tau).values, f.values + tau.vectors)
    assert np.array_equal(chart_backward(f, TangentField(f, np.zeros((10, 2)))).values, f.values)


def test_geodesic_distance_example():
    n = 5
    f = MapGridFunction(np.arange(n), np.tile(NORTH, (n, 1)), SphereExponential(3))
    p = np.array([math.sin(0.3), 0.0, math.cos(0.3)])
    g = MapGridFunction(np.arange(n), np.tile(p, (n, 1)), SphereExponential(3))
    np.testing.assert_allclose(chart_forward(f, g).norms(), 0.3, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_chart_round_trips(seed):
    rng = np.random.default_rng(seed)
    f = sphere_grid(rng)
    tau = tangent(f, rng, 1.0)
    tau.vectors *= rng.uniform(0, 0.2, (len(tau.vectors), 1))
    assert np.abs(chart_forward(f, chart_backward(f, tau)).vectors - tau.vectors).max() <= 1e-9
    g = perturb(f, rng, 0.5)
    assert np.abs(chart_backward(f, chart_forward(f, g)).values - g.values).max() <= 1e-9


def test_chart_domain_errors_name_node():
    f = sphere_grid(np.random.default_rng(4), n=6)
    vals = f.values.copy()
    vals[3] = -vals[3]
    g = MapGridFunction(f.nodes, vals, f.addition)
    with pytest.raises(ChartDomainError) as exc:
        chart_forward(f, g)
    assert exc.value.node == 3
    big = np.zeros_like(f.values)
    big[1] = f.addition.tangent_project(f.values[1:2], [[1.0, 1.0, 1.0]])[0]
    big[1] *= 2.0 / np.linalg.norm(big[1])
    with pytest.raises(ChartDomainError) as exc:
        chart_backward(f, TangentField(f, big))
    assert exc.value.node == 1


def test_projection_addition_hemisphere_bound():
    add = SphereProjection(3)
    f = MapGridFunction([0.0], NORTH[None], add)
    g = MapGridFunction([0.0], [[1.0, 0.0, 0.0]], add)
    with pytest.raises(ChartDomainError):
        chart_forward(f, g)


# -- change of charts -----------------------------------------------------------

def test_change_of_charts_identity_when_equal():
    rng = np.random.default_rng(5)
    f = sphere_grid(rng)
    tau = tangent(f, rng, 0.2)
    np.testing.assert_allclose(change_of_charts(f, f, tau).vectors, tau.vectors, atol=1e-12)


def test_change_of_charts_flat_formula():
    rng = np.random.default_rng(6)
    add = FlatAddition(3)
    f = MapGridFunction(np.arange(8.0), rng.standard_normal((8, 3)), add)
    g = MapGridFunction(np.arange(8.0), rng.standard_normal((8, 3)), add)
    tau = TangentField(g, rng.standard_normal((8, 3)))
    np.testing.assert_allclose(change_of_charts(f, g, tau).vectors,
                               (g.values - f.values) + tau.vectors, atol=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_change_of_charts_directionally_smooth(seed):
    rng = np.random.default_rng(seed)
    f = sphere_grid(rng)
    g = perturb(f, rng, 0.05)
    tau = tangent(g, rng, 0.1)
    delta = tangent(g, rng, 1.0).vectors
    assert directional_smoothness(f, g, tau, delta) <= 1e-6


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_switching_local_addition_is_bijective(seed):
    rng = np.random.default_rng(seed)
    f = sphere_grid(rng)
    tau = tangent(f, rng, 1.0)
    tau.vectors *= rng.uniform(0, 0.5, (len(f.nodes), 1))
    other = SphereProjection(3)
    there = switch_addition(f, tau, other)
    f2 = MapGridFunction(f.nodes, f.values, other)
    back = switch_addition(f2, TangentField(f2, there.vectors), f.addition)
    assert np.abs(back.vectors - tau.vectors).max() <= 1e-8
    # representatives differ in general but describe the same map
    assert np.abs(chart_backward(f2, TangentField(f2, there.vectors)).values
                  - chart_backward(f, tau).values).max() <= 1e-12


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_restriction_commutes_with_charts(seed):
    rng = np.random.default_rng(seed)
    F = sphere_grid(rng, n=60)
    g = perturb(F, rng, 0.3)
    idx = np.sort(rng.choice(60, 17, replace=False))
    lhs = chart_forward(F.restrict(idx), g.restrict(idx)).vectors
    rhs = chart_forward(F, g).restrict(idx).vectors
    assert np.array_equal(lhs, rhs)


def test_grid_stencils_and_csv():
    h = 0.1
    f = MapGridFunction(np.arange(5) * h, np.zeros((5, 1)), FlatAddition(1), spacing=h)
    assert f.stencil_ok.tolist() == [False, True, True, True, False]
    assert f.to_csv().splitlines()[0] == "node_0,value_0"
    tau = TangentField(f, np.ones((5, 1)))
    assert tau.to_csv().splitlines()[0] == "node_0,base_0,vector_0"


def test_latitude_circle_on_sphere():
    F = CircleMap.latitude_circle(0.3, 0.4)
    vals = F(circle_grid(0.01))
    np.testing.assert_allclose(np.linalg.norm(vals, axis=1), 1.0, atol=1e-12)
    sigma = F.random_tangent_field(np.random.default_rng(0), amplitude=0.1)
    th = circle_grid(0.001)
    s = np.stack([p(th) for p in sigma], axis=1)
    assert np.abs(np.einsum("ij,ij->i", s, F(th))).max() <= 1e-12
    assert np.linalg.norm(s, axis=1).max() <= 0.1


# -- submersion diagram -------------------------------------------------------

@pytest.fixture(scope="module")
def arc():
    return closed_arc(math.pi / 4, 3 * math.pi / 4, 0.01)


@pytest.fixture(scope="module")
def sphere_op(arc):
    return ExtensionOperator(circle_atlas(rank=3), arc, 3)


def test_submersion_zero_field(arc, sphere_op):
    F = CircleMap.latitude_circle()
    rep = submersion_chart_check(F, arc, sphere_op, trials=2, amplitude=0.0)
    assert rep["diagram_defect_max"] == 0.0 and rep["right_inverse_defect_max"] == 0.0


def test_submersion_flat_target(arc):
    op = ExtensionOperator(circle_atlas(rank=1), arc, 3)
    F = CircleMap([TrigPoly([0.3, 1.0], [0.0, 0.4])], FlatAddition(1))
    rep = submersion_chart_check(F, arc, op, trials=10, seed=1)
    assert rep["defect_max"] <= 1e-9


def test_submersion_sphere_target(arc, sphere_op):
    rep = submersion_chart_check(CircleMap.latitude_circle(), arc, sphere_op, trials=10, seed=2)
    assert rep["passed"] and rep["defect_max"] <= 1e-6
    assert rep["grid_spacing"] == 0.01 and rep["trials"] == 10


def test_submersion_rank_mismatch(arc):
    op = ExtensionOperator(circle_atlas(rank=1), arc, 1)
    with pytest.raises(ValueError):
        submersion_chart_check(CircleMap.latitude_circle(), arc, op, trials=1)

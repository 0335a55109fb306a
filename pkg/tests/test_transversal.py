import math

import numpy as np
import pytest

from fatmesh.complex import Complex, ComplexError
from fatmesh.fixtures import triangle_grid
from fatmesh.transversal import (TransversalityConfig, approximation_distance,
                                 complex_margin, displacement_schedule, intersection_dim,
                                 is_delta_transverse, perturb_vertex_for_transversality,
                                 transverse_angle)
from fatmesh.complex import faces_of
from fatmesh.metrics import batch_fatness


def seg(theta, r=1.0):
    u = np.array([math.cos(theta), math.sin(theta)])
    return np.array([-r * u, r * u])


def test_crossing_segments_angle():
    for theta in (0.1, 0.7, 1.2):
        assert transverse_angle(seg(0), seg(theta), 2) == pytest.approx(theta, abs=1e-12)
    # plane and line in R^3: angle between line and plane
    tri = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0.0]])
    line = np.array([[0.2, 0.2, -1], [0.2, 0.2 + 1 / math.tan(0.3), 0.0]])
    assert transverse_angle(tri, line, 3) == pytest.approx(0.3, abs=1e-12)


def test_intersection_dims():
    assert intersection_dim(seg(0), seg(0.5)) == 0
    assert intersection_dim(seg(0), seg(0) * 0.5) == 1
    assert intersection_dim(seg(0), seg(0) + [0, 1]) == -1


def test_clauses():
    cfg = TransversalityConfig(delta=0.2, eta1=1.0)
    ok, w = is_delta_transverse(seg(0), seg(1.0), cfg)
    assert ok and w.clause is None
    ok, w = is_delta_transverse(seg(0), seg(0) * 0.5, cfg)
    assert not ok and w.clause == "i"
    ok, w = is_delta_transverse(seg(0), seg(0.1), TransversalityConfig(delta=0.2, eta1=0.1))
    assert not ok and w.clause == "ii"
    # with eta1 = 1 the endpoint distance sin(0.1) is the binding clause
    ok, w = is_delta_transverse(seg(0), seg(0.1), cfg)
    assert not ok and w.clause == "iii"
    # crossing, but a vertex almost touches the other segment
    near = np.array([[0.0, 0.05], [0.0, -2.0]])
    ok, w = is_delta_transverse(seg(0), near, cfg)
    assert not ok and w.clause == "iii"
    with pytest.raises(ComplexError):
        TransversalityConfig(delta=2.0, eta1=1.0)


def test_perturb_vertex_on_edge():
    c2 = triangle_grid(3, 3, equilateral=False)
    # a fat triangle whose vertex sits exactly on a grid node
    c1 = Complex(np.array([[1.0, 1.0], [1.7, 1.2], [1.25, 1.85]]), [(0, 1, 2)])
    faces1 = faces_of((0, 1, 2))
    before = complex_margin(c1.points, faces1, c2.points, c2.faces, 2, 1.0)
    assert before.failures
    cfg = TransversalityConfig(delta=0.5, eta1=1.0)
    res = perturb_vertex_for_transversality(c1, 0, c2, 0.1, cfg, rng_seed=3)
    assert 0 < res.displacement < 0.1 * res.d1
    X = c1.points.copy()
    X[0] = res.point
    moved = [f for f in faces1 if 0 in f]
    after = complex_margin(X, moved, c2.points, res.l2_faces, 2, 1.0)
    assert not after.failures and after.margin >= res.delta_star - 1e-15
    assert batch_fatness(X[None])[0] >= res.phi0 / 2
    # deterministic under the seed
    again = perturb_vertex_for_transversality(c1, 0, c2, 0.1, cfg, rng_seed=3)
    assert np.array_equal(again.point, res.point)


def test_schedule_properties():
    s = displacement_schedule(0.2, 1.0, 3)
    assert all(a >= b for a, b in zip(s.t, s.t[1:]))
    assert s.delta_bigstar == 0.5 * min(s.delta_star)
    s2 = displacement_schedule(0.2, 4.0, 3)
    assert np.allclose(np.array(s2.t), 4 * np.array(s.t), rtol=1e-12, atol=0)
    with pytest.raises(ComplexError):
        displacement_schedule(0.2, 1.0, 1)


def test_approximation_distance():
    c = triangle_grid(2, 2)
    X = c.points
    assert approximation_distance(X, X, c).sup_distance == 0
    th = 0.01
    R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    rep = approximation_distance(X, X @ R.T, c)
    assert rep.sup_derivative_angle == pytest.approx(th, rel=1e-6)
    assert rep.sup_distance == pytest.approx(np.linalg.norm(X - X @ R.T, axis=1).max(), rel=1e-9)

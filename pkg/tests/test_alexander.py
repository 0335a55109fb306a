import math

import numpy as np
import pytest

from fatmesh.alexander import (AlexanderError, ChessColoring, build_alexander_map,
                               chessboard_color, continuity_residual, estimate_dilatation,
                               model_simplex, radial_stretch, radial_stretch_inverse)
from fatmesh.complex import Complex
from fatmesh.fixtures import fatness_ladder, kite, octahedron, triangle_grid
from fatmesh.metrics import fatness_of_points

EQ = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2]])


def fan(k, radius=1.0):
    """``k`` triangles around the origin."""
    t = 2 * np.pi * np.arange(k) / k
    pts = np.vstack([[0.0, 0.0], radius * np.c_[np.cos(t), np.sin(t)]])
    return Complex(pts, [(0, 1 + i, 1 + (i + 1) % k) for i in range(k)])


def mobius(k=5):
    """Triangulated Moebius band in R^3."""
    pts = []
    for i in range(k):
        t = 2 * np.pi * i / k
        for w in (-0.3, 0.3):
            pts.append([(1 + w * math.cos(t / 2)) * math.cos(t),
                        (1 + w * math.cos(t / 2)) * math.sin(t), w * math.sin(t / 2)])
    tris = []
    for i in range(k):
        a, b = 2 * i, 2 * i + 1
        if i < k - 1:
            c, d = 2 * i + 2, 2 * i + 3
        else:
            c, d = 1, 0  # the half twist swaps the two rims
        tris += [(a, b, c), (b, c, d)]
    return Complex(np.array(pts), [tuple(sorted(t)) for t in tris])


def proper(col):
    c = col.complex
    return all(len(o) < 2 or col.color[o[0]] != col.color[o[1]]
               for o in c.facet_adjacency.values())


def test_model_simplex_is_regular_and_inscribed():
    for n in (1, 2, 3, 4):
        q = model_simplex(n)
        assert np.allclose(np.linalg.norm(q, axis=1), 1.0)
        assert np.allclose(q.sum(axis=0), 0.0)
        d = np.linalg.norm(q[:, None] - q[None], axis=-1)[np.triu_indices(n + 1, 1)]
        assert np.allclose(d, d[0])
        if n > 1:
            assert np.linalg.det((q[1:] - q[0]).T) > 0


@pytest.mark.parametrize("c, subdivided", [(triangle_grid(3, 1), False),
                                           (octahedron(), False),
                                           (fan(6), False),
                                           (fan(5), True)])
def test_chessboard_colouring_is_proper(c, subdivided):
    col = chessboard_color(c)
    assert col.consistent and proper(col)
    assert col.subdivided is subdivided
    for s in col.complex.simplices:
        assert sorted(col.labels[v] for v in s) == list(range(len(s)))


def test_non_orientable_surface_is_rejected():
    with pytest.raises(AlexanderError):
        chessboard_color(mobius())


def test_radial_stretch_landmarks():
    z = radial_stretch(EQ, EQ.mean(axis=0))
    assert np.allclose(z, 0.0)
    for v in EQ:
        assert math.isclose(np.linalg.norm(radial_stretch(EQ, v)), 1.0, rel_tol=1e-12)
    for i in range(3):
        mid = (EQ[i] + EQ[(i + 1) % 3]) / 2
        assert math.isclose(np.linalg.norm(radial_stretch(EQ, mid)), 1.0, rel_tol=1e-12)
    with pytest.raises(AlexanderError):
        radial_stretch(EQ, [2.0, 2.0])


def test_radial_stretch_round_trip(rng):
    tau = rng.normal(size=(4, 3))
    X = rng.dirichlet(np.ones(4), 200) @ tau
    Z = radial_stretch(tau, X)
    assert (np.linalg.norm(Z, axis=1) <= 1 + 1e-12).all()
    assert np.abs(radial_stretch_inverse(tau, Z) - X).max() < 1e-9


@pytest.mark.parametrize("c", [octahedron(), fan(5), triangle_grid(3, 2)])
def test_map_is_continuous(c):
    m = build_alexander_map(c)
    assert continuity_residual(m, 200) < 1e-9


def test_identity_piece_has_unit_dilatation():
    c = Complex(model_simplex(2).copy(), [(0, 1, 2)])
    m = build_alexander_map(c)
    piece = next(iter(m.per_simplex_map.values()))
    if piece.color < 0:
        c = Complex(model_simplex(2)[[1, 0, 2]].copy(), [(0, 1, 2)])
        m = build_alexander_map(c)
    rep = estimate_dilatation(m, 128)
    assert 1.0 <= rep.K_outer <= 1.0 + 1e-6


def test_sliver_kite_is_worse_than_equilateral():
    Ks = [estimate_dilatation(build_alexander_map(kite(T)), 256).K_outer
          for T in fatness_ladder(5)]
    phis = [fatness_of_points(T) for T in fatness_ladder(5)]
    assert all(a > b for a, b in zip(phis, phis[1:]))
    assert all(a < b for a, b in zip(Ks, Ks[1:]))


def test_improper_colouring_is_refused():
    c = kite(EQ)
    col = chessboard_color(c)
    bad = ChessColoring({s: 1 for s in c.simplices}, False, c, col.labels, col.orientation)
    with pytest.raises(AlexanderError):
        build_alexander_map(c, bad)


def test_too_few_samples_is_refused():
    with pytest.raises(AlexanderError):
        estimate_dilatation(build_alexander_map(kite(EQ)), 50)


@pytest.mark.parametrize("c", [kite(EQ), octahedron()])
def test_differential_matches_finite_differences(c, rng):
    m = build_alexander_map(c)
    n = m.n
    h = 1e-6
    for s, p in m.per_simplex_map.items():
        X = m.source.coords(p.simplex)
        x = rng.dirichlet(np.ones(n + 1) * 3) @ X
        D = m.differential(s, x)[0]
        fd = np.empty((n, n))
        for j in range(n):
            e = p.frame[:, j] * h
            fd[:, j] = (m.evaluate(s, x + e)[0] - m.evaluate(s, x - e)[0]) / (2 * h)
        assert np.abs(D - fd).max() < 1e-6 * max(1.0, np.abs(D).max())


def test_negative_piece_sends_barycentre_to_infinity():
    m = build_alexander_map(kite(EQ))
    s, p = next((s, p) for s, p in m.per_simplex_map.items() if p.color < 0)
    b = m.source.coords(s).mean(axis=0)
    assert np.isinf(m.evaluate(s, b)).all()
    # vertices still land on the model simplex
    assert np.allclose(m.evaluate(s, m.source.coords(p.simplex)), m.target_simplex)

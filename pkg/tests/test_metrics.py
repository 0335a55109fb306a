import math

import numpy as np
import pytest

from conftest import brute_fatness, cayley_menger_volume
from fatmesh.complex import Complex, ComplexError
from fatmesh.fixtures import triangle_grid
from fatmesh.metrics import (batch_fatness, complex_fatness, dihedral_angles, fatness_of_points,
                             simplex_diameter, simplex_volume)

EQ = np.array([[0, 0], [1, 0], [0.5, math.sqrt(3) / 2]])
TET = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], float)


def test_fixed_values():
    assert fatness_of_points(EQ) == pytest.approx(math.sqrt(3) / 4, rel=1e-12)
    assert fatness_of_points(TET) == pytest.approx(math.sqrt(2) / 12, rel=1e-12)
    assert fatness_of_points([[0.0], [3.0]]) == 1.0
    assert fatness_of_points([[0, 0], [1, 0], [0, 1.0]]) == pytest.approx(0.25)
    assert simplex_volume([[2.0, 3.0]]) == 1.0


def test_volume_matches_cayley_menger(rng):
    for k in range(1, 5):
        for _ in range(20):
            P = rng.normal(size=(k + 1, 5))
            assert simplex_volume(P) == pytest.approx(cayley_menger_volume(P), rel=1e-8)


def test_fatness_matches_brute_force(rng):
    for k in range(1, 5):
        S = rng.normal(size=(30, k + 1, k))
        got = batch_fatness(S)
        for s, g in zip(S, got):
            oracle = brute_fatness(s)
            assert fatness_of_points(s) == pytest.approx(oracle, rel=1e-8)
            assert g == pytest.approx(oracle, rel=1e-8)


def test_scale_and_rotation_invariance(rng):
    P = rng.normal(size=(4, 3))
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    assert fatness_of_points(7.5 * P @ Q.T + 3) == pytest.approx(fatness_of_points(P), rel=1e-10)


def test_diameter():
    assert simplex_diameter(TET) == pytest.approx(2 * math.sqrt(2))
    assert simplex_diameter([[1.0, 2.0]]) == 0.0
    with pytest.raises(ComplexError):
        simplex_diameter(np.zeros((0, 2)))


def test_complex_report():
    c = triangle_grid(3, 2)
    rep = complex_fatness(c)
    assert rep.complex_min == pytest.approx(math.sqrt(3) / 4)
    assert sum(rep.histogram) == len(c.simplices)
    assert [i for i, _ in rep.rows(c)] == list(range(len(c.simplices)))
    empty = complex_fatness(Complex.empty(2))
    assert math.isnan(empty.complex_min) and empty.argmin is None


def test_dihedral_regular_tetrahedron():
    c = Complex(TET, [(0, 1, 2, 3)])
    rep = dihedral_angles((0, 1, 2, 3), c)
    assert rep.min_dihedral == pytest.approx(math.acos(1 / 3), rel=1e-12)
    # solid angle at a vertex of the regular tetrahedron
    vertex = [a for f, a in rep.per_face.items() if len(f) == 1]
    assert vertex and vertex[0] == pytest.approx(math.acos(23 / 27), rel=1e-9)

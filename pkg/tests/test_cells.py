import itertools

import numpy as np
import pytest
from scipy.spatial import ConvexHull
from shapely.geometry import Polygon

from fatmesh.cells import (ConvexCell, chebyshev_point, face_lattice, intersect_simplices,
                           subdivide_cell_fat)
from fatmesh.complex import ComplexError
from fatmesh.metrics import simplex_volume


def test_triangle_pair_matches_shapely(rng):
    for _ in range(40):
        P, Q = rng.random((3, 2)), rng.random((3, 2)) + 0.2
        cell = intersect_simplices(P, Q)
        oracle = Polygon(P).intersection(Polygon(Q))
        if cell is None or cell.dim < 2:
            assert oracle.area < 1e-12
            continue
        pts, simplices = subdivide_cell_fat(cell)
        vol = sum(simplex_volume(pts[list(s)]) for s in simplices)
        assert vol == pytest.approx(oracle.area, rel=1e-9)
        assert len(cell.vertices) == len(oracle.exterior.coords) - 1


def test_tetra_pair_volume_against_hull(rng):
    tested = 0
    for _ in range(20):
        P = rng.random((4, 3))
        c = P.mean(axis=0)
        cell = intersect_simplices(P, c + 1.1 * (P - c) + rng.normal(0, 0.05, 3))
        if cell is None or cell.dim < 3:
            continue
        tested += 1
        pts, simplices = subdivide_cell_fat(cell)
        vol = sum(simplex_volume(pts[list(s)]) for s in simplices)
        assert vol == pytest.approx(ConvexHull(cell.vertices).volume, rel=1e-9)
    assert tested >= 5


def test_square_lattice():
    sq = ConvexCell.from_points([[0, 0], [1, 0], [1, 1], [0, 1]])
    dims = sorted(sq.faces.values())
    assert dims == [0, 0, 0, 0, 1, 1, 1, 1, 2]
    c, rho = chebyshev_point(sq)
    assert np.allclose(c, [0.5, 0.5]) and rho == pytest.approx(0.5)
    pts, simplices = subdivide_cell_fat(sq)
    assert len(simplices) == 4  # cone from the centre over four edges


def test_cube_cone_subdivision():
    cube = ConvexCell.from_points(list(itertools.product([0, 1], repeat=3)))
    pts, simplices = subdivide_cell_fat(cube)
    # 6 square faces, each coned into 4 triangles, coned again from the centre
    assert len(simplices) == 24
    assert sum(simplex_volume(pts[list(s)]) for s in simplices) == pytest.approx(1.0)


def test_disjoint_and_touching():
    P = np.array([[0, 0], [1, 0], [0, 1.0]])
    assert intersect_simplices(P, P + 5) is None
    edge = intersect_simplices(P, np.array([[0, 0], [1, 0], [0, -1.0]]))
    assert edge.dim == 1
    with pytest.raises(ComplexError):
        chebyshev_point(edge, frozenset([0]))


def test_face_lattice_of_triangle():
    P = np.array([[0, 0], [1, 0], [0, 1.0]])
    tight = np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1]], bool)
    faces = face_lattice(P, tight)
    assert len(faces) == 7

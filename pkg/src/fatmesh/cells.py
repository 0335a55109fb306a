"""Convex cells cut out of simplices, and their fat cone subdivision.

A cell is described by its extreme points and a face lattice whose members
are vertex-index sets.  The lattice is derived from the set of constraints
active at each vertex: every face of a polytope is an intersection of facets,
and facets are the maximal vertex sets sharing one active constraint.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import linprog

from .complex import ComplexError
from .geometry import DEFAULT_TOL, affine_basis, affine_rank, as_points, simplex_pair_polytope
from .metrics import simplex_volume

Face = frozenset


def face_lattice(points: np.ndarray, tight: np.ndarray, tol: float = DEFAULT_TOL
                 ) -> dict[frozenset, int]:
    """All faces (as vertex-index sets) with their dimensions."""
    nv = len(points)
    full = frozenset(range(nv))
    dim = affine_rank(points, tol) if nv > 1 else 0
    faces = {full: dim}
    if dim == 0:
        return faces
    cand = {frozenset(np.nonzero(tight[:, j])[0].tolist()) for j in range(tight.shape[1])}
    facets = set()
    for s in cand:
        if s and s != full and _rank(points, s, tol) == dim - 1:
            facets.add(s)
    frontier = set(facets)
    for f in facets:
        faces[f] = dim - 1
    while frontier:
        nxt = set()
        for a in frontier:
            for b in facets:
                c = a & b
                if c and c not in faces:
                    faces[c] = _rank(points, c, tol)
                    nxt.add(c)
        frontier = nxt
    return faces


def _rank(points: np.ndarray, s, tol: float) -> int:
    idx = sorted(s)
    return affine_rank(points[idx], tol) if len(idx) > 1 else 0


@dataclass
class ConvexCell:
    vertices: np.ndarray
    faces: dict[frozenset, int]
    tol: float = DEFAULT_TOL
    labels: list = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.faces[frozenset(range(len(self.vertices)))]

    @property
    def full(self) -> frozenset:
        return frozenset(range(len(self.vertices)))

    def faces_of_dim(self, k: int) -> list[frozenset]:
        return sorted((f for f, d in self.faces.items() if d == k), key=sorted)

    def facets_of(self, face: frozenset) -> list[frozenset]:
        d = self.faces[face]
        return sorted((f for f, e in self.faces.items() if e == d - 1 and f < face), key=sorted)

    def is_simplex(self, face: frozenset | None = None) -> bool:
        face = self.full if face is None else face
        return len(face) == self.faces[face] + 1

    @cached_property
    def volume(self) -> float:
        pts, simplices = subdivide_cell_fat(self)
        return float(sum(simplex_volume(pts[list(s)]) for s in simplices))

    @classmethod
    def from_points(cls, points, tol: float = DEFAULT_TOL) -> "ConvexCell":
        """Cell spanned by ``points`` (convex hull, computed in its affine hull)."""
        from scipy.spatial import ConvexHull

        pts = as_points(points)
        origin, U = affine_basis(pts, tol)
        d = U.shape[1]
        local = (pts - origin) @ U
        if d == 0:
            return cls(pts[:1], {frozenset([0]): 0}, tol)
        if d == 1:
            lo, hi = int(np.argmin(local[:, 0])), int(np.argmax(local[:, 0]))
            v = pts[[lo, hi]]
            return cls(v, {frozenset([0, 1]): 1, frozenset([0]): 0, frozenset([1]): 0}, tol)
        hull = ConvexHull(local)
        keep = sorted(hull.vertices)
        v = pts[keep]
        loc = local[keep]
        eq = hull.equations
        slack = loc @ eq[:, :-1].T + eq[:, -1]
        tight = np.abs(slack) <= 1e-9 * max(1.0, float(np.abs(loc).max()))
        return cls(v, face_lattice(v, tight, tol), tol)


def intersect_simplices(s1, s2, tol: float = DEFAULT_TOL) -> ConvexCell | None:
    """``conv(s1) ∩ conv(s2)`` as a cell with its face lattice, or ``None``."""
    P, Q = as_points(s1), as_points(s2)
    if P.shape[1] != Q.shape[1]:
        raise ComplexError("ambient mismatch")
    poly = simplex_pair_polytope(P, Q, tol)
    if poly is None:
        return None
    verts, tight = poly
    return ConvexCell(verts, face_lattice(verts, tight, tol), tol)


def _local_halfspaces(points: np.ndarray, face_sets, full, tol: float):
    """Inequalities ``A c <= b`` (unit rows) of the facets of a cell, in the
    coordinates of the cell's affine hull."""
    pts = points[sorted(full)]
    origin, U = affine_basis(pts, tol)
    local = (points - origin) @ U
    d = U.shape[1]
    inside = local[sorted(full)].mean(axis=0)
    A, b = [], []
    for f in face_sets:
        F = local[sorted(f)]
        if d == 1:
            normal = np.array([1.0])
        else:
            _, _, vt = np.linalg.svd(F[1:] - F[0]) if len(F) > 1 else (None, None, np.eye(d))
            normal = vt[-1]
        off = normal @ F[0]
        if normal @ inside > off:
            normal, off = -normal, -off
        A.append(normal)
        b.append(off)
    return origin, U, np.array(A), np.array(b)


def chebyshev_center(points: np.ndarray, full, facet_sets, tol: float = DEFAULT_TOL
                     ) -> tuple[np.ndarray, float]:
    """Deepest point of a cell within its affine hull and its depth.

    Solved as the LP ``max rho`` s.t. ``a_f . c + rho <= b_f`` for every facet.
    """
    origin, U, A, b = _local_halfspaces(points, facet_sets, full, tol)
    d = U.shape[1]
    if d == 0:
        raise ComplexError("a point has no interior")
    cost = np.zeros(d + 1)
    cost[-1] = -1.0
    A_ub = np.hstack([A, np.ones((len(A), 1))])
    res = linprog(cost, A_ub=A_ub, b_ub=b, bounds=[(None, None)] * d + [(0, None)],
                  method="highs")
    if res.status != 0:
        raise ComplexError(f"Chebyshev LP failed: {res.message}")
    c, rho = res.x[:d], float(res.x[-1])
    scale = float(np.ptp((points[sorted(full)] - origin) @ U, axis=0).max())
    if rho <= tol * max(1.0, scale):
        raise ComplexError("degenerate cell (no interior within its hull)")
    return origin + U @ c, rho


def chebyshev_point(cell: ConvexCell, face: frozenset | None = None) -> tuple[np.ndarray, float]:
    face = cell.full if face is None else face
    if cell.faces[face] < 1:
        raise ComplexError("Chebyshev point needs a cell of dimension >= 1")
    return chebyshev_center(cell.vertices, face, cell.facets_of(face), cell.tol)


def subdivide_cell_fat(cell: ConvexCell) -> tuple[np.ndarray, list[tuple[int, ...]]]:
    """Cone subdivision from Chebyshev centres, inductively over the faces.

    Faces that are already simplices are kept whole; every other face ``b``
    is replaced by the joins of its centre with the subdivided facets of
    ``b``.  Returns ``(points, simplices)`` where ``points`` starts with the
    cell's own vertices.
    """
    if cell.dim < 0:
        raise ComplexError("empty cell")
    pts = [p for p in cell.vertices]
    memo: dict[frozenset, list[tuple[int, ...]]] = {}

    def tri(face):
        if face in memo:
            return memo[face]
        d = cell.faces[face]
        if d == 0 or cell.is_simplex(face):
            out = [tuple(sorted(face))]
        else:
            p, _ = chebyshev_point(cell, face)
            pts.append(p)
            pid = len(pts) - 1
            out = [(pid,) + t for f in cell.facets_of(face) for t in tri(f)]
        memo[face] = out
        return out

    if cell.dim >= 1:
        chebyshev_point(cell)  # raises on degenerate cells
    simplices = tri(cell.full)
    return np.array(pts), simplices

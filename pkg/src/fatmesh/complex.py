"""Geometric simplicial complexes: storage, validity, subcomplexes, unions."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import cKDTree

from .geometry import DEFAULT_TOL, affine_rank, simplex_halfspaces

logger = logging.getLogger(__name__)

Simplex = tuple[int, ...]


class ComplexError(ValueError):
    """Raised for malformed input or violated preconditions."""


def faces_of(simplex: Simplex, include_self: bool = True) -> list[Simplex]:
    k = len(simplex)
    top = k + 1 if include_self else k
    return [f for size in range(1, top) for f in itertools.combinations(simplex, size)]


def maximal_simplices(simplices: Iterable[Iterable[int]]) -> tuple[Simplex, ...]:
    """Sorted, de-duplicated simplices with proper faces of others removed."""
    uniq = {tuple(sorted(int(i) for i in s)) for s in simplices}
    by_size = sorted(uniq, key=len, reverse=True)
    covered: set[Simplex] = set()
    keep = []
    for s in by_size:
        if s in covered:
            continue
        keep.append(s)
        covered.update(faces_of(s, include_self=False))
    return tuple(sorted(keep, key=lambda s: (len(s), s)))


@dataclass(frozen=True, eq=False)
class Complex:
    """Shared vertex table plus a set of top simplices.

    Vertex ids are row indices into ``points``.  The face lattice is derived
    on demand and never stored independently of ``simplices``.
    """

    points: np.ndarray
    simplices: tuple[Simplex, ...]

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2:
            if pts.size == 0:
                pts = pts.reshape(0, 1)
            else:
                raise ComplexError("points must be a 2-d array")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "simplices", maximal_simplices(self.simplices))

    @classmethod
    def empty(cls, ambient: int) -> "Complex":
        return cls(np.zeros((0, ambient)), ())

    @property
    def ambient_dim(self) -> int:
        return self.points.shape[1]

    @property
    def dim(self) -> int:
        return max((len(s) - 1 for s in self.simplices), default=-1)

    @property
    def is_empty(self) -> bool:
        return not self.simplices

    @cached_property
    def faces(self) -> frozenset[Simplex]:
        out: set[Simplex] = set()
        for s in self.simplices:
            out.update(faces_of(s))
        return frozenset(out)

    def faces_of_dim(self, k: int) -> list[Simplex]:
        return sorted(f for f in self.faces if len(f) == k + 1)

    @cached_property
    def vertex_ids(self) -> tuple[int, ...]:
        return tuple(sorted({v for s in self.simplices for v in s}))

    def coords(self, simplex: Simplex) -> np.ndarray:
        return self.points[list(simplex)]

    def is_pure(self) -> bool:
        return len({len(s) for s in self.simplices}) <= 1

    @cached_property
    def facet_adjacency(self) -> dict[Simplex, list[Simplex]]:
        """Codimension-1 face -> top simplices containing it."""
        adj: dict[Simplex, list[Simplex]] = {}
        for s in self.simplices:
            for f in itertools.combinations(s, len(s) - 1):
                if f:
                    adj.setdefault(f, []).append(s)
        return adj

    def same_as(self, other: "Complex") -> bool:
        return (self.points.shape == other.points.shape
                and np.array_equal(self.points, other.points)
                and self.simplices == other.simplices)

    def compact(self) -> "Complex":
        """Drop vertex rows that no simplex references, renumbering ids."""
        used = self.vertex_ids
        remap = {v: i for i, v in enumerate(used)}
        return Complex(self.points[list(used)],
                       [tuple(remap[v] for v in s) for s in self.simplices])

    def __repr__(self) -> str:
        return (f"Complex(ambient={self.ambient_dim}, vertices={len(self.points)}, "
                f"top_simplices={len(self.simplices)}, dim={self.dim})")


@dataclass(frozen=True, eq=False)
class SubcomplexRef:
    parent: Complex
    members: frozenset[Simplex] = field(default_factory=frozenset)

    @classmethod
    def closure(cls, parent: Complex, simplices: Iterable[Simplex]) -> "SubcomplexRef":
        out: set[Simplex] = set()
        for s in simplices:
            out.update(faces_of(tuple(sorted(s))))
        return cls(parent, frozenset(out))

    @cached_property
    def vertices(self) -> frozenset[int]:
        return frozenset(v for s in self.members for v in s)

    @cached_property
    def top(self) -> tuple[Simplex, ...]:
        return maximal_simplices(self.members)

    def as_complex(self) -> Complex:
        return Complex(self.parent.points, self.top)

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class Violation:
    kind: str
    simplices: tuple[Simplex, ...]
    detail: str = ""


# ---------------------------------------------------------------------------
# pairwise intersection tests
# ---------------------------------------------------------------------------

def _separated_by_facet(A: np.ndarray, B: np.ndarray, shared_a: list[int],
                        shared_b: list[int], tol: float) -> bool:
    """Exact sufficient test that ``conv(A) ∩ conv(B)`` is the shared face.

    Looks for a facet hyperplane of either (full-dimensional) simplex that
    contains every shared vertex and has all other vertices of the opposite
    simplex strictly outside.
    """
    for X, Y, sx, sy in ((A, B, shared_a, shared_b), (B, A, shared_b, shared_a)):
        G, h = simplex_halfspaces(X)
        others = [i for i in range(len(Y)) if i not in sy]
        for j in range(len(X)):
            # facet j is opposite vertex j; it must contain the shared vertices
            if j in sx:
                continue
            if not others:
                return True
            dist = Y[others] @ G[j] - h[j]
            if np.all(dist > tol):
                return True
    return False


def _lp_excess(A: np.ndarray, B: np.ndarray, shared_a: list[int]) -> float | None:
    """Max barycentric weight on non-shared vertices of ``A`` over ``A ∩ B``.

    ``None`` when the simplices are disjoint.
    """
    na, nb = len(A), len(B)
    N = A.shape[1]
    # barycentric weights are affine invariant; centre and scale for HiGHS
    o = np.vstack([A, B]).mean(axis=0)
    scale = max(float(np.abs(np.vstack([A, B]) - o).max()), 1e-300)
    A, B = (A - o) / scale, (B - o) / scale
    A_eq = np.zeros((N + 2, na + nb))
    A_eq[:N, :na] = A.T
    A_eq[:N, na:] = -B.T
    A_eq[N, :na] = 1.0
    A_eq[N + 1, na:] = 1.0
    b_eq = np.zeros(N + 2)
    b_eq[N] = b_eq[N + 1] = 1.0
    c = np.zeros(na + nb)
    for i in range(na):
        if i not in shared_a:
            c[i] = -1.0
    res = linprog(c, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status == 4:
        # ill-conditioned slivers: settle disjointness with the (always feasible) distance LP
        if _linf_gap(A, B) > 1e-12:
            return None
        res = linprog(c, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs-ipm")
    if res.status == 2:
        return None
    if res.status != 0:
        raise ComplexError(f"intersection LP failed: {res.message}")
    return float(-res.fun)


def _linf_gap(A: np.ndarray, B: np.ndarray) -> float:
    """Max-norm distance between ``conv(A)`` and ``conv(B)`` (scaled coordinates)."""
    na, nb = len(A), len(B)
    N = A.shape[1]
    D = np.hstack([A.T, -B.T])
    ones = np.ones((N, 1))
    A_ub = np.vstack([np.hstack([D, -ones]), np.hstack([-D, -ones])])
    A_eq = np.zeros((2, na + nb + 1))
    A_eq[0, :na] = 1.0
    A_eq[1, na:na + nb] = 1.0
    c = np.zeros(na + nb + 1)
    c[-1] = 1.0
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(2 * N), A_eq=A_eq, b_eq=np.ones(2),
                  bounds=(0, None), method="highs")
    if res.status != 0:
        raise ComplexError(f"distance LP failed: {res.message}")
    return float(res.fun)


def proper_intersection(A: np.ndarray, B: np.ndarray, shared_a: list[int],
                        shared_b: list[int], tol: float = DEFAULT_TOL) -> bool:
    """True iff ``conv(A) ∩ conv(B)`` equals the hull of the shared vertices."""
    N = A.shape[1]
    if len(A) == N + 1 and len(B) == N + 1:
        if _separated_by_facet(A, B, shared_a, shared_b, tol):
            return True
    excess = _lp_excess(A, B, shared_a)
    if excess is None or excess <= tol:
        return True
    # an extra intersection point weighs on non-shared vertices of both simplices,
    # so the better conditioned side decides (barycentrics on slivers are noisy)
    other = _lp_excess(B, A, shared_b)
    return other is None or other <= tol


def _bbox_pairs(boxes_a: np.ndarray, boxes_b: np.ndarray, tol: float,
                same: bool) -> list[tuple[int, int]]:
    lo_a, hi_a = boxes_a[:, 0], boxes_a[:, 1]
    lo_b, hi_b = boxes_b[:, 0], boxes_b[:, 1]
    pairs = []
    for i in range(len(boxes_a)):
        ok = np.all((lo_b <= hi_a[i] + tol) & (hi_b >= lo_a[i] - tol), axis=1)
        idx = np.nonzero(ok)[0]
        if same:
            idx = idx[idx > i]
        pairs.extend((i, int(j)) for j in idx)
    return pairs


def _boxes(c: Complex) -> np.ndarray:
    if not c.simplices:
        return np.zeros((0, 2, c.ambient_dim))
    return np.array([[c.coords(s).min(axis=0), c.coords(s).max(axis=0)]
                     for s in c.simplices])


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def validate(c: Complex, tol: float = DEFAULT_TOL) -> list[Violation]:
    """Check every Complex invariant; an empty list means valid."""
    report: list[Violation] = []
    pts = c.points
    if not np.all(np.isfinite(pts)):
        report.append(Violation("non_finite", (), "vertex coordinates must be finite"))
        return report
    nv = len(pts)
    for s in c.simplices:
        if len(set(s)) != len(s):
            report.append(Violation("repeated_vertex", (s,)))
        if any(v < 0 or v >= nv for v in s):
            report.append(Violation("unknown_vertex", (s,)))
    if report:
        return report
    N = c.ambient_dim
    for s in c.simplices:
        k = len(s) - 1
        if k > N:
            report.append(Violation("dimension", (s,), f"{k}-simplex in R^{N}"))
        elif k > 0 and affine_rank(c.coords(s), tol) < k:
            report.append(Violation("degenerate", (s,), "zero k-volume"))
    if report:
        return report
    boxes = _boxes(c)
    for i, j in _bbox_pairs(boxes, boxes, tol, same=True):
        s, t = c.simplices[i], c.simplices[j]
        shared = sorted(set(s) & set(t))
        sa = [s.index(v) for v in shared]
        sb = [t.index(v) for v in shared]
        try:
            proper = proper_intersection(c.coords(s), c.coords(t), sa, sb, tol)
        except ComplexError as e:
            report.append(Violation("undecided", (s, t), str(e)))
            continue
        if not proper:
            report.append(Violation("face_to_face", (s, t),
                                    "intersection is not a common face"))
    return report


def is_full_subcomplex(L: SubcomplexRef) -> bool:
    """Every simplex of the parent meets ``|L|`` in one of its faces or not at all."""
    parent_faces = L.parent.faces
    stray = [s for s in L.members if s not in parent_faces]
    if stray:
        raise ComplexError(f"simplex {stray[0]} is not in the parent complex")
    verts = L.vertices
    for s in L.parent.simplices:
        w = tuple(v for v in s if v in verts)
        if w and w not in L.members:
            return False
    return True


def match_vertices(c1: Complex, c2: Complex, tol: float = DEFAULT_TOL) -> dict[int, int]:
    """Map vertex ids of ``c1`` onto coincident vertex ids of ``c2``."""
    if not len(c1.points) or not len(c2.points):
        return {}
    tree = cKDTree(c2.points)
    used = c1.vertex_ids
    dist, idx = tree.query(c1.points[list(used)])
    return {v: int(j) for v, d, j in zip(used, dist, idx) if d <= tol}


def intersect_in_subcomplex(c1: Complex, c2: Complex, tol: float = DEFAULT_TOL):
    """Shared subcomplexes carrying ``|c1| ∩ |c2|`` plus the simplex bijection.

    Returns ``(L1, L2, iso)`` or ``None`` when the overlap is not a common
    subcomplex.
    """
    if c1.ambient_dim != c2.ambient_dim:
        raise ComplexError("ambient dimensions differ")
    m12 = match_vertices(c1, c2, tol)
    c2_faces = c2.faces
    iso: dict[Simplex, Simplex] = {}
    for s in c1.faces:
        if all(v in m12 for v in s):
            t = tuple(sorted(m12[v] for v in s))
            if t in c2_faces:
                iso[s] = t
    for i, j in _bbox_pairs(_boxes(c1), _boxes(c2), tol, same=False):
        s, t = c1.simplices[i], c2.simplices[j]
        tset = set(t)
        shared = [v for v in s if v in m12 and m12[v] in tset]
        if shared and tuple(shared) not in iso:
            return None
        sa = [s.index(v) for v in shared]
        sb = [t.index(m12[v]) for v in shared]
        if not proper_intersection(c1.coords(s), c2.coords(t), sa, sb, tol):
            return None
    L1 = SubcomplexRef(c1, frozenset(iso))
    L2 = SubcomplexRef(c2, frozenset(iso.values()))
    return L1, L2, iso


def union_of_complexes(c1: Complex, c2: Complex, correspondence) -> Complex:
    """Glue two complexes along a shared full subcomplex.

    ``correspondence`` is the triple returned by :func:`intersect_in_subcomplex`.
    Vertices of ``c1`` keep their ids; unmatched vertices of ``c2`` are
    appended in id order.
    """
    if correspondence is None:
        raise ComplexError("complexes do not intersect in a subcomplex")
    L1, L2, iso = correspondence
    if not (is_full_subcomplex(L1) and is_full_subcomplex(L2)):
        raise ComplexError("shared subcomplex is not full in both complexes")
    vmap: dict[int, int] = {}
    for s, t in iso.items():
        if len(s) == 1:
            vmap[t[0]] = s[0]
    extra = [v for v in c2.vertex_ids if v not in vmap]
    base = len(c1.points)
    for i, v in enumerate(extra):
        vmap[v] = base + i
    points = np.vstack([c1.points, c2.points[extra]]) if extra else c1.points
    simplices = list(c1.simplices) + [tuple(vmap[v] for v in t) for t in c2.simplices]
    return Complex(points, simplices)


def star(c: Complex, v: int) -> SubcomplexRef:
    if v not in set(c.vertex_ids):
        raise ComplexError(f"unknown vertex id {v}")
    return SubcomplexRef.closure(c, [s for s in c.simplices if v in s])


def boundary_of_star(c: Complex, v: int) -> SubcomplexRef:
    st = star(c, v)
    return SubcomplexRef(c, frozenset(s for s in st.members if v not in s))

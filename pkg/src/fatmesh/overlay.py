"""Common refinement of two triangulations across an overlap band.

Each input is split into a kept part ``R`` (left untouched unless one of
its faces gets cut) and an active part ``A``.  The output consists of

* the simplices of ``R1`` and ``R2``,
* the convex cells ``F ∩ G`` for top simplices ``F`` of ``A1`` and ``G`` of
  ``A2``,
* the pieces of ``A1`` outside ``|K2|`` (and of ``A2`` outside ``|K1|``),
  cut along the radial frusta ``{p + sum nu_i (h_i - p) : nu >= 0,
  sum nu >= 1}`` over the boundary facets ``h`` of the other complex.

Every non-simplex cell is triangulated by coning from its Chebyshev centre
over its triangulated facets; kept simplices one of whose faces was cut are
coned the same way.

A vertex is identified by its carriers: the smallest face (or exterior
frustum) of each input containing it, read off from the constraints that are
tight there.  No coordinate snapping is involved, so neighbouring cells
agree on shared faces as long as the inputs are in general position.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .cells import chebyshev_center, face_lattice
from .complex import Complex, ComplexError, Simplex, faces_of
from .geometry import DEFAULT_TOL, affine_rank, barycentric_map, flat_polytope

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# carriers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Carrier:
    """A closed face ``("F", side, ids)`` or exterior frustum ``("E", side, ids)``.

    ``P`` spans the affine hull, ``B`` holds one constraint row per vertex
    (plus the ``sum nu >= 1`` row for frusta), acting on ``[x, 1]``.
    """
    kind: str
    side: int
    ids: tuple[int, ...]
    P: np.ndarray = field(repr=False, compare=False)
    B: np.ndarray = field(repr=False, compare=False)

    @property
    def key(self) -> tuple:
        return (self.kind, self.side, self.ids)

    def sub_key(self, tight: np.ndarray) -> tuple:
        rest = tuple(v for v, t in zip(self.ids, tight) if not t)
        if self.kind == "F":
            return ("F", self.side, rest)
        return ("F" if tight[-1] else "E", self.side, rest)


def face_carrier(points: np.ndarray, ids: Simplex, side: int) -> Carrier:
    P = points[list(ids)]
    return Carrier("F", side, tuple(ids), P, barycentric_map(P))


def exterior_carrier(points: np.ndarray, ids: Simplex, side: int, center: np.ndarray) -> Carrier:
    """Frustum of points seen from ``center`` beyond the face ``ids``."""
    V = points[list(ids)]
    H = (V - center).T
    Hp = np.linalg.pinv(H)
    rows = np.hstack([Hp, -(Hp @ center)[:, None]])
    total = rows.sum(axis=0)
    total[-1] -= 1.0
    return Carrier("E", side, tuple(ids), np.vstack([center, V]), np.vstack([rows, total]))


def boundary_facets(K: Complex) -> list[tuple[Simplex, Simplex]]:
    """``(facet, owner)`` for codimension-1 faces with a single top simplex."""
    n = K.dim
    return sorted((f, owners[0]) for f, owners in K.facet_adjacency.items()
                  if len(owners) == 1 and len(f) == n)


def star_center_ok(K: Complex, center: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    """True when every boundary facet faces away from ``center``."""
    for f, owner in boundary_facets(K):
        F = K.coords(f)
        opp = K.points[[v for v in owner if v not in f][0]]
        _, _, vt = np.linalg.svd(F[1:] - F[0]) if len(F) > 1 else (None, None, np.eye(len(center)))
        normal = vt[-1]
        a = normal @ (center - F[0])
        b = normal @ (opp - F[0])
        scale = float(np.ptp(F, axis=0).max()) if len(F) > 1 else 1.0
        if a * b <= 0 or abs(a) <= 1e3 * tol * max(scale, 1.0):
            return False
    return True


def _separated(B: np.ndarray, V: np.ndarray, tol: float) -> np.ndarray:
    """For carrier rows ``B`` and simplices ``V`` (t, k+1, n): True where some
    row is violated by every vertex of the simplex."""
    if len(V) == 0:
        return np.zeros(0, dtype=bool)
    Vh = np.concatenate([V, np.ones(V.shape[:2] + (1,))], axis=2)
    vals = np.einsum("rj,tkj->trk", B, Vh).max(axis=2)
    return np.any(vals < -tol * np.linalg.norm(B, axis=1)[None, :], axis=1)


# ---------------------------------------------------------------------------
# the refinement
# ---------------------------------------------------------------------------

@dataclass
class CellRecord:
    dim: int
    facets: frozenset
    c1: tuple | None
    c2: tuple | None


@dataclass
class OverlayOutput:
    complex: Complex
    kept1: frozenset[Simplex]
    kept2: dict[Simplex, Simplex]
    overlay_cells: int
    coned: int
    vertex_keys: list


class Overlay:
    """Registry of cells produced by intersecting carriers of the two sides."""

    def __init__(self, K1: Complex, K2: Complex, tol: float = DEFAULT_TOL):
        if K1.ambient_dim != K2.ambient_dim:
            raise ComplexError("ambient mismatch")
        self.K = {1: K1, 2: K2}
        self.n = K1.ambient_dim
        self.tol = tol
        self.cells: dict[frozenset, CellRecord] = {}
        self.coords: dict[tuple, np.ndarray] = {}
        self.order: list[tuple] = []

    def _vertex_key(self, c1: tuple, c2: tuple) -> tuple:
        if c1[0] == "F" and len(c1[2]) == 1:
            return ("V", 1, c1[2][0])
        if c2[0] == "F" and len(c2[2]) == 1:
            return ("V", 2, c2[2][0])
        return ("X", c1, c2)

    def _coord(self, key: tuple, fallback: np.ndarray) -> None:
        if key in self.coords:
            return
        if key[0] == "V":
            self.coords[key] = self.K[key[1]].points[key[2]].copy()
        else:
            self.coords[key] = np.array(fallback, dtype=float)
        self.order.append(key)

    def intersect(self, a: Carrier, b: Carrier, want_dim: int) -> list[frozenset]:
        """Register the lattice of ``a ∩ b``; return its key when it has
        dimension ``want_dim`` (else an empty list)."""
        poly = flat_polytope(a.P, a.B, b.P, b.B, self.tol)
        if poly is None:
            return []
        verts, tight = poly
        if len(verts) <= want_dim or affine_rank(verts, self.tol) < want_dim:
            return []
        r = len(a.B)
        t1, t2 = tight[:, :r], tight[:, r:]
        vkeys = []
        for i in range(len(verts)):
            k = self._vertex_key(a.sub_key(t1[i]), b.sub_key(t2[i]))
            self._coord(k, verts[i])
            vkeys.append(k)
        if len(set(vkeys)) != len(vkeys):
            raise ComplexError("coincident vertices in an overlay cell; inputs are "
                               "not in general position")
        lattice = face_lattice(verts, tight, self.tol)
        gkey = {f: frozenset(vkeys[i] for i in f) for f in lattice}
        for f, d in lattice.items():
            g = gkey[f]
            if g in self.cells:
                continue
            idx = sorted(f)
            facets = frozenset(gkey[e] for e, de in lattice.items() if de == d - 1 and e < f)
            self.cells[g] = CellRecord(d, facets, a.sub_key(t1[idx].all(axis=0)),
                                       b.sub_key(t2[idx].all(axis=0)))
        full = frozenset(range(len(verts)))
        return [gkey[full]] if lattice[full] == want_dim else []


def _center_of(K: Complex) -> np.ndarray:
    return K.points[list(K.vertex_ids)].mean(axis=0)


def overlay_merge(K1: Complex, keep1, K2: Complex, keep2, tol: float = DEFAULT_TOL,
                  center1=None, center2=None, exterior: bool = True) -> OverlayOutput:
    """Refine ``K1`` and ``K2`` across their active parts into one complex.

    ``keep1``/``keep2`` are the top simplices left in place; they must not
    overlap each other.  With ``exterior=False`` no frustum pieces are built,
    which is only correct when each active part lies inside the other
    complex.  Output vertex ids: ``K1`` rows first (unchanged ids),
    then used ``K2`` vertices in id order, then new points in creation order.
    """
    n = K1.ambient_dim
    if K1.dim != n or K2.dim != n:
        raise ComplexError("overlay needs full-dimensional complexes")
    keep1 = frozenset(keep1)
    keep2 = frozenset(keep2)
    A1 = [s for s in K1.simplices if s not in keep1]
    A2 = [s for s in K2.simplices if s not in keep2]
    ov = Overlay(K1, K2, tol)

    ext: dict[int, list[Carrier]] = {}
    for side, K, c in ((1, K1, center1), (2, K2, center2)):
        c = _center_of(K) if c is None else np.asarray(c, dtype=float)
        if not exterior:
            ext[side] = []
        elif star_center_ok(K, c, tol):
            ext[side] = [exterior_carrier(K.points, f, side, c)
                         for f, _ in boundary_facets(K)]
        else:
            logger.warning("complex %d is not star-shaped about %s; exterior pieces skipped",
                           side, c)
            ext[side] = []
    tops1 = [face_carrier(K1.points, s, 1) for s in A1] + ext[1]
    tops2 = [face_carrier(K2.points, s, 2) for s in A2] + ext[2]

    def simplex_verts(K, S):
        return np.array([K.coords(s) for s in S]) if S else np.zeros((0, n + 1, n))

    V1 = simplex_verts(K1, A1)
    V2 = simplex_verts(K2, A2)

    def candidates(carrier, others_simplices, others_V, others_ext, own_V_row):
        """Indices into the other side's tops that may meet ``carrier``."""
        sep = _separated(carrier.B, others_V, tol)
        out = []
        for j, s in enumerate(others_simplices):
            if sep[j]:
                continue
            if carrier.kind == "F":
                Bo = face_carrier(others_V[j], tuple(range(n + 1)), 0).B
                if _separated(Bo, own_V_row, tol)[0]:
                    continue
            out.append(j)
        if carrier.kind == "F":
            for j, e in enumerate(others_ext):
                if not _separated(e.B, own_V_row, tol)[0]:
                    out.append(len(others_simplices) + j)
        return out

    top_cells = []
    for i, a in enumerate(tops1):
        own = a.P[None] if a.kind == "F" else None
        for j in candidates(a, A2, V2, ext[2], own):
            top_cells += ov.intersect(a, tops2[j], n)

    pieces: dict[int, dict[Simplex, list[frozenset]]] = {1: {}, 2: {}}
    kept_faces = {}
    for side, kept in ((1, keep1), (2, keep2)):
        kept_faces[side] = {f for s in kept for f in faces_of(s)}

    def tile_round(side: int) -> bool:
        """Tile kept faces touched by registered cells; True if any was new."""
        K = ov.K[side]
        other_S, other_V = (A2, V2) if side == 1 else (A1, V1)
        other_tops = tops2 if side == 1 else tops1
        other_ext = ext[2] if side == 1 else ext[1]
        attr = "c1" if side == 1 else "c2"
        touched = set()
        for rec in ov.cells.values():
            c = getattr(rec, attr)
            if c is not None and c[0] == "F" and c[2] in kept_faces[side]:
                touched.add(c[2])
        todo = sorted(touched - pieces[side].keys(), key=lambda f: (-len(f), f))
        for f in todo:
            k = len(f) - 1
            if k == 0:
                pieces[side][f] = [frozenset([("V", side, f[0])])]
                continue
            car = face_carrier(K.points, f, side)
            got = []
            for j in candidates(car, other_S, other_V, other_ext, car.P[None]):
                if side == 1:
                    got += ov.intersect(car, other_tops[j], k)
                else:
                    got += ov.intersect(other_tops[j], car, k)
            pieces[side][f] = sorted(set(got), key=_cell_sort_key)
        return bool(todo)

    while tile_round(1) | tile_round(2):
        pass

    return _assemble(ov, K1, keep1, K2, keep2, sorted(set(top_cells), key=_cell_sort_key),
                     pieces[1], pieces[2], tol)


def _cell_sort_key(c: frozenset):
    return sorted(repr(k) for k in c)


def _assemble(ov: Overlay, K1, keep1, K2, keep2, top_cells, pieces1, pieces2, tol
              ) -> OverlayOutput:
    coned = 0
    memo: dict = {}
    centers = 0

    def add_center(key, pts: np.ndarray, full, facet_sets):
        nonlocal centers
        ck = ("C", key)
        if ck not in ov.coords:
            p, _ = chebyshev_center(pts, full, facet_sets, tol)
            ov.coords[ck] = p
            ov.order.append(ck)
            centers += 1
        return ck

    def tri_cell(g: frozenset) -> list[frozenset]:
        if g in memo:
            return memo[g]
        rec = ov.cells[g]
        if rec.dim == 0 or len(g) == rec.dim + 1:
            out = [g]
        else:
            keys = sorted(g, key=repr)
            pts = np.array([ov.coords[k] for k in keys])
            pos = {k: i for i, k in enumerate(keys)}
            facet_sets = [frozenset(pos[k] for k in f) for f in rec.facets]
            ck = add_center(g, pts, frozenset(range(len(keys))), facet_sets)
            out = [t | {ck} for f in sorted(rec.facets, key=_cell_sort_key) for t in tri_cell(f)]
        memo[g] = out
        return out

    def tri_face(side: int, f: Simplex, pieces) -> list[frozenset]:
        mk = ("F", side, f)
        if mk in memo:
            return memo[mk]
        own = frozenset(("V", side, v) for v in f)
        if pieces.get(f):
            out = [t for p in pieces[f] for t in tri_cell(p)]
        elif len(f) == 1:
            out = [own]
        else:
            subs = [tri_face(side, g, pieces) for g in faces_of(f) if len(g) == len(f) - 1]
            trivial = all(len(s) == 1 and s[0] == frozenset(("V", side, v) for v in g)
                          for s, g in zip(subs, [g for g in faces_of(f) if len(g) == len(f) - 1]))
            if trivial:
                out = [own]
            else:
                K = ov.K[side]
                pts = K.coords(f)
                facet_sets = [frozenset(set(range(len(f))) - {i}) for i in range(len(f))]
                ck = add_center(mk, pts, frozenset(range(len(f))), facet_sets)
                out = [t | {ck} for s in subs for t in s]
        memo[mk] = out
        return out

    simplices_keys: list[frozenset] = []
    untouched1, untouched2 = [], []
    for s in sorted(keep1):
        t = tri_face(1, s, pieces1)
        if len(t) > 1 or t[0] != frozenset(("V", 1, v) for v in s):
            coned += 1
        else:
            untouched1.append(s)
        simplices_keys += t
    for s in sorted(keep2):
        t = tri_face(2, s, pieces2)
        if len(t) > 1 or t[0] != frozenset(("V", 2, v) for v in s):
            coned += 1
        else:
            untouched2.append(s)
        simplices_keys += t
    for g in top_cells:
        simplices_keys += tri_cell(g)

    # vertex numbering
    used = {k for s in simplices_keys for k in s}
    nv1 = len(K1.points)
    ids: dict[tuple, int] = {("V", 1, v): v for v in range(nv1)}
    rows = [K1.points]
    k2_used = sorted(k[2] for k in used if k[0] == "V" and k[1] == 2)
    for w in k2_used:
        ids[("V", 2, w)] = len(ids)
    if k2_used:
        rows.append(K2.points[k2_used])
    new = [k for k in ov.order if k in used and k[0] in ("X", "C")]
    for k in new:
        ids[k] = len(ids)
    if new:
        rows.append(np.array([ov.coords[k] for k in new]))
    points = np.vstack(rows)
    simplices = [tuple(sorted(ids[k] for k in s)) for s in simplices_keys]
    merged = Complex(points, simplices)
    kept2 = {s: tuple(sorted(ids[("V", 2, v)] for v in s)) for s in untouched2}
    return OverlayOutput(merged, frozenset(untouched1), kept2, len(top_cells), coned,
                         sorted(ids, key=ids.get))

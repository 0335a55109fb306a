"""Merging two fat triangulations across their overlap.

Pipeline of :func:`merge_fat_triangulations`:

1. split both complexes by a level band ``cut1 < cut2`` of a linear or
   radial level function: ``K1`` keeps the simplices entirely below
   ``cut1``, ``K2`` those entirely above ``cut2``;
2. move the vertices of the active part of ``K1`` skeleton by skeleton
   (vertices, then edges, ...) inside the caps of the displacement schedule
   until every processed face is transverse to ``K2``;
3. refine the active parts against each other (:mod:`fatmesh.overlay`),
   subdividing cells by Chebyshev cones.

The second complex never moves.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from statistics import median

import numpy as np
from scipy.spatial import cKDTree

from .complex import Complex, ComplexError, Simplex, SubcomplexRef, faces_of, validate
from .geometry import DEFAULT_TOL, simplex_distance
from .metrics import FatnessReport, batch_fatness, complex_fatness, simplex_diameter
from .overlay import overlay_merge
from .transversal import (DisplacementSchedule, PerturbationFailure, TransversalityConfig,
                          complex_margin, default_eta1, displacement_schedule,
                          neighbourhood_faces, perturb_vertex_for_transversality)

logger = logging.getLogger(__name__)


class MergeError(ComplexError):
    """Merge failure; carries the partial transcript and diagnostics."""

    def __init__(self, message: str, transcript=(), details: dict | None = None, result=None):
        super().__init__(message)
        self.transcript = list(transcript)
        self.details = details or {}
        self.result = result


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OverlapRegions:
    L1: SubcomplexRef
    L2: SubcomplexRef
    M1: SubcomplexRef
    M2: SubcomplexRef


def _tops_in_ball(c: Complex, v0: np.ndarray, eps: float):
    far = np.array([np.linalg.norm(c.coords(s) - v0, axis=1).max() for s in c.simplices])
    return far


def select_overlap_regions(c1: Complex, c2: Complex, v0, eps: float, d1: float, d2: float
                           ) -> OverlapRegions:
    """Ball-distance rules around ``v0``.

    ``L2``: top simplices of ``c2`` inside ``B_eps(v0)`` whose distance to the
    sphere lies in ``[d1, d2]``; ``M2``: top simplices inside the ball meeting
    ``|L2|``; ``L1``: top simplices of ``c1`` inside the ball within ``d2``
    of ``|L2|``; ``M1``: top simplices inside the ball meeting ``|L1|``.
    Each region is the closure of its top simplices.
    """
    v0 = np.asarray(v0, dtype=float)
    if c1.ambient_dim != c2.ambient_dim or len(v0) != c1.ambient_dim:
        raise ComplexError("ambient mismatch")
    if eps <= 0 or d1 < 0 or d2 < d1:
        raise ComplexError("need eps > 0 and 0 <= d1 <= d2")
    far2 = _tops_in_ball(c2, v0, eps)
    inside2 = [s for s, f in zip(c2.simplices, far2) if f < eps]
    L2 = [s for s, f in zip(c2.simplices, far2) if f < eps and d1 <= eps - f <= d2]
    if not L2:
        raise ComplexError(f"no simplex of the second complex lies in B({v0.tolist()}, {eps}) "
                           f"at distance [{d1}, {d2}] from its boundary")
    L2v = {v for s in L2 for v in s}
    M2 = [s for s in inside2 if L2v & set(s) or _meets(c2, s, L2)]
    far1 = _tops_in_ball(c1, v0, eps)
    inside1 = [s for s, f in zip(c1.simplices, far1) if f < eps]
    L1 = [s for s in inside1
          if min(simplex_distance(c1.coords(s), c2.coords(t)) for t in L2) <= d2]
    if not L1:
        raise ComplexError("empty overlap: no simplex of the first complex near L2")
    L1v = {v for s in L1 for v in s}
    M1 = [s for s in inside1 if L1v & set(s)]
    return OverlapRegions(SubcomplexRef.closure(c1, L1), SubcomplexRef.closure(c2, L2),
                          SubcomplexRef.closure(c1, M1), SubcomplexRef.closure(c2, M2))


def _meets(c: Complex, s: Simplex, group) -> bool:
    return any(simplex_distance(c.coords(s), c.coords(t)) <= DEFAULT_TOL for t in group)


@dataclass(frozen=True)
class Band:
    """Level band ``cut1 < cut2`` of ``sign * u.(x - origin)`` (or of
    ``sign * |x - origin|`` when ``direction`` is ``None``)."""
    origin: tuple[float, ...]
    direction: tuple[float, ...] | None
    cut1: float
    cut2: float
    sign: float = 1.0

    def __post_init__(self):
        if not self.cut1 < self.cut2:
            raise ComplexError("band needs cut1 < cut2")

    def level(self, X: np.ndarray) -> np.ndarray:
        d = np.asarray(X, dtype=float) - np.asarray(self.origin)
        if self.direction is None:
            return self.sign * np.linalg.norm(d, axis=-1)
        return self.sign * d @ np.asarray(self.direction)

    def split(self, c1: Complex, c2: Complex):
        l1, l2 = self.level(c1.points), self.level(c2.points)
        keep1 = [s for s in c1.simplices if l1[list(s)].max() <= self.cut1]
        keep2 = [s for s in c2.simplices if l2[list(s)].min() >= self.cut2]
        return keep1, keep2

    def to_dict(self) -> dict:
        return {"origin": list(self.origin),
                "direction": None if self.direction is None else list(self.direction),
                "cut1": self.cut1, "cut2": self.cut2, "sign": self.sign}


def default_band(c1: Complex, c2: Complex, position: float = 0.5, width: float = 1.0) -> Band:
    """Linear band across the overlap, normal to the line joining the two
    vertex centroids.  ``position`` in (0, 1) places the band in the common
    level range; ``width`` is measured in median simplex diameters."""
    g1 = c1.points[list(c1.vertex_ids)].mean(axis=0)
    g2 = c2.points[list(c2.vertex_ids)].mean(axis=0)
    u = g2 - g1
    if np.linalg.norm(u) < 1e-12:
        u = np.eye(c1.ambient_dim)[0]
    u = u / np.linalg.norm(u)
    l1 = (c1.points[list(c1.vertex_ids)] - g1) @ u
    l2 = (c2.points[list(c2.vertex_ids)] - g1) @ u
    lo, hi = max(l1.min(), l2.min()), min(l1.max(), l2.max())
    if hi <= lo:
        raise ComplexError("empty overlap: the two complexes do not overlap")
    h = 0.5 * width * _median_diameter(c1)
    mid = lo + position * (hi - lo)
    return Band(tuple(g1.tolist()), tuple(u.tolist()), mid - h, mid + h)


def choose_band(c1: Complex, c2: Complex, candidates: int = 5, tol: float = DEFAULT_TOL
                ) -> Band:
    """Default band whose unperturbed refinement is fattest among
    ``candidates`` evenly spaced positions."""
    if candidates <= 1:
        return default_band(c1, c2)
    best = None
    for pos in np.linspace(0.25, 0.75, candidates):
        band = default_band(c1, c2, float(pos))
        keep1, keep2 = band.split(c1, c2)
        try:
            phi = complex_fatness(overlay_merge(c1, keep1, c2, keep2, tol).complex).complex_min
        except ComplexError:
            continue
        if best is None or phi > best[0]:
            best = (phi, band)
    if best is None:
        return default_band(c1, c2)
    return best[1]


def boundary_vertices(c: Complex) -> set[int]:
    n = c.dim
    return {v for f, owners in c.facet_adjacency.items() if len(owners) == 1 and len(f) == n
            for v in f}


def _median_diameter(c: Complex) -> float:
    return float(median(simplex_diameter(c.coords(s)) for s in c.simplices))


# ---------------------------------------------------------------------------
# merge
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MergeConfig:
    fatness_fraction: float = 0.25
    seed: int = 0
    band: Band | None = None
    pinned: frozenset = frozenset()
    budget: int = 1024
    pool: int | None = 8
    pin_boundary: bool = True
    band_candidates: int = 5
    eta1: float | None = None
    check_fatness: bool = True
    tol: float = DEFAULT_TOL
    center1: tuple | None = None
    center2: tuple | None = None
    exterior: bool = True
    phi_reference: float | None = None

    def __post_init__(self):
        if not 0 < self.fatness_fraction <= 1:
            raise ComplexError("fatness_fraction must lie in (0, 1]")


@dataclass(frozen=True)
class MoveRecord:
    stage: int
    vertex: int
    old: tuple[float, ...]
    new: tuple[float, ...]
    displacement: float
    cap: float
    margin: float
    trials: int

    def to_json(self) -> str:
        return json.dumps({"stage": self.stage, "vertex": self.vertex, "old": list(self.old),
                           "new": list(self.new), "displacement": self.displacement,
                           "cap": self.cap, "margin": self.margin, "trials": self.trials},
                          sort_keys=True)


@dataclass
class MergeResult:
    merged: Complex
    changed_region: SubcomplexRef
    fatness_before: tuple[FatnessReport, FatnessReport]
    fatness_after: FatnessReport
    schedule_used: DisplacementSchedule | None
    transcript: list[MoveRecord]
    vertex_map2: dict[int, int] = field(default_factory=dict)
    stage_margins: list[float] = field(default_factory=list)
    band: Band | None = None

    @property
    def phi0(self) -> float:
        return min(r.complex_min for r in self.fatness_before)

    def transcript_jsonl(self) -> str:
        return "".join(m.to_json() + "\n" for m in self.transcript)


def _absorbed(c1: Complex, c2: Complex, tol: float) -> dict[int, int] | None:
    """Vertex map when every simplex of ``c2`` is already a simplex of ``c1``."""
    tree = cKDTree(c1.points)
    dist, idx = tree.query(c2.points[list(c2.vertex_ids)])
    if np.any(dist > tol):
        return None
    vmap = dict(zip(c2.vertex_ids, (int(i) for i in idx)))
    faces1 = c1.faces
    for s in c2.simplices:
        if tuple(sorted(vmap[v] for v in s)) not in faces1:
            return None
    return vmap


def _movable(c1: Complex, active1, c2: Complex, reach: float, pinned) -> list[int]:
    """Unpinned vertices near ``c2`` of the active part and of the simplices
    touching it (a kept vertex lying on ``c2`` would otherwise block the
    stars of its active neighbours)."""
    core = {v for s in active1 for v in s}
    ring = {v for s in c1.simplices if core.intersection(s) for v in s}
    verts = sorted(ring - set(pinned))
    if not verts:
        return []
    tree = cKDTree(c2.points[list(c2.vertex_ids)])
    near = tree.query_ball_point(c1.points[verts], reach)
    return [v for v, hits in zip(verts, near) if hits]


def merge_fat_triangulations(c1: Complex, c2: Complex, cfg: MergeConfig | None = None
                             ) -> MergeResult:
    """One triangulation of ``|c1| ∪ |c2|`` equal to ``c1`` below the band and
    to ``c2`` above it (see the module docstring for the stages)."""
    cfg = cfg or MergeConfig()
    if c1.ambient_dim != c2.ambient_dim:
        raise ComplexError("ambient mismatch")
    n = c1.ambient_dim
    for name, c in (("first", c1), ("second", c2)):
        if c.dim != n:
            raise ComplexError(f"{name} complex is not full-dimensional")
        bad = validate(c, cfg.tol)
        if bad:
            raise ComplexError(f"{name} complex is invalid: {bad[0]}")
    before = (complex_fatness(c1), complex_fatness(c2))
    phi0 = min(r.complex_min for r in before)
    vmap = _absorbed(c1, c2, 1e3 * cfg.tol)
    if vmap is not None:
        return MergeResult(c1, SubcomplexRef(c1), before, before[0], None, [], vmap, [], None)

    band = cfg.band or choose_band(c1, c2, cfg.band_candidates, cfg.tol)
    keep1, keep2 = band.split(c1, c2)
    keep1s = set(keep1)
    active1 = [s for s in c1.simplices if s not in keep1s]
    if not active1 or len(keep2) == len(c2.simplices):
        raise ComplexError("empty overlap: the band leaves nothing to merge")

    d1 = float(median(simplex_diameter(c1.coords(s)) for s in active1))
    d2 = _median_diameter(c2)
    eta1 = cfg.eta1 if cfg.eta1 is not None else default_eta1(c1, c2)
    schedule = displacement_schedule(phi0, d1, n)
    pinned = set(cfg.pinned)
    if cfg.pin_boundary:
        pinned |= boundary_vertices(c1)
    movers = _movable(c1, active1, c2, d1 + d2, pinned)

    X1 = np.array(c1.points, dtype=float)
    transcript: list[MoveRecord] = []
    stage_margins: list[float] = []
    prev_delta = 1.0
    for i in range(n):
        eps = schedule.t[i] / d1
        tcfg = TransversalityConfig(delta=min(prev_delta, 1.0), eta1=eta1, tol=cfg.tol)
        for v in movers:
            cur = Complex(X1, c1.simplices)
            try:
                res = perturb_vertex_for_transversality(
                    cur, v, c2, eps, tcfg, rng_seed=_seed(cfg.seed, i, v), phi0=phi0,
                    max_dim=i, d1=d1, budget=cfg.budget, pool=cfg.pool if i == 0 else None,
                    score_dim=n - 1)
            except PerturbationFailure as exc:
                raise MergeError(f"stage {i}: {exc}", transcript, exc.diagnostics) from exc
            if res.displacement > 0:
                transcript.append(MoveRecord(i, v, tuple(X1[v].tolist()), tuple(res.point.tolist()),
                                             res.displacement, schedule.t[i], res.delta_star,
                                             res.trials))
                X1[v] = res.point
        stage_margins.append(_stage_margin(X1, c1, c2, movers, i, eta1, d1, cfg.tol))
        prev_delta = schedule.delta_star[i]

    moved = Complex(X1, c1.simplices)
    out = overlay_merge(moved, keep1, c2, keep2, cfg.tol, cfg.center1, cfg.center2,
                        cfg.exterior)
    merged = out.complex
    moved_ids = {m.vertex for m in transcript}
    unchanged = {s for s in out.kept1 if not moved_ids & set(s)} | set(out.kept2.values())
    changed = [s for s in merged.simplices if s not in unchanged]
    ids = {k: i for i, k in enumerate(out.vertex_keys)}
    vmap2 = {k[2]: i for k, i in ids.items() if k[0] == "V" and k[1] == 2}
    after = complex_fatness(merged)
    result = MergeResult(merged, SubcomplexRef.closure(merged, changed), before, after, schedule,
                         transcript, vmap2, stage_margins, band)
    ref = phi0 if cfg.phi_reference is None else cfg.phi_reference
    if cfg.check_fatness and after.complex_min < cfg.fatness_fraction * ref:
        worst = after.argmin
        raise MergeError(
            f"fatness floor violated: complex_min {after.complex_min:.6g} < "
            f"{cfg.fatness_fraction} * {ref:.6g} at simplex {worst}",
            transcript, {"simplex": worst, "complex_min": after.complex_min,
                         "floor": cfg.fatness_fraction * ref}, result)
    return result


def _seed(seed: int, stage: int, vertex: int) -> list[int]:
    return [int(seed), int(stage), int(vertex)]


def _stage_margin(X1, c1: Complex, c2: Complex, movers, i: int, eta1: float, d1: float,
                  tol: float) -> float:
    """Worst margin of the moved faces of dimension ``<= i`` against ``c2``."""
    mv = set(movers)
    faces = sorted({f for s in c1.simplices if mv & set(s) for f in faces_of(s)
                    if len(f) <= i + 1 and mv & set(f)})
    if not faces:
        return float("inf")
    lo, hi = X1[list(mv)].min(axis=0) - 2 * d1, X1[list(mv)].max(axis=0) + 2 * d1
    inside = np.all((c2.points >= lo) & (c2.points <= hi), axis=1)
    f2 = sorted(f for f in c2.faces if inside[list(f)].any())
    cm = complex_margin(X1, faces, c2.points, f2, c1.ambient_dim, eta1, tol)
    return float(cm.margin) if not cm.failures else 0.0


# ---------------------------------------------------------------------------
# interior selection and the boundary extension pipeline
# ---------------------------------------------------------------------------

class InteriorTooShallow(ComplexError):
    """The interior triangulation reaches into the shallow part of the collar."""

    def __init__(self, message: str, simplices=()):
        super().__init__(message)
        self.simplices = list(simplices)


def radial_gauge(J: Complex, center, X) -> np.ndarray:
    """Gauge of the points ``X`` with respect to the closed hypersurface ``J``
    seen from ``center``: 1 on ``|J|``, ``s`` on ``J`` scaled by ``s``.

    ``J`` must be star-shaped about ``center``.
    """
    center = np.asarray(center, dtype=float)
    D = np.atleast_2d(np.asarray(X, dtype=float)) - center
    gauge = np.full(len(D), np.nan)
    zero = np.linalg.norm(D, axis=1) == 0
    gauge[zero] = 0.0
    for f in J.simplices:
        H = (J.coords(f) - center).T
        try:
            W = np.linalg.solve(H, D.T).T
        except np.linalg.LinAlgError:
            continue
        hit = np.isnan(gauge) & np.all(W >= -1e-12, axis=1)
        gauge[hit] = W[hit].sum(axis=1)
    if np.isnan(gauge).any():
        raise ComplexError("boundary is not star-shaped about the collar center")
    return gauge


def collar_height(J: Complex, center, vertical_scale: float):
    """Collar coordinate ``t(x)`` of the radial collar over ``J``."""
    def height(X):
        return (1.0 - radial_gauge(J, center, X)) / vertical_scale
    return height


def _product_height(collar: Complex, n0: int):
    levels = np.unique(collar.points[:, -1])
    layers = max(len(levels) - 1, 1)
    top = float(levels.max())
    scale = top * n0 / layers if top > 0 else 1.0

    def height(X):
        return np.atleast_2d(np.asarray(X, dtype=float))[:, -1] / scale
    return height


def select_interior_region(c: Complex, collar: Complex, regions, height=None) -> SubcomplexRef:
    """Simplices of ``c`` meeting the part of the collar deeper than
    ``k2/n0`` (or beyond it), closed under faces.

    ``height`` maps points to collar coordinates; by default the collar is
    taken to be a product embedding with the collar parameter on the last
    axis.  Raises :class:`InteriorTooShallow` when any simplex of ``c`` comes
    closer to the boundary than ``k3/n0``.
    """
    n0 = regions.n0
    if n0 < 6:
        raise ComplexError("collar regions need n0 >= 6")
    if height is None:
        height = _product_height(collar, n0)
    if c.is_empty:
        return SubcomplexRef(c)
    t = height(c.points)
    lo3, lo2 = regions.k3 / n0, regions.k2 / n0
    shallow = [s for s in c.simplices if t[list(s)].min() < lo3 - 1e-12]
    if shallow:
        raise InteriorTooShallow(
            f"{len(shallow)} interior simplices reach below collar level k3/n0 = {lo3:.6g} "
            f"(first: {shallow[:5]}); subdivide the interior triangulation", shallow)
    keep = []
    for s in c.simplices:
        pts = c.coords(s)
        probe = np.vstack([pts, pts.mean(axis=0)])
        if height(probe).max() > lo2:
            keep.append(s)
    return SubcomplexRef.closure(c, keep)


@dataclass(frozen=True)
class ExtendConfig:
    n0: int = 8
    vertical_scale: float = 0.8
    center: tuple | None = None
    merge: MergeConfig = field(default_factory=MergeConfig)
    band_candidates: int = 5


@dataclass
class ExtendResult:
    merged: Complex
    collar: Complex
    interior: Complex
    boundary: Complex
    merge: MergeResult | None
    phi_inputs: float
    band: Band | None

    @property
    def boundary_preserved(self) -> bool:
        nb = len(self.boundary.points)
        if not np.array_equal(self.merged.points[:nb], self.boundary.points):
            return False
        faces = self.merged.faces
        return all(s in faces for s in self.boundary.simplices)


def simplices_inside(K: Complex, simplices: list[np.ndarray], tol: float = DEFAULT_TOL) -> bool:
    """True when every given simplex lies in ``|K|``: it misses every
    boundary facet of ``K`` and its centroid is covered by ``K``."""
    from .overlay import boundary_facets

    if not simplices:
        return True
    facets = [K.coords(f) for f, _ in boundary_facets(K)]
    fbox = np.array([[F.min(axis=0), F.max(axis=0)] for F in facets])
    tops = np.array([K.coords(s) for s in K.simplices])
    tbox_lo, tbox_hi = tops.min(axis=1), tops.max(axis=1)
    for S in simplices:
        lo, hi = S.min(axis=0) - tol, S.max(axis=0) + tol
        near = np.all((fbox[:, 0] <= hi) & (fbox[:, 1] >= lo), axis=1)
        for j in np.nonzero(near)[0]:
            if simplex_distance(S, facets[j]) <= tol:
                return False
        g = S.mean(axis=0)
        cand = np.nonzero(np.all((tbox_lo <= g + tol) & (tbox_hi >= g - tol), axis=1))[0]
        if not any(simplex_distance(g[None], tops[j]) <= tol for j in cand):
            return False
    return True


def radial_band(c1: Complex, c2: Complex, center, candidates: int = 5, tol: float = DEFAULT_TOL,
                grid: int = 32) -> tuple[Band, bool]:
    """Radial band keeping ``c1`` outside and ``c2`` inside.

    Preferred placement: the active part of each complex lies inside the
    other one, so no exterior pieces are needed.  When no such placement
    exists only the active part of ``c2`` is kept inside ``c1`` and the
    returned flag asks for exterior frusta (``c2`` must be star-shaped about
    ``center``).  Among feasible placements the one whose unperturbed
    refinement is fattest wins.
    """
    center = np.asarray(center, dtype=float)
    r1 = np.linalg.norm(c1.points - center, axis=1)
    r2 = np.linalg.norm(c2.points - center, axis=1)
    r1_lo = r1[list(c1.vertex_ids)].min()
    r2_hi = r2[list(c2.vertex_ids)].max()
    rs = np.linspace(r1_lo, r2_hi, grid)

    def active2(rho2):
        return [c2.coords(s) for s in c2.simplices if r2[list(s)].max() > rho2]

    def active1(rho1):
        return [c1.coords(s) for s in c1.simplices if r1[list(s)].min() < rho1]

    rho2_min = next((r for r in rs if simplices_inside(c1, active2(r), tol)), None)
    rho1_max = next((r for r in rs[::-1] if simplices_inside(c2, active1(r), tol)), None)
    if rho2_min is None or rho2_min >= r2_hi:
        raise InteriorTooShallow(
            "collar and interior overlap too little to merge: no part of the interior "
            "near its boundary lies inside the collar; refine the interior")
    exterior = rho1_max is None or not rho2_min < rho1_max
    if exterior:
        # c1 may stick out of c2; its active layer reaches just past c2
        rho1_max = r2_hi + (r2_hi - rho2_min)
    bands = []
    for a in np.linspace(0.0, 0.4, max(candidates, 1)):
        lo = rho2_min + a * (rho1_max - rho2_min)
        hi = rho1_max - a * (rho1_max - rho2_min)
        if lo < hi:
            bands.append(Band(tuple(center.tolist()), None, -hi, -lo, sign=-1.0))
    if len(bands) == 1:
        return bands[0], exterior

    def score(b):
        k1, k2 = b.split(c1, c2)
        try:
            out = overlay_merge(c1, k1, c2, k2, tol, center1=center, center2=center,
                                exterior=exterior)
        except ComplexError:
            return -1.0
        return complex_fatness(out.complex).complex_min
    return max(bands, key=score), exterior


def extend_with_report(boundary: Complex, interior: Complex, cfg: ExtendConfig | None = None
                       ) -> ExtendResult:
    """Collar over ``boundary`` merged with ``interior``; see
    :func:`extend_boundary_triangulation`."""
    from .collar import CollarSpec, build_prism_complex, collar_regions, slice_ids

    cfg = cfg or ExtendConfig()
    n = boundary.ambient_dim
    if boundary.dim != n - 1:
        raise ComplexError("boundary must be a closed hypersurface of codimension 1")
    center = (boundary.points[list(boundary.vertex_ids)].mean(axis=0) if cfg.center is None
              else np.asarray(cfg.center, dtype=float))
    spec = CollarSpec(n0=cfg.n0, depth=1.0, vertical_scale=cfg.vertical_scale)
    collar = build_prism_complex(boundary, spec, "radial", center)
    phi_b = complex_fatness(boundary).complex_min
    if interior.is_empty:
        return ExtendResult(collar, collar, interior, boundary, None, phi_b, None)
    if interior.ambient_dim != n:
        raise ComplexError("ambient mismatch")
    regions = collar_regions(spec)
    height = collar_height(boundary, center, cfg.vertical_scale)
    L0 = select_interior_region(interior, collar, regions, height)
    K2 = L0.as_complex().compact()
    phi_in = min(phi_b, complex_fatness(interior).complex_min)

    band, exterior = radial_band(collar, K2, center, cfg.band_candidates, cfg.merge.tol)
    pinned = frozenset(int(v) for v in slice_ids(boundary, 0)) | cfg.merge.pinned
    mcfg = MergeConfig(**{**cfg.merge.__dict__, "band": band, "pinned": pinned,
                          "pin_boundary": False, "exterior": exterior, "center1": center,
                          "center2": center, "phi_reference": phi_in})
    res = merge_fat_triangulations(collar, K2, mcfg)
    return ExtendResult(res.merged, collar, K2, boundary, res, phi_in, band)


def extend_boundary_triangulation(boundary: Complex, interior: Complex,
                                  cfg: ExtendConfig | None = None) -> Complex:
    """A triangulation of collar ∪ interior restricting to ``boundary`` on the
    boundary slice (ids and coordinates unchanged).

    The collar is the radial collar over ``boundary`` with ``cfg.n0``
    layers; the interior must stay clear of collar levels below ``k3/n0``.
    The merge checks the fatness floor against ``min(phi(boundary),
    phi(interior))``.
    """
    return extend_with_report(boundary, interior, cfg).merged

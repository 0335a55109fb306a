"""Quantitative transversality of simplices and vertex perturbation.

Two simplices ``s1``, ``s2`` (dims ``k1``, ``k2``) in ``R^n`` are
``delta``-transverse when

(i)   their intersection has dimension ``max(0, k1 + k2 - n)``,
(ii)  the angle between them exceeds ``delta``,
(iii) every pair of faces with ``dim s3 + dim s4 < n`` is further apart than
      ``delta * eta1``.

Everything here is phrased through a *margin*: the supremum of ``delta`` for
which (ii) and (iii) hold, capped at ``pi/2``.  A pair is ``delta``-transverse
iff clause (i) holds and ``margin > delta``; monotonicity in ``delta`` is
then automatic.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .complex import Complex, ComplexError, Simplex, faces_of
from .geometry import (DEFAULT_TOL, affine_basis, affine_rank, batched_face_distances,
                       principal_angles, simplex_distance, simplex_pair_polytope,
                       subsets)
from .metrics import batch_fatness, simplex_diameter

logger = logging.getLogger(__name__)

MARGIN_CAP = math.pi / 2


@dataclass(frozen=True)
class TransversalityConfig:
    delta: float
    eta1: float
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if not 0 < self.delta < math.pi / 2:
            raise ComplexError("delta must lie in (0, pi/2)")
        if not self.eta1 > 0:
            raise ComplexError("eta1 must be positive")
        if not self.tol > 0:
            raise ComplexError("tol must be positive")


@dataclass(frozen=True)
class Witness:
    """Why a pair is (or is not) transverse.

    ``clause`` is ``None`` on success, else ``"i"``, ``"ii"`` or ``"iii"``.
    ``faces`` are local vertex index tuples into the (ordered) pair.
    """

    clause: str | None
    margin: float
    faces: tuple[tuple[int, ...], tuple[int, ...]] | None = None
    value: float = math.nan
    swapped: bool = False


@dataclass(frozen=True)
class PairMargin:
    margin: float
    dim_ok: bool
    intersection_dim: int
    expected_dim: int
    angle: float
    min_dist: float
    min_dist_ratio: float
    dist_faces: tuple[tuple[int, ...], tuple[int, ...]] | None

    @property
    def limiting_clause(self) -> str:
        if not self.dim_ok:
            return "i"
        return "ii" if self.angle <= self.min_dist_ratio else "iii"


def default_eta1(c1: Complex, c2: Complex) -> float:
    """Minimum edge length of the coarser complex (larger median edge)."""
    def edges(c):
        E = np.array(c.faces_of_dim(1), dtype=int)
        if len(E) == 0:
            raise ComplexError("complex has no edges")
        return np.linalg.norm(c.points[E[:, 0]] - c.points[E[:, 1]], axis=1)
    e1, e2 = edges(c1), edges(c2)
    coarse = e1 if np.median(e1) >= np.median(e2) else e2
    return float(coarse.min())


def intersection_dim(P, Q, tol: float = DEFAULT_TOL) -> int:
    """Dimension of ``conv P ∩ conv Q``; ``-1`` when empty."""
    poly = simplex_pair_polytope(P, Q, tol)
    if poly is None:
        return -1
    return affine_rank(poly[0], tol)


def transverse_angle(P, Q, n: int, tol: float = DEFAULT_TOL) -> float:
    """Angle between the affine hulls beyond their forced common directions.

    Principal angles between the direction spaces are sorted; the first
    ``max(0, k1 + k2 - n)`` are zero for every pair and are skipped, the
    next one is the angle.  With nothing left the angle is ``pi/2``.
    """
    _, U = affine_basis(P, tol)
    _, V = affine_basis(Q, tol)
    k1, k2 = U.shape[1], V.shape[1]
    forced = max(0, k1 + k2 - n)
    ang = principal_angles(U, V)
    if len(ang) <= forced:
        return MARGIN_CAP
    return float(min(ang[forced], MARGIN_CAP))


class DistanceTable:
    """Cache of face-pair KKT distances between two vertex tables.

    ``raw[(f, g)]`` is the distance between the affine hulls of faces ``f``
    and ``g`` when the closest points lie in both closed faces, else ``inf``.
    The distance between two closed faces is the minimum of ``raw`` over
    their sub-face pairs.
    """

    def __init__(self, X1: np.ndarray, X2: np.ndarray, tol: float = 1e-12):
        self.X1 = X1
        self.X2 = X2
        self.tol = tol
        self.raw: dict[tuple[Simplex, Simplex], float] = {}

    def ensure(self, pairs) -> None:
        groups: dict[tuple[int, int], list[tuple[Simplex, Simplex]]] = {}
        for f, g in pairs:
            if (f, g) not in self.raw:
                groups.setdefault((len(f), len(g)), []).append((f, g))
        for items in groups.values():
            items = list(dict.fromkeys(items))
            F = self.X1[np.array([f for f, _ in items])]
            G = self.X2[np.array([g for _, g in items])]
            d = batched_face_distances(F, G, self.tol)
            for key, val in zip(items, d):
                self.raw[key] = float(val)

    def forget_vertex(self, v: int) -> None:
        for key in [k for k in self.raw if v in k[0]]:
            del self.raw[key]


@lru_cache(maxsize=None)
def _low_pattern(k1: int, k2: int, n: int):
    return tuple((fi, gi) for fi in subsets(k1) for gi in subsets(k2)
                 if len(fi) + len(gi) - 2 < n)


def _low_pairs(s1: Simplex, s2: Simplex, n: int):
    """Sub-face pairs ``(f, g)`` of ``(s1, s2)`` with ``dim f + dim g < n``."""
    return [(tuple(s1[i] for i in fi), tuple(s2[j] for j in gi))
            for fi, gi in _low_pattern(len(s1), len(s2), n)]


def pair_margin(s1: Simplex, s2: Simplex, table: DistanceTable, n: int, eta1: float,
                tol: float = DEFAULT_TOL) -> PairMargin:
    """Margin of a pair given by vertex ids into ``table.X1`` / ``table.X2``."""
    P = table.X1[list(s1)]
    Q = table.X2[list(s2)]
    k1, k2 = len(s1) - 1, len(s2) - 1
    expected = max(0, k1 + k2 - n)
    low = _low_pairs(s1, s2, n)
    table.ensure(low)
    best, best_pair = math.inf, None
    for key in low:
        d = table.raw[key]
        if d < best:
            best, best_pair = d, key
    ratio = min(best / eta1, MARGIN_CAP)
    if k1 + k2 < n:
        # disjointness is the transverse outcome; (iii) on the pair itself rules
        idim = -1 if best > tol else intersection_dim(P, Q, tol)
        dim_ok = idim <= 0
        angle = transverse_angle(P, Q, n, tol) if idim >= 0 else MARGIN_CAP
    else:
        idim = intersection_dim(P, Q, tol)
        dim_ok = idim == expected
        angle = transverse_angle(P, Q, n, tol) if idim >= 0 else MARGIN_CAP
    margin = min(angle, ratio) if dim_ok else 0.0
    local = None
    if best_pair is not None:
        local = (tuple(s1.index(v) for v in best_pair[0]),
                 tuple(s2.index(v) for v in best_pair[1]))
    return PairMargin(margin=margin, dim_ok=dim_ok, intersection_dim=idim,
                      expected_dim=expected, angle=angle, min_dist=best,
                      min_dist_ratio=ratio, dist_faces=local)


def transversality_margin(P, Q, n: int | None = None, eta1: float = 1.0,
                          tol: float = DEFAULT_TOL) -> PairMargin:
    P = np.atleast_2d(np.asarray(P, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if P.shape[1] != Q.shape[1]:
        raise ComplexError(f"ambient mismatch: R^{P.shape[1]} vs R^{Q.shape[1]}")
    n = P.shape[1] if n is None else n
    table = DistanceTable(P, Q)
    return pair_margin(tuple(range(len(P))), tuple(range(len(Q))), table, n, eta1, tol)


def is_delta_transverse(P, Q, cfg: TransversalityConfig, n: int | None = None
                        ) -> tuple[bool, Witness]:
    """Literal check of the three clauses for one pair of simplices.

    The pair is first ordered by diameter; the witness refers to that order.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if P.shape[1] != Q.shape[1]:
        raise ComplexError(f"ambient mismatch: R^{P.shape[1]} vs R^{Q.shape[1]}")
    swapped = simplex_diameter(P) > simplex_diameter(Q)
    if swapped:
        P, Q = Q, P
    for X in (P, Q):
        if affine_rank(X, cfg.tol) < len(X) - 1:
            raise ComplexError("degenerate simplex")
    pm = transversality_margin(P, Q, n, cfg.eta1, cfg.tol)
    if not pm.dim_ok:
        return False, Witness("i", 0.0, None, float(pm.intersection_dim), swapped)
    if pm.angle <= cfg.delta and pm.angle <= pm.min_dist_ratio:
        return False, Witness("ii", pm.margin, None, pm.angle, swapped)
    if pm.min_dist_ratio <= cfg.delta:
        return False, Witness("iii", pm.margin, pm.dist_faces, pm.min_dist, swapped)
    if pm.angle <= cfg.delta:
        return False, Witness("ii", pm.margin, None, pm.angle, swapped)
    return True, Witness(None, pm.margin, pm.dist_faces, pm.min_dist, swapped)


# ---------------------------------------------------------------------------
# complex-level checks
# ---------------------------------------------------------------------------

@dataclass
class ComplexMargin:
    """Worst margin over the required pairs of two face sets.

    A pair with ``k1 + k2 >= n`` whose simplices are disjoint is not
    required: nothing of it meets the other complex, and its low-dimensional
    sub-faces are checked as pairs of their own.
    """

    margin: float = MARGIN_CAP
    worst: tuple[Simplex, Simplex] | None = None
    failures: list[tuple[Simplex, Simplex]] = field(default_factory=list)
    pairs: list[tuple[Simplex, Simplex, float]] = field(default_factory=list)


def _bbox(X: np.ndarray, faces) -> np.ndarray:
    return np.array([[X[list(f)].min(axis=0), X[list(f)].max(axis=0)] for f in faces])


def complex_margin(X1: np.ndarray, faces1, X2: np.ndarray, faces2, n: int, eta1: float,
                   tol: float = DEFAULT_TOL, table: DistanceTable | None = None,
                   keep_pairs: bool = False) -> ComplexMargin:
    faces1 = list(faces1)
    faces2 = list(faces2)
    out = ComplexMargin()
    if not faces1 or not faces2:
        return out
    table = table if table is not None else DistanceTable(X1, X2)
    reach = MARGIN_CAP * eta1
    b1, b2 = _bbox(X1, faces1), _bbox(X2, faces2)
    k1 = np.array([len(f) - 1 for f in faces1])
    k2 = np.array([len(g) - 1 for g in faces2])
    for i, f in enumerate(faces1):
        gap = np.maximum(b2[:, 0] - b1[i, 1], b1[i, 0] - b2[:, 1]).max(axis=1)
        high = k1[i] + k2 >= n
        cand = np.nonzero(np.where(high, gap <= tol, gap <= reach))[0]
        for j in cand:
            g = faces2[j]
            pm = pair_margin(f, g, table, n, eta1, tol)
            if high[j] and pm.intersection_dim < 0:
                continue
            if keep_pairs:
                out.pairs.append((f, g, pm.margin))
            if not pm.dim_ok:
                out.failures.append((f, g))
            if pm.margin < out.margin:
                out.margin, out.worst = pm.margin, (f, g)
    return out


def neighbourhood_faces(c2: Complex, center: np.ndarray, radius: float) -> list[Simplex]:
    """Faces of ``c2`` whose top simplices meet the closed ball (closed set)."""
    out: set[Simplex] = set()
    for s in c2.simplices:
        P = c2.coords(s)
        lo, hi = P.min(axis=0), P.max(axis=0)
        if np.any(center < lo - radius) or np.any(center > hi + radius):
            continue
        if simplex_distance(P, center[None, :]) <= radius:
            out.update(faces_of(s))
    return sorted(out, key=lambda f: (len(f), f))


# ---------------------------------------------------------------------------
# perturbation
# ---------------------------------------------------------------------------

def delta_star_floor(phi0: float, delta: float, eps: float) -> float:
    """Acceptance floor for the margin after a perturbation of size ``eps``.

    A vertex moved at most ``eps * d1`` can clear nearby flats by at most
    about ``eps * d1``, and a ``phi0``-fat star converts that clearance into
    angles at a rate proportional to ``phi0``; the floor keeps a factor 4 of
    slack and never exceeds the incoming ``delta``.
    """
    return min(delta, eps * phi0) / 4.0


class PerturbationFailure(ComplexError):
    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass
class PerturbationResult:
    point: np.ndarray
    displacement: float
    delta_star: float
    delta_floor: float
    d1: float
    phi0: float
    min_fatness: float
    trials: int
    star_faces: list[Simplex]
    l2_faces: list[Simplex]


def _star_faces(c1: Complex, v0: int, max_dim: int):
    top = [s for s in c1.simplices if v0 in s]
    if not top:
        raise ComplexError(f"vertex {v0} is not used by any simplex")
    moving: set[Simplex] = set()
    fixed: set[Simplex] = set()
    for s in top:
        for f in faces_of(s):
            (moving if v0 in f else fixed).add(f)
    moving = sorted((f for f in moving if len(f) - 1 <= max_dim), key=lambda f: (len(f), f))
    return top, moving, sorted(fixed, key=lambda f: (len(f), f))


def _ball_samples(rng: np.random.Generator, count: int, dim: int, radius: float) -> np.ndarray:
    g = rng.standard_normal((count, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / dim)
    return g * r[:, None]


def perturb_vertex_for_transversality(c1: Complex, v0: int, c2: Complex, eps: float,
                                      cfg: TransversalityConfig, rng_seed: int = 0,
                                      phi0: float | None = None, max_dim: int | None = None,
                                      d1: float | None = None, budget: int = 4096,
                                      levels: int = 4, pool: int | None = None,
                                      score_dim: int | None = None) -> PerturbationResult:
    """Move ``v0`` inside ``B(v0, eps*d1)`` until its star is transverse to ``c2``.

    ``d1`` defaults to the largest diameter in the star of ``v0`` and ``phi0``
    to the smallest fatness there.  Candidates are ``v0`` itself followed by
    seeded uniform samples in balls of radius ``eps*d1/2**j``; the first one
    (by trial index) whose star keeps fatness ``>= phi0/2`` and whose margin
    against the faces of ``c2`` near ``v0`` reaches ``delta_star_floor`` is
    accepted.  The reported ``delta_star`` is the measured worst margin.

    With ``pool`` set, the first ``pool`` candidates are all evaluated and
    the admissible one with the largest margin wins (the search then falls
    back to first-admissible over the rest of the budget).  ``score_dim``
    ranks pool candidates by the margin of the star faces up to that
    dimension instead (acceptance still uses ``max_dim``).
    """
    if c1.ambient_dim != c2.ambient_dim:
        raise ComplexError("ambient mismatch")
    if eps <= 0:
        raise ComplexError("eps must be positive")
    n = c1.ambient_dim
    max_dim = n - 1 if max_dim is None else max_dim
    top, moving, _ = _star_faces(c1, v0, max_dim)
    X1 = np.array(c1.points, dtype=float)
    v_old = X1[v0].copy()
    if d1 is None:
        d1 = max(simplex_diameter(c1.coords(s)) for s in top)
    top_arr = np.array(top)
    if phi0 is None:
        phi0 = float(batch_fatness(X1[top_arr]).min())
    floor = delta_star_floor(phi0, cfg.delta, eps)
    l2 = neighbourhood_faces(c2, v_old, 2 * d1)
    radius = eps * d1 * (1 - 1e-9)
    table = DistanceTable(X1, c2.points)

    scoring = None
    if pool is not None and score_dim is not None and score_dim != max_dim:
        scoring = _star_faces(c1, v0, score_dim)[1]

    def evaluate(x):
        X1[v0] = x
        fat = float(batch_fatness(X1[top_arr]).min())
        if fat < phi0 / 2:
            return None, fat
        table.forget_vertex(v0)
        cm = complex_margin(X1, moving, c2.points, l2, n, cfg.eta1, cfg.tol, table)
        return cm, fat

    def score(cm):
        if scoring is None:
            return (cm.margin,)
        sc = complex_margin(X1, scoring, c2.points, l2, n, cfg.eta1, cfg.tol, table)
        return (0.0 if sc.failures else sc.margin, cm.margin)

    rng = np.random.default_rng(rng_seed)
    per_level = max(1, (budget - 1) // levels)
    candidates = [np.zeros((1, n))]
    for j in range(levels):
        candidates.append(_ball_samples(rng, per_level, n, radius / 2 ** j))
    offsets = np.vstack(candidates)
    best_seen = 0.0
    best = None

    def result(off, cm, fat, trials):
        return PerturbationResult(point=v_old + off, displacement=float(np.linalg.norm(off)),
                                  delta_star=cm.margin, delta_floor=floor, d1=d1,
                                  phi0=phi0, min_fatness=fat, trials=trials,
                                  star_faces=moving, l2_faces=l2)

    for trial, off in enumerate(offsets):
        cm, fat = evaluate(v_old + off)
        if cm is not None:
            best_seen = max(best_seen, cm.margin)
            if not cm.failures and cm.margin >= floor and cm.margin > 0:
                if pool is None:
                    X1[v0] = v_old + off
                    return result(off, cm, fat, trial + 1)
                key = score(cm)
                if best is None or key > best[3]:
                    best = (off, cm, fat, key)
        if pool is not None and best is not None and trial + 1 >= min(pool + 1, len(offsets)):
            return result(best[0], best[1], best[2], trial + 1)
    if best is not None:
        return result(best[0], best[1], best[2], len(offsets))
    raise PerturbationFailure(
        f"no admissible position for vertex {v0} after {len(offsets)} trials "
        f"(best margin {best_seen:.3g}, floor {floor:.3g})",
        {"vertex": v0, "trials": len(offsets), "best_margin": best_seen, "floor": floor,
         "d1": d1, "eps": eps})


# ---------------------------------------------------------------------------
# displacement schedule
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DisplacementSchedule:
    t: tuple[float, ...]
    delta_star: tuple[float, ...]
    delta_bigstar: float
    d_phi0: float
    delta_fn: dict
    table_version: str = ""


def displacement_schedule(phi0: float, d1: float, n: int, d_fn=None, delta_fn=None
                          ) -> DisplacementSchedule:
    """Skeleton-by-skeleton move caps ``t_0 >= ... >= t_{n-1}`` and margins.

    ``t_0 = (d1/n) min{1/2, d(phi0)}``, then ``t_i`` additionally takes the
    minimum with ``delta(phi0/2, delta*_j/2)`` for ``j < i``, and
    ``delta*_i = delta*(phi0, delta*_{i-1}, t_i/d1)`` with ``delta*_{-1} = 1``.
    ``d_fn(phi0, n)`` and ``delta_fn(phi, delta, n)`` default to the shipped
    calibration tables.
    """
    if not 0 < phi0 < 1:
        raise ComplexError("phi0 must lie in (0, 1)")
    if not d1 > 0:
        raise ComplexError("d1 must be positive")
    if n < 2:
        raise ComplexError("n must be >= 2")
    version = ""
    if d_fn is None or delta_fn is None:
        from .calibration import load_tables
        tables = load_tables()
        version = tables.version_hash
        d_fn = d_fn or tables.d_phi0
        delta_fn = delta_fn or tables.delta_fn
    d = float(d_fn(phi0, n))
    caps = [0.5, d]
    used: dict[tuple[float, float], float] = {}
    t = [d1 / n * min(caps)]
    ds = [delta_star_floor(phi0, 1.0, t[0] / d1)]
    for i in range(1, n):
        key = (phi0 / 2, ds[i - 1] / 2)
        used[key] = float(delta_fn(key[0], key[1], n))
        caps.append(used[key])
        t.append(d1 / n * min(caps))
        ds.append(delta_star_floor(phi0, ds[i - 1], t[i] / d1))
    return DisplacementSchedule(t=tuple(t), delta_star=tuple(ds), delta_bigstar=0.5 * min(ds),
                                d_phi0=d, delta_fn=used, table_version=version)


# ---------------------------------------------------------------------------
# map approximation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MapApproxReport:
    sup_distance: float
    sup_derivative_angle: float
    subdivision_used: bool = False


def _differential(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Linear part ``A`` of the affine map sending simplex ``X`` to ``Y``,
    expressed on the direction space of ``X`` (orthonormal basis columns)."""
    _, U = affine_basis(X)
    E = (X[1:] - X[0]) @ U
    F = Y[1:] - Y[0]
    return np.linalg.lstsq(E, F, rcond=None)[0].T, U


def approximation_distance(f_vertices, g_vertices, c: Complex, samples: int = 64,
                           directions: int = 64) -> MapApproxReport:
    """Sup distance and sup differential angle between two simplexwise-linear maps.

    Points are sampled at the vertices and at deterministic low-discrepancy
    barycentric points of each top simplex; directions are the edge
    directions plus deterministic unit vectors of the simplex's tangent
    space.  Angles are between ``df(u)`` and ``dg(u)``.
    """
    from .geometry import sobol_simplex_samples

    def table(m):
        if isinstance(m, dict):
            out = np.full((len(c.points), len(next(iter(m.values())))), np.nan)
            for v in c.vertex_ids:
                if v not in m:
                    raise ComplexError(f"map undefined at vertex {v}")
                out[v] = m[v]
            return out
        return np.asarray(m, dtype=float)
    F = table(f_vertices)
    G = table(g_vertices)
    sup_d = float(np.max(np.linalg.norm(F[list(c.vertex_ids)] - G[list(c.vertex_ids)], axis=1),
                         initial=0.0))
    sup_a = 0.0
    for s in c.simplices:
        k = len(s) - 1
        B = sobol_simplex_samples(k, samples)
        diff = B @ F[list(s)] - B @ G[list(s)]
        sup_d = max(sup_d, float(np.linalg.norm(diff, axis=1).max()))
        if k == 0:
            continue
        X = c.coords(s)
        A, U = _differential(X, F[list(s)])
        Bm, _ = _differential(X, G[list(s)])
        rng = np.random.default_rng(k)
        dirs = np.vstack([np.eye(k), ((X[1:] - X[0]) @ U),
                          rng.standard_normal((directions, k))])
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        a = dirs @ A.T
        b = dirs @ Bm.T
        na, nb = np.linalg.norm(a, axis=1), np.linalg.norm(b, axis=1)
        ok = (na > 0) & (nb > 0)
        cosv = np.einsum("ij,ij->i", a[ok], b[ok]) / (na[ok] * nb[ok])
        if cosv.size:
            sup_a = max(sup_a, float(np.arccos(np.clip(cosv, -1.0, 1.0)).max()))
    return MapApproxReport(sup_distance=sup_d, sup_derivative_angle=sup_a)

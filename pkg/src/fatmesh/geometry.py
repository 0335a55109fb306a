"""Low-level Euclidean helpers shared by the mesh modules.

Everything here works on plain ``numpy`` arrays of shape ``(npoints, ambient)``.
Tolerances are absolute lengths unless a name says otherwise.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

DEFAULT_TOL = 1e-9


def as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    return arr


@lru_cache(maxsize=None)
def subsets(n: int, min_size: int = 1) -> tuple[tuple[int, ...], ...]:
    """All index subsets of ``range(n)`` with at least ``min_size`` members,
    ordered by size then lexicographically."""
    out = []
    for size in range(min_size, n + 1):
        out.extend(itertools.combinations(range(n), size))
    return tuple(out)


def affine_basis(points, tol: float = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Origin and orthonormal direction basis of the affine hull of ``points``.

    Returns ``(origin, U)`` with ``U`` of shape ``(ambient, rank)``.
    """
    pts = as_points(points)
    origin = pts[0]
    if len(pts) == 1:
        return origin, np.zeros((pts.shape[1], 0))
    diffs = (pts[1:] - origin).T
    u, s, _ = np.linalg.svd(diffs, full_matrices=False)
    scale = max(1.0, float(np.max(np.abs(diffs))))
    rank = int(np.sum(s > tol * scale))
    return origin, u[:, :rank]


def affine_rank(points, tol: float = DEFAULT_TOL) -> int:
    return affine_basis(points, tol)[1].shape[1]


def barycentric_map(simplex) -> np.ndarray:
    """Matrix ``B`` with ``B @ [x, 1]`` = barycentric coordinates of ``x``.

    For a lower-dimensional simplex the coordinates are those of the
    orthogonal projection of ``x`` onto its affine hull.
    """
    pts = as_points(simplex)
    aug = np.vstack([pts.T, np.ones(len(pts))])
    return np.linalg.pinv(aug)


def barycentric(simplex, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    B = barycentric_map(simplex)
    if x.ndim == 1:
        return B @ np.append(x, 1.0)
    return (B @ np.vstack([x.T, np.ones(len(x))])).T


def simplex_halfspaces(simplex) -> tuple[np.ndarray, np.ndarray]:
    """Unit-normal halfspaces ``G x <= h`` of a full-dimensional simplex.

    Row ``i`` is the facet opposite vertex ``i``.
    """
    B = barycentric_map(simplex)
    G = -B[:, :-1]
    h = B[:, -1].copy()
    norms = np.linalg.norm(G, axis=1)
    return G / norms[:, None], h / norms


def dedupe_points(points: np.ndarray, tol: float) -> np.ndarray:
    """Indices of a representative subset with pairwise distance > tol."""
    keep: list[int] = []
    for i, p in enumerate(points):
        if all(np.linalg.norm(p - points[j]) > tol for j in keep):
            keep.append(i)
    return np.array(keep, dtype=int)


def enumerate_vertices(G: np.ndarray, h: np.ndarray, tol: float = DEFAULT_TOL
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Vertices of the bounded polytope ``{c : G c <= h}`` by brute force.

    Every ``m``-subset of the constraints is solved; feasible solutions are
    kept and merged within ``tol``.  Returns ``(vertices, tight)`` where
    ``tight[i, j]`` says constraint ``j`` is active at vertex ``i``.
    Constraint counts here are tiny (at most a few dozen), so the
    combinatorial sweep is cheaper than an LP-based pivoting scheme.
    """
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    ncons, m = G.shape
    if m == 0:
        if np.all(h >= -tol):
            return np.zeros((1, 0)), np.ones((1, ncons), dtype=bool)
        return np.zeros((0, 0)), np.zeros((0, ncons), dtype=bool)
    if ncons < m:
        return np.zeros((0, m)), np.zeros((0, ncons), dtype=bool)
    combos = np.array(list(itertools.combinations(range(ncons), m)), dtype=int)
    A = G[combos]
    b = h[combos]
    dets = np.linalg.det(A)
    good = np.abs(dets) > 1e-12
    if not np.any(good):
        return np.zeros((0, m)), np.zeros((0, ncons), dtype=bool)
    sol = np.linalg.solve(A[good], b[good][..., None])[..., 0]
    slack = sol @ G.T - h
    feasible = np.all(slack <= tol, axis=1)
    sol = sol[feasible]
    if len(sol) == 0:
        return np.zeros((0, m)), np.zeros((0, ncons), dtype=bool)
    order = np.lexsort(sol.T[::-1])
    sol = sol[order]
    keep = dedupe_points(sol, 10 * tol)
    verts = sol[keep]
    tight = np.abs(verts @ G.T - h) <= 10 * tol
    return verts, tight


def flat_intersection(P, Q, tol: float = DEFAULT_TOL):
    """Intersection of the affine hulls of two point sets.

    Returns ``(x0, W)`` (a point and an orthonormal basis of directions) or
    ``None`` when the hulls miss each other.
    """
    p0, U = affine_basis(P, tol)
    q0, V = affine_basis(Q, tol)
    M = np.hstack([U, -V])
    rhs = q0 - p0
    if M.shape[1] == 0:
        if np.linalg.norm(rhs) <= tol:
            return p0, np.zeros((len(p0), 0))
        return None
    sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    if np.linalg.norm(M @ sol - rhs) > tol * max(1.0, np.linalg.norm(rhs)):
        return None
    x0 = p0 + U @ sol[:U.shape[1]]
    _, s, vt = np.linalg.svd(M)
    rank = int(np.sum(s > 1e-10))
    null = vt[rank:].T
    W = U @ null[:U.shape[1]]
    if W.shape[1]:
        W, r = np.linalg.qr(W)
        W = W[:, np.abs(np.diag(r)) > 1e-12]
    return x0, W


def simplex_pair_polytope(P, Q, tol: float = DEFAULT_TOL):
    """Vertices of ``conv(P) ∩ conv(Q)`` for two simplices (any dimensions).

    Returns ``(vertices, tight)`` in ambient coordinates where the columns of
    ``tight`` index the barycentric constraints of ``P`` followed by ``Q``;
    ``None`` when the intersection is empty.
    """
    P = as_points(P)
    Q = as_points(Q)
    return flat_polytope(P, barycentric_map(P), Q, barycentric_map(Q), tol)


def flat_polytope(P, BP: np.ndarray, Q, BQ: np.ndarray, tol: float = DEFAULT_TOL):
    """Vertices of ``{x in aff P ∩ aff Q : BP [x,1] >= 0, BQ [x,1] >= 0}``.

    ``P`` and ``Q`` are point sets spanning the two affine hulls; ``BP`` and
    ``BQ`` are constraint rows acting on homogeneous coordinates.  Returns
    ``(vertices, tight)`` with one ``tight`` column per row of ``BP`` then
    ``BQ``, or ``None`` when the set is empty.  The set must be bounded.
    """
    flat = flat_intersection(P, Q, tol)
    if flat is None:
        return None
    x0, W = flat
    B = np.vstack([BP, BQ])
    # B(x0 + W c) >= 0  <=>  -(B_lin W) c <= B_lin x0 + b
    lin = B[:, :-1]
    G = -(lin @ W)
    h = lin @ x0 + B[:, -1]
    norms = np.linalg.norm(G, axis=1)
    scale = np.where(norms > 1e-14, norms, 1.0)
    if W.shape[1] == 0:
        if np.all(h >= -tol):
            return x0[None, :], np.abs(h)[None, :] <= tol
        return None
    # constraints with zero gradient on the flat are either vacuous or fatal
    flat_cons = norms <= 1e-14
    if np.any(h[flat_cons] < -tol):
        return None
    Gn = G / scale[:, None]
    hn = h / scale
    active = ~flat_cons
    cverts, tight_active = enumerate_vertices(Gn[active], hn[active], tol)
    if len(cverts) == 0:
        return None
    verts = x0 + cverts @ W.T
    tight = np.zeros((len(verts), len(h)), dtype=bool)
    tight[:, active] = tight_active
    tight[:, flat_cons] = np.abs(h[flat_cons])[None, :] <= tol
    return verts, tight


def simplex_distance(P, Q, tol: float = 1e-12) -> float:
    """Euclidean distance between two closed simplices.

    Exact KKT enumeration: for every pair of sub-faces the distance between
    their affine hulls is computed in one batched solve, and only pairs whose
    closest points fall inside both faces are admitted.
    """
    P = as_points(P)
    Q = as_points(Q)
    best = math.inf
    for fi in subsets(len(P)):
        F = P[list(fi)]
        for gi in subsets(len(Q)):
            G = Q[list(gi)]
            d = _face_pair_distance(F, G, tol)
            if d is not None and d < best:
                best = d
    return best


def _face_pair_distance(F: np.ndarray, G: np.ndarray, tol: float):
    f0, g0 = F[0], G[0]
    Fd = (F[1:] - f0).T
    Gd = (G[1:] - g0).T
    M = np.hstack([Fd, -Gd])
    rhs = g0 - f0
    if M.shape[1] == 0:
        return float(np.linalg.norm(rhs))
    sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    a = sol[:Fd.shape[1]]
    b = sol[Fd.shape[1]:]
    if (np.any(a < -tol) or a.sum() > 1 + tol or np.any(b < -tol)
            or b.sum() > 1 + tol):
        return None
    return float(np.linalg.norm(f0 + Fd @ a - g0 - Gd @ b))


def batched_face_distances(F: np.ndarray, G: np.ndarray, tol: float = 1e-12
                           ) -> np.ndarray:
    """Vectorised :func:`_face_pair_distance` over a batch.

    ``F`` has shape ``(batch, kf+1, N)`` and ``G`` ``(batch, kg+1, N)``.
    Infeasible pairs get ``inf``.
    """
    f0 = F[:, 0]
    g0 = G[:, 0]
    Fd = np.transpose(F[:, 1:] - f0[:, None], (0, 2, 1))
    Gd = np.transpose(G[:, 1:] - g0[:, None], (0, 2, 1))
    M = np.concatenate([Fd, -Gd], axis=2)
    rhs = g0 - f0
    if M.shape[2] == 0:
        return np.linalg.norm(rhs, axis=1)
    sol = np.einsum("bij,bj->bi", np.linalg.pinv(M), rhs)
    kf = Fd.shape[2]
    a = sol[:, :kf]
    b = sol[:, kf:]
    ok = (np.all(a >= -tol, axis=1) & (a.sum(axis=1) <= 1 + tol)
          & np.all(b >= -tol, axis=1) & (b.sum(axis=1) <= 1 + tol))
    resid = f0 + np.einsum("bij,bj->bi", Fd, a) - g0 - np.einsum("bij,bj->bi", Gd, b)
    d = np.linalg.norm(resid, axis=1)
    return np.where(ok, d, np.inf)


def principal_angles(U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Principal angles (ascending) between two orthonormal column bases."""
    if U.shape[1] == 0 or V.shape[1] == 0:
        return np.zeros(0)
    s = np.linalg.svd(U.T @ V, compute_uv=False)
    return np.arccos(np.clip(s, -1.0, 1.0))


def sobol_simplex_samples(k: int, count: int) -> np.ndarray:
    """Deterministic barycentric sample points in a ``k``-simplex.

    Unscrambled Sobol points in the cube are pushed through the sorted
    spacings map, which carries the uniform cube measure to the uniform
    simplex measure.  Returns shape ``(count, k+1)``.
    """
    from scipy.stats import qmc

    if k == 0:
        return np.ones((count, 1))
    m = int(math.ceil(math.log2(max(count, 2) + 1)))
    raw = qmc.Sobol(d=k, scramble=False).random_base2(m)[1:count + 1]
    # keep strictly inside the cube so no coordinate lands on a facet
    raw = 0.5 / 2 ** m + raw * (1 - 1.0 / 2 ** m)
    srt = np.sort(raw, axis=1)
    edges = np.hstack([np.zeros((len(srt), 1)), srt, np.ones((len(srt), 1))])
    return np.diff(edges, axis=1)

"""The Alexander trick: chessboard-coloured simplices mapped alternately onto
a model simplex and onto its complement in the extended space.

Vertices carry labels ``0..n`` (every top simplex sees each label once), so a
vertex ``p`` with label ``i`` always goes to the model vertex ``q_i``.  The
model simplex ``tau0`` is the regular ``n``-simplex inscribed in the unit
sphere with barycentre at the origin.  Positive pieces are the affine map
``tau -> tau0``; negative pieces are ``R^-1 . inv . R . A`` where ``R`` is the
radial stretch of ``tau0`` onto the unit ball and ``inv(z) = z/|z|^2``.
``R^-1`` is positively homogeneous, so it carries the outside of the ball
onto the outside of ``tau0``.  The barycentre of a negative piece goes to
infinity.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations, permutations

import numpy as np

from .complex import Complex, ComplexError, Simplex
from .geometry import DEFAULT_TOL, barycentric, sobol_simplex_samples

PRINTED_FORM = "|f'(x)| <= K J_f(x)"


class AlexanderError(ComplexError):
    pass


@lru_cache(maxsize=None)
def model_simplex(n: int) -> np.ndarray:
    """Vertices ``q_0..q_n`` of the regular simplex inscribed in the unit
    sphere of ``R^n``, barycentre at the origin, positively ordered."""
    V = np.eye(n + 1) - 1.0 / (n + 1)
    # Helmert basis of the hyperplane sum(x) = 0
    H = np.zeros((n + 1, n))
    for k in range(1, n + 1):
        H[:k, k - 1] = 1.0
        H[k, k - 1] = -k
        H[:, k - 1] /= math.sqrt(k * (k + 1))
    Q = V @ H
    Q /= np.linalg.norm(Q, axis=1, keepdims=True)
    if np.linalg.det((Q[1:] - Q[0]).T) < 0:
        Q[:, -1] *= -1
    Q.setflags(write=False)
    return Q


# ---------------------------------------------------------------------------
# colouring
# ---------------------------------------------------------------------------

@dataclass
class ChessColoring:
    color: dict[Simplex, int]
    consistent: bool
    complex: Complex
    labels: dict[int, int] = field(default_factory=dict)
    orientation: dict[Simplex, int] = field(default_factory=dict)
    subdivided: bool = False


def _perm_sign(seq) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def _dual_bipartite(c: Complex) -> bool:
    side: dict[Simplex, int] = {}
    for root in c.simplices:
        if root in side:
            continue
        side[root] = 0
        queue = deque([root])
        while queue:
            s = queue.popleft()
            for f in combinations(s, len(s) - 1):
                for t in c.facet_adjacency.get(f, ()):
                    if t == s:
                        continue
                    if t not in side:
                        side[t] = 1 - side[s]
                        queue.append(t)
                    elif side[t] == side[s]:
                        return False
    return True


def _vertex_labels(c: Complex) -> dict[int, int] | None:
    """Labels ``0..n`` rainbow on every top simplex, propagated across
    facets; ``None`` when propagation conflicts."""
    labels: dict[int, int] = {}
    full = set(range(c.dim + 1))
    for root in c.simplices:
        if all(v in labels for v in root):
            continue
        free = iter(sorted(full - {labels[v] for v in root if v in labels}))
        for v in root:
            if v not in labels:
                labels[v] = next(free)
        queue = deque([root])
        seen = {root}
        while queue:
            s = queue.popleft()
            if {labels.get(v) for v in s} != full:
                return None
            for f in combinations(s, len(s) - 1):
                missing = (full - {labels[v] for v in f}).pop()
                for t in c.facet_adjacency.get(f, ()):
                    if t in seen:
                        continue
                    (w,) = set(t) - set(f)
                    if labels.setdefault(w, missing) != missing:
                        return None
                    seen.add(t)
                    queue.append(t)
    return labels


def _orientation(c: Complex) -> dict[Simplex, int] | None:
    """Coherent orientation signs of the sorted vertex order; geometric when
    the complex is full-dimensional, propagated across facets otherwise."""
    n = c.dim
    if c.ambient_dim == n:
        out = {}
        for s in c.simplices:
            X = c.coords(s)
            out[s] = 1 if np.linalg.det((X[1:] - X[0]).T) > 0 else -1
        return out
    out: dict[Simplex, int] = {}
    for root in c.simplices:
        if root in out:
            continue
        out[root] = 1
        queue = deque([root])
        while queue:
            s = queue.popleft()
            for i in range(len(s)):
                f = s[:i] + s[i + 1:]
                # facet sign induced by (s, out[s]) on sorted f
                induced = out[s] * (-1) ** i
                for t in c.facet_adjacency.get(f, ()):
                    if t == s:
                        continue
                    j = next(k for k, v in enumerate(t) if v not in f)
                    want = -induced * (-1) ** j
                    if t not in out:
                        out[t] = want
                        queue.append(t)
                    elif out[t] != want:
                        return None
    return out


def barycentric_subdivision(c: Complex) -> Complex:
    """First barycentric subdivision; original vertex ids are kept and face
    barycentres follow in sorted face order."""
    pts = [p for p in c.points]
    index = {(v,): v for v in c.vertex_ids}
    for f in sorted(c.faces, key=lambda f: (len(f), f)):
        if len(f) > 1:
            index[f] = len(pts)
            pts.append(c.coords(f).mean(axis=0))
    simplices = []
    for s in c.simplices:
        for perm in permutations(s):
            simplices.append(tuple(index[tuple(sorted(perm[:k + 1]))] for k in range(len(s))))
    return Complex(np.array(pts), simplices)


def chessboard_color(c: Complex) -> ChessColoring:
    if c.is_empty:
        return ChessColoring({}, True, c)
    if not c.is_pure():
        raise AlexanderError("chessboard colouring needs a pure complex")
    for f, owners in c.facet_adjacency.items():
        if len(owners) > 2:
            raise AlexanderError(f"facet {f} shared by {len(owners)} top simplices")
    subdivided = False
    labels = _vertex_labels(c) if _dual_bipartite(c) else None
    if labels is None:
        c = barycentric_subdivision(c)
        subdivided = True
        labels = _vertex_labels(c)
        if labels is None:
            raise AlexanderError("no vertex labelling even after subdivision")
    orient = _orientation(c)
    if orient is None:
        raise AlexanderError("complex is not orientable")
    color = {s: orient[s] * _perm_sign([labels[v] for v in s]) for s in c.simplices}
    ok = all(len(o) < 2 or color[o[0]] != color[o[1]] for o in c.facet_adjacency.values())
    return ChessColoring(color, ok, c, labels, orient, subdivided)


# ---------------------------------------------------------------------------
# radial stretch
# ---------------------------------------------------------------------------

def _gauge(Y: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Minkowski gauge of ``tau0`` and the index of the active facet."""
    proj = -Y @ model_simplex(n).T * n
    k = np.argmax(proj, axis=-1)
    return np.take_along_axis(proj, k[..., None], -1)[..., 0], k


def stretch_model(Y: np.ndarray) -> np.ndarray:
    """``tau0 -> closed unit ball``: each ray is scaled linearly so that
    ``d tau0`` lands on the unit sphere."""
    Y = np.atleast_2d(Y)
    rho, _ = _gauge(Y, Y.shape[1])
    r = np.linalg.norm(Y, axis=1)
    out = np.zeros_like(Y)
    nz = r > 0
    out[nz] = Y[nz] * (rho[nz] / r[nz])[:, None]
    return out


def unstretch_model(Z: np.ndarray) -> np.ndarray:
    """Inverse of :func:`stretch_model`, extended homogeneously to ``R^n``."""
    Z = np.atleast_2d(Z)
    rho, _ = _gauge(Z, Z.shape[1])
    r = np.linalg.norm(Z, axis=1)
    out = np.zeros_like(Z)
    nz = r > 0
    out[nz] = Z[nz] * (r[nz] / rho[nz])[:, None]
    return out


def _frame(X: np.ndarray, sign: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Origin and orthonormal frame of the affine hull of ``X``; the frame is
    oriented so that ``X`` in its listed order has orientation ``sign``."""
    E = (X[1:] - X[0]).T
    Q, R = np.linalg.qr(E)
    Q = Q * np.sign(np.diag(R))
    if sign < 0:
        Q[:, -1] *= -1
    return X[0], Q


def _affine_to_model(X: np.ndarray, sign: int = 1):
    """Affine map ``u -> tau0`` on frame coordinates sending ``X[i]`` to
    ``q_i``; returns ``(origin, frame, M)`` with ``y = q_0 + M U^T (x - o)``."""
    n = len(X) - 1
    o, U = _frame(X, sign) if X.shape[1] != n else (X[0], np.eye(n))
    E = U.T @ (X[1:] - X[0]).T
    q = model_simplex(n)
    M = (q[1:] - q[0]).T @ np.linalg.inv(E)
    return o, U, M


def radial_stretch(tau, x) -> np.ndarray:
    """Radial linear stretching of ``tau`` onto the closed unit ball."""
    X = np.asarray(tau, dtype=float)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    b = barycentric(X, x) if x.shape[0] > 1 else barycentric(X, x[0])[None]
    if (b < -1e-9).any():
        raise AlexanderError("point outside the simplex")
    o, U, M = _affine_to_model(X)
    Y = model_simplex(len(X) - 1)[0] + (x - o) @ U @ M.T
    out = stretch_model(Y)
    return out[0] if len(out) == 1 else out


def radial_stretch_inverse(tau, z) -> np.ndarray:
    X = np.asarray(tau, dtype=float)
    z = np.atleast_2d(np.asarray(z, dtype=float))
    o, U, M = _affine_to_model(X)
    Y = unstretch_model(z)
    x = o + (Y - model_simplex(len(X) - 1)[0]) @ np.linalg.inv(M).T @ U.T
    return x[0] if len(x) == 1 else x


# ---------------------------------------------------------------------------
# piecewise map
# ---------------------------------------------------------------------------

@dataclass
class Piece:
    simplex: Simplex            # vertices listed in label order
    color: int
    origin: np.ndarray
    frame: np.ndarray
    M: np.ndarray


@dataclass
class PiecewiseMap:
    source: Complex
    coloring: ChessColoring
    target_simplex: np.ndarray
    per_simplex_map: dict[Simplex, Piece]

    @property
    def n(self) -> int:
        return self.target_simplex.shape[1]

    def local(self, s: Simplex, x) -> np.ndarray:
        """Model coordinates ``A(x)`` of points of the top simplex ``s``."""
        p = self.per_simplex_map[s]
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.target_simplex[0] + (x - p.origin) @ p.frame @ p.M.T

    def evaluate(self, s: Simplex, x) -> np.ndarray:
        """Images of points of ``s``; rows of ``inf`` for the barycentre of a
        negative piece."""
        Y = self.local(s, x)
        if self.per_simplex_map[s].color > 0:
            return Y
        Z = stretch_model(Y)
        r2 = np.einsum("ij,ij->i", Z, Z)
        out = np.full_like(Z, np.inf)
        nz = r2 > 0
        out[nz] = unstretch_model(Z[nz] / r2[nz, None])
        return out

    def differential(self, s: Simplex, x) -> np.ndarray:
        """Closed-form ``f'`` (shape ``(m, n, n)``) in frame coordinates."""
        p = self.per_simplex_map[s]
        Y = self.local(s, x)
        m, n = Y.shape
        A = np.broadcast_to(p.M, (m, n, n))
        if p.color > 0:
            return np.array(A)
        I = np.eye(n)
        q = self.target_simplex
        # R(y) = rho(y) y/|y|
        r = np.linalg.norm(Y, axis=1)
        rho, k = _gauge(Y, n)
        g = -n * q[k]
        u = Y / r[:, None]
        DR = (u[:, :, None] * g[:, None, :]
              + (rho / r)[:, None, None] * (I - u[:, :, None] * u[:, None, :]))
        Z = Y * (rho / r)[:, None]
        # inversion
        z2 = np.einsum("ij,ij->i", Z, Z)
        W = Z / z2[:, None]
        DI = (I - 2 * Z[:, :, None] * Z[:, None, :] / z2[:, None, None]) / z2[:, None, None]
        # R^-1(w) = w |w| / rho(w)
        rw = np.linalg.norm(W, axis=1)
        rhow, kw = _gauge(W, n)
        gw = -n * q[kw]
        DRi = ((rw / rhow)[:, None, None] * I
               + (W[:, :, None] * (W / rw[:, None])[:, None, :]) / rhow[:, None, None]
               - (W * (rw / rhow ** 2)[:, None])[:, :, None] * gw[:, None, :])
        return DRi @ DI @ DR @ A


def build_alexander_map(c: Complex, coloring: ChessColoring | None = None) -> PiecewiseMap:
    coloring = chessboard_color(c) if coloring is None else coloring
    src = coloring.complex
    if not coloring.consistent:
        raise AlexanderError("colouring is not proper")
    n = src.dim
    pieces = {}
    for s in src.simplices:
        ordered = tuple(sorted(s, key=lambda v: coloring.labels[v]))
        X = src.coords(ordered)
        sign = coloring.orientation[s] * _perm_sign(ordered)
        o, U, M = _affine_to_model(X, sign)
        pieces[s] = Piece(ordered, coloring.color[s], o, U, M)
    return PiecewiseMap(src, coloring, model_simplex(n), pieces)


# ---------------------------------------------------------------------------
# dilatation
# ---------------------------------------------------------------------------

@dataclass
class DilatationReport:
    K_outer: float
    samples: int
    per_simplex_max: dict[Simplex, float]
    branching_skeleton_dim: int
    normalization: str = "||f'||^n / J_f"
    printed_form: str = PRINTED_FORM

    def rows(self, c: Complex) -> list[tuple[int, float]]:
        return [(i, self.per_simplex_max[s]) for i, s in enumerate(c.simplices)]


def sample_points(n: int, count: int) -> np.ndarray:
    """Barycentric sample rows: Sobol points plus all face barycentres."""
    bary = [sobol_simplex_samples(n, count)]
    for k in range(1, n + 2):
        for f in combinations(range(n + 1), k):
            row = np.zeros(n + 1)
            row[list(f)] = 1.0 / k
            bary.append(row[None])
    return np.vstack(bary)


def estimate_dilatation(m: PiecewiseMap, samples_per_simplex: int = 256, seed: int | None = None,
                        tol: float = 1e-6) -> DilatationReport:
    if samples_per_simplex < 100:
        raise AlexanderError("at least 100 samples per simplex")
    n = m.n
    base = sample_points(n, samples_per_simplex)
    if seed is not None:
        extra = np.random.default_rng(seed).dirichlet(np.ones(n + 1), samples_per_simplex)
        base = np.vstack([base, extra])
    # away from the (n-2)-skeleton and from the stretch centre
    keep = np.sort(base, axis=1)[:, 1] > tol if n >= 2 else np.ones(len(base), bool)
    center = np.abs(base - 1.0 / (n + 1)).max(axis=1) > tol
    base = base[keep & center]
    per = {}
    total = 0
    for s, p in m.per_simplex_map.items():
        X = m.source.coords(p.simplex)
        D = m.differential(s, base @ X)
        J = np.linalg.det(D)
        if not (J > 0).all():
            raise AlexanderError(f"non-positive Jacobian in simplex {s}")
        norm = np.linalg.norm(D, ord=2, axis=(1, 2))
        per[s] = float((norm ** n / J).max())
        total += len(base)
    K = max(per.values(), default=1.0)
    return DilatationReport(K, total, per, max(n - 2, -1))


def continuity_residual(m: PiecewiseMap, samples_per_face: int = 1000) -> float:
    """Largest disagreement of the two one-sided images over sampled points
    of every interior codimension-1 face."""
    src = m.source
    n = src.dim
    worst = 0.0
    B = sobol_simplex_samples(n - 1, samples_per_face) if n >= 1 else np.ones((1, 1))
    for f, owners in src.facet_adjacency.items():
        if len(owners) != 2:
            continue
        x = B @ src.coords(f)
        a = m.evaluate(owners[0], x)
        b = m.evaluate(owners[1], x)
        scale = np.maximum(1.0, np.abs(a).max(axis=1))
        worst = max(worst, float((np.abs(a - b).max(axis=1) / scale).max()))
    return worst

"""Simplex volumes, diameters, fatness and internal angles."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .complex import Complex, ComplexError, Simplex
from .geometry import as_points, subsets

HISTOGRAM_BINS = 10


def gram_root(E: np.ndarray) -> np.ndarray:
    """``sqrt(det(E E^T))`` for edge matrices ``E`` of shape ``(..., k, N)``.

    Computed as the product of ``|R_ii|`` from a QR factorisation of
    ``E^T``, which avoids squaring the conditioning of ``E``.
    """
    R = np.linalg.qr(np.swapaxes(E, -1, -2), mode="r")
    return np.abs(np.diagonal(R, axis1=-2, axis2=-1)).prod(axis=-1)


def simplex_volume(points) -> float:
    """k-dimensional Euclidean volume from the Gram determinant of edge vectors.

    A single point has volume 1 by convention.
    """
    pts = as_points(points)
    k = len(pts) - 1
    if k < 0:
        raise ComplexError("empty simplex")
    if k > pts.shape[1]:
        raise ComplexError(f"{k}-simplex cannot live in R^{pts.shape[1]}")
    if k == 0:
        return 1.0
    E = pts[1:] - pts[0]
    return float(gram_root(E)) / math.factorial(k)


def simplex_diameter(points) -> float:
    if np.asarray(points).size == 0:
        raise ComplexError("diameter of an empty point set")
    pts = as_points(points)
    if len(pts) == 1:
        return 0.0
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diff ** 2).sum(-1)).max())


def fatness_of_points(points) -> float:
    """Minimum of Vol(f)/diam(f)^dim(f) over every face f, vertices counting 1."""
    if np.asarray(points).size == 0:
        raise ComplexError("fatness of an empty simplex")
    pts = as_points(points)
    best = 1.0
    for idx in subsets(len(pts), 2):
        face = pts[list(idx)]
        d = simplex_diameter(face)
        if d == 0.0:
            return 0.0
        ratio = simplex_volume(face) / d ** (len(idx) - 1)
        best = min(best, ratio)
    return best


def batch_fatness(simplices: np.ndarray) -> np.ndarray:
    """Vectorised fatness for an array of shape ``(batch, k+1, N)``."""
    S = np.asarray(simplices, dtype=float)
    batch, n, _ = S.shape
    best = np.ones(batch)
    for idx in subsets(n, 2):
        F = S[:, list(idx)]
        k = len(idx) - 1
        E = F[:, 1:] - F[:, :1]
        vol = gram_root(E) / math.factorial(k)
        diff = F[:, :, None, :] - F[:, None, :, :]
        diam = np.sqrt((diff ** 2).sum(-1)).reshape(batch, -1).max(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(diam > 0, vol / diam ** k, 0.0)
        best = np.minimum(best, ratio)
    return best


def fatness(s: Simplex, c: Complex) -> float:
    return fatness_of_points(c.coords(s))


@dataclass
class FatnessReport:
    per_simplex: dict[Simplex, float] = field(default_factory=dict)
    complex_min: float = math.nan
    argmin: Simplex | None = None
    histogram: list[int] = field(default_factory=lambda: [0] * HISTOGRAM_BINS)

    def rows(self, c: Complex) -> list[tuple[int, float]]:
        """``(simplex index, phi)`` rows in the complex's simplex order."""
        return [(i, self.per_simplex[s]) for i, s in enumerate(c.simplices)]


def complex_fatness(c: Complex) -> FatnessReport:
    report = FatnessReport()
    if c.is_empty:
        return report
    for s in c.simplices:
        report.per_simplex[s] = fatness(s, c)
    report.argmin = min(report.per_simplex, key=lambda s: (report.per_simplex[s], s))
    report.complex_min = report.per_simplex[report.argmin]
    counts = np.histogram(list(report.per_simplex.values()), bins=HISTOGRAM_BINS,
                          range=(0.0, 1.0))[0]
    report.histogram = [int(x) for x in counts]
    return report


# ---------------------------------------------------------------------------
# internal angles
# ---------------------------------------------------------------------------

@dataclass
class AngleReport:
    """Internal angles at faces of codimension >= 2.

    Codimension 2 entries are dihedral angles in radians; codimension 3 and 4
    entries are solid angles of the normal cone (steradians and their 3-sphere
    analogue).  ``min_dihedral`` is taken over codimension 2 only.
    """

    min_dihedral: float
    per_face: dict[Simplex, float] = field(default_factory=dict)


def _normal_cone_vectors(pts: np.ndarray, face: tuple[int, ...]) -> np.ndarray:
    others = [i for i in range(len(pts)) if i not in face]
    base = pts[face[0]]
    F = (pts[list(face[1:])] - base).T
    vecs = pts[others] - base
    if F.shape[1]:
        q, _ = np.linalg.qr(F)
        vecs = vecs - (vecs @ q) @ q.T
    return vecs


def _solid_angle_3(u: np.ndarray) -> float:
    a, b, c = u
    na, nb, nc = (np.linalg.norm(x) for x in (a, b, c))
    num = abs(float(np.linalg.det(np.array([a, b, c]))))
    den = na * nb * nc + (a @ b) * nc + (a @ c) * nb + (b @ c) * na
    return 2.0 * math.atan2(num, den)


_QMC_NORMALS: dict[int, np.ndarray] = {}


def _solid_angle_general(u: np.ndarray) -> float:
    m = u.shape[0]
    if m not in _QMC_NORMALS:
        from scipy.stats import norm, qmc
        raw = qmc.Sobol(d=m, scramble=False).random_base2(15)[1:]
        _QMC_NORMALS[m] = norm.ppf(raw)
    z = _QMC_NORMALS[m]
    # cone membership: nonnegative coordinates in the basis u
    coef = np.linalg.solve(u.T, z.T).T
    frac = float(np.mean(np.all(coef >= 0, axis=1)))
    sphere = 2 * math.pi ** (m / 2) / math.gamma(m / 2)
    return frac * sphere


def angle_at_face(pts: np.ndarray, face: tuple[int, ...]) -> float:
    vecs = _normal_cone_vectors(pts, face)
    m = len(vecs)
    if m == 2:
        a, b = vecs
        cosv = a @ b / (np.linalg.norm(a) * np.linalg.norm(b))
        return float(np.arccos(np.clip(cosv, -1.0, 1.0)))
    # express in an orthonormal basis of the normal space
    q, _ = np.linalg.qr(vecs.T)
    u = vecs @ q
    if m == 3:
        return _solid_angle_3(u)
    return _solid_angle_general(u)


def dihedral_angles(s: Simplex, c: Complex) -> AngleReport:
    pts = c.coords(s)
    k = len(s) - 1
    if k < 1:
        raise ComplexError("angles need a simplex of dimension >= 1")
    if fatness_of_points(pts) <= 0.0:
        raise ComplexError(f"degenerate simplex {s}")
    if k == 1:
        return AngleReport(min_dihedral=math.pi)
    per_face: dict[Simplex, float] = {}
    for size in range(1, k):
        for local in itertools.combinations(range(k + 1), size):
            per_face[tuple(s[i] for i in local)] = angle_at_face(pts, local)
    min_d = min(v for f, v in per_face.items() if len(f) == k - 1)
    return AngleReport(min_dihedral=min_d, per_face=per_face)

"""Layered prism triangulations of ``|J| x [0, depth]`` over a boundary complex.

Each prism ``sigma x [k/n0, (k+1)/n0]`` is split by the vertex-order
staircase rule

    S_j = (a_0, ..., a_j, b_j, ..., b_k),   j = 0..k

where ``a`` is the lower copy of the (sorted) vertices of ``sigma`` and ``b``
the upper copy.  Because the split only depends on the global vertex order,
neighbouring prisms induce the same diagonals on their shared vertical faces
and horizontal slices are never subdivided.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import median

import numpy as np

from .complex import Complex, ComplexError, validate
from .metrics import complex_fatness, simplex_diameter

MAX_N0 = 2 ** 16


class CollarInfeasible(ComplexError):
    def __init__(self, message: str, best_phi: float):
        super().__init__(message)
        self.best_phi = best_phi


@dataclass(frozen=True)
class CollarSpec:
    n0: int
    depth: float = 1.0
    target_phi: float = 0.1
    vertical_scale: float = 1.0

    def __post_init__(self):
        if self.n0 < 1:
            raise ComplexError("n0 must be >= 1")
        if not 0 < self.depth <= 1:
            raise ComplexError("depth must lie in (0, 1]")
        if not 0 < self.target_phi < 1:
            raise ComplexError("target_phi must lie in (0, 1)")
        if self.vertical_scale <= 0:
            raise ComplexError("vertical_scale must be positive")

    @property
    def layers(self) -> int:
        """Number of realised layers; depth is rounded to a multiple of 1/n0."""
        return max(1, int(math.floor(self.depth * self.n0 + 1e-9)))


@dataclass(frozen=True)
class CollarRegions:
    k1: int
    k2: int
    k3: int
    k4: int
    n0: int = 0


def collar_regions(spec: CollarSpec | int) -> CollarRegions:
    n0 = spec if isinstance(spec, int) else spec.n0
    if n0 < 6:
        raise ComplexError(f"collar regions need n0 >= 6 (got {n0}); raise n0")
    return CollarRegions(k1=(5 * n0) // 6, k2=(4 * n0) // 5, k3=(3 * n0) // 4,
                         k4=n0 // 2, n0=n0)


def slice_ids(J: Complex, layer: int) -> np.ndarray:
    """Collar vertex ids of the horizontal slice at ``layer``."""
    return layer * len(J.points) + np.arange(len(J.points))


def vertex_layer(J: Complex, vid: int) -> int:
    return vid // len(J.points)


def _layer_points(J: Complex, spec: CollarSpec, layer: int, embedding: str,
                  center: np.ndarray | None) -> np.ndarray:
    t = layer / spec.n0
    if embedding == "product":
        h = np.full((len(J.points), 1), t * spec.vertical_scale)
        return np.hstack([J.points, h])
    if layer == 0:
        return J.points.copy()  # the boundary slice is the input, bit for bit
    factor = 1.0 - t * spec.vertical_scale
    return center + (J.points - center) * factor


def build_prism_complex(J: Complex, spec: CollarSpec, embedding: str = "product",
                        center=None) -> Complex:
    """Staircase triangulation of the collar over ``J``.

    ``embedding="product"`` realises ``|J| x [0, depth]`` in one more
    dimension, the height of the full unit interval being
    ``spec.vertical_scale``.  ``embedding="radial"`` keeps the ambient space
    and shrinks ``J`` towards ``center`` (default: vertex centroid), the
    slice at parameter ``t`` being scaled by ``1 - t * vertical_scale``; this
    is the flat-chart collar of a closed star-shaped hypersurface.
    """
    if embedding not in ("product", "radial"):
        raise ComplexError(f"unknown embedding {embedding!r}")
    if J.is_empty:
        extra = 1 if embedding == "product" else 0
        return Complex.empty(J.ambient_dim + extra)
    problems = validate(J)
    if problems:
        raise ComplexError(f"boundary complex is invalid: {problems[0]}")
    m = spec.layers
    if embedding == "radial":
        if m / spec.n0 * spec.vertical_scale >= 1:
            raise ComplexError("radial collar would collapse onto its center")
        center = (J.points[list(J.vertex_ids)].mean(axis=0) if center is None
                  else np.asarray(center, dtype=float))
    nv = len(J.points)
    points = np.vstack([_layer_points(J, spec, l, embedding, center)
                        for l in range(m + 1)])
    simplices = []
    for layer in range(m):
        lo, hi = layer * nv, (layer + 1) * nv
        for s in J.simplices:
            for j in range(len(s)):
                simplices.append(tuple(lo + v for v in s[:j + 1])
                                 + tuple(hi + v for v in s[j:]))
    return Complex(points, simplices)


def _measure(J: Complex, n0: int, thickness: float, embedding: str):
    if embedding == "product":
        spec = CollarSpec(n0=n0, depth=1.0 / n0, target_phi=0.5,
                          vertical_scale=thickness)
    else:
        spec = CollarSpec(n0=n0, depth=1.0, target_phi=0.5, vertical_scale=thickness)
    K = build_prism_complex(J, spec, embedding)
    phi = complex_fatness(K).complex_min
    diam = max(simplex_diameter(K.coords(s)) for s in K.simplices)
    return phi, diam


def median_edge_length(J: Complex) -> float:
    edges = J.faces_of_dim(1)
    if not edges:
        raise ComplexError("boundary complex has no edges")
    return median(float(np.linalg.norm(np.subtract(*J.coords(e)))) for e in edges)


def choose_n0(J: Complex, target_phi: float, interior_diam_bound: float,
              thickness: float | None = None, embedding: str = "product") -> CollarSpec:
    """Smallest layer count whose collar is ``target_phi``-fat and fine enough.

    ``thickness`` (the collar height, i.e. ``vertical_scale``) defaults to
    the median boundary edge length.  Layer counts are probed by doubling up
    to ``2**16``; the first feasible power of two is then bisected against
    its predecessor.  Every probe is a real build measured with
    :func:`complex_fatness`.
    """
    if not 0 < target_phi < 1:
        raise ComplexError("target_phi must lie in (0, 1)")
    if thickness is None:
        thickness = median_edge_length(J)
        if embedding == "radial":
            thickness = 0.5
    cache: dict[int, tuple[float, float]] = {}

    def ok(n0: int) -> bool:
        if n0 not in cache:
            cache[n0] = _measure(J, n0, thickness, embedding)
        phi, diam = cache[n0]
        return phi >= target_phi and diam <= interior_diam_bound

    n0 = 1
    found = None
    while n0 <= MAX_N0:
        if ok(n0):
            found = n0
            break
        # layers become thinner than the boundary simplices: fatness only drops
        if n0 > 1 and cache[n0][0] < cache[n0 // 2][0] and cache[n0][1] <= interior_diam_bound:
            break
        n0 *= 2
    if found is None:
        best = max(v[0] for v in cache.values())
        finest = min(v[1] for v in cache.values())
        raise CollarInfeasible(
            f"no collar with n0 <= {MAX_N0} reaches fatness {target_phi} with "
            f"diameter <= {interior_diam_bound} (best fatness {best:.6g}, "
            f"smallest diameter {finest:.6g})", best)
    lo, hi = found // 2, found
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return CollarSpec(n0=hi, depth=1.0, target_phi=target_phi, vertical_scale=thickness)

"""Small reference complexes used by tests, examples and the CLI."""
from __future__ import annotations

import itertools
import math

import numpy as np

from .complex import Complex


def triangle_grid(nx: int, ny: int, h: float = 1.0, origin=(0.0, 0.0),
                  equilateral: bool = True) -> Complex:
    """Triangulated parallelogram (equilateral) or rectangle (right triangles).

    With ``equilateral=True`` every triangle has side ``h``; rows are sheared
    by ``h/2`` so the outline is a parallelogram.
    """
    ox, oy = origin
    pts = []
    for j in range(ny + 1):
        for i in range(nx + 1):
            if equilateral:
                pts.append((ox + h * (i + 0.5 * j), oy + h * j * math.sqrt(3) / 2))
            else:
                pts.append((ox + h * i, oy + h * j))
    vid = lambda i, j: j * (nx + 1) + i
    tris = []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1)
            tris += [(a, b, c), (b, d, c)]
    return Complex(np.array(pts), tris)


def kuhn_grid(shape, h: float = 1.0, origin=None) -> Complex:
    """Freudenthal (Kuhn) triangulation of a box of ``shape`` unit cubes."""
    shape = tuple(int(s) for s in shape)
    n = len(shape)
    origin = np.zeros(n) if origin is None else np.asarray(origin, dtype=float)
    dims = [s + 1 for s in shape]
    grid = np.array(list(itertools.product(*[range(d) for d in dims])), dtype=float)
    strides = np.cumprod([1] + dims[::-1][:-1])[::-1]

    def vid(c):
        return int(np.dot(c, strides))

    simplices = []
    for cube in itertools.product(*[range(s) for s in shape]):
        base = np.array(cube)
        for perm in itertools.permutations(range(n)):
            c = base.copy()
            verts = [vid(c)]
            for axis in perm:
                c[axis] += 1
                verts.append(vid(c))
            simplices.append(tuple(verts))
    return Complex(origin + h * grid, simplices)


def regular_polygon(m: int = 12, radius: float = 1.0, center=(0.0, 0.0)) -> Complex:
    """Closed polygon as a 1-complex (the triangulated circle)."""
    a = 2 * math.pi * np.arange(m) / m
    pts = np.c_[radius * np.cos(a), radius * np.sin(a)] + np.asarray(center, dtype=float)
    return Complex(pts, [(i, (i + 1) % m) for i in range(m)])


def octahedron(radius: float = 1.0) -> Complex:
    pts = radius * np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1.0]])
    faces = [(a, b, c) for a in (0, 1) for b in (2, 3) for c in (4, 5)]
    return Complex(pts, faces)


def icosahedron(radius: float = 1.0) -> Complex:
    g = (1 + math.sqrt(5)) / 2
    pts = []
    for s1 in (-1, 1):
        for s2 in (-1, 1):
            pts += [(0, s1, s2 * g), (s1, s2 * g, 0), (s2 * g, 0, s1)]
    pts = np.array(pts, dtype=float)
    pts *= radius / np.linalg.norm(pts[0])
    d = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    edge = d[d > 1e-9].min()
    adj = np.abs(d - edge) < 1e-6 * radius
    faces = [f for f in itertools.combinations(range(12), 3)
             if adj[f[0], f[1]] and adj[f[1], f[2]] and adj[f[0], f[2]]]
    return Complex(pts, faces)


def clip_to_ball(K: Complex, radius: float, center=None) -> Complex:
    """Top simplices of ``K`` with every vertex inside the closed ball."""
    center = np.zeros(K.ambient_dim) if center is None else np.asarray(center, dtype=float)
    inside = np.linalg.norm(K.points - center, axis=1) <= radius + 1e-12
    keep = [s for s in K.simplices if inside[list(s)].all()]
    return Complex(K.points, keep).compact()


def disk_mesh(radius: float, h: float) -> Complex:
    """Equilateral triangles of side ``h`` inside a disk (centred grid)."""
    m = int(math.ceil(2 * radius / h)) + 2
    K = triangle_grid(2 * m, 2 * m, h, origin=(0.0, 0.0))
    shift = K.points[(m) * (2 * m + 1) + m]
    K = Complex(K.points - shift, K.simplices)
    return clip_to_ball(K, radius)


def ball_mesh(radius: float, h: float) -> Complex:
    """Kuhn tetrahedra of edge ``h`` inside a ball, centred on a grid node."""
    m = int(math.ceil(radius / h)) + 1
    K = kuhn_grid((2 * m,) * 3, h, origin=(-m * h,) * 3)
    return clip_to_ball(K, radius)


def fatness_ladder(steps: int = 6) -> list[np.ndarray]:
    """Triangles ``(0,0), (1,0), (1/2, a)`` with apex heights halving."""
    return [np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2 / 2 ** k]])
            for k in range(steps)]


def kite(triangle) -> Complex:
    """A triangle glued to its mirror image across its first edge."""
    T = np.asarray(triangle, dtype=float)
    a, b, c = T
    u = (b - a) / np.linalg.norm(b - a)
    foot = a + u * np.dot(c - a, u)
    return Complex(np.vstack([T, 2 * foot - c]), [(0, 1, 2), (0, 1, 3)])


def segment(length: float = 1.0) -> Complex:
    return Complex(np.array([[0.0], [length]]), [(0, 1)])

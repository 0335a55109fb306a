"""Mesh files: the native line-record FMESH format and OFF.

FMESH layout::

    FMESH 1
    dim N
    v x_1 ... x_N
    s i_1 ... i_{k+1}

Coordinates are written with ``repr`` so parsing returns the same doubles.
Blank lines and ``#`` comments are ignored on input.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .complex import Complex, ComplexError

MAGIC = "FMESH 1"


class MeshFormatError(ComplexError):
    """Malformed or inconsistent mesh file."""


def _fmt(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise MeshFormatError(f"non-finite coordinate {x!r}")
    return repr(x + 0.0)  # folds -0.0


def dumps_fmesh(c: Complex) -> str:
    lines = [MAGIC, f"dim {c.ambient_dim}"]
    lines += ["v " + " ".join(_fmt(x) for x in p) for p in c.points]
    lines += ["s " + " ".join(str(int(i)) for i in s) for s in c.simplices]
    return "\n".join(lines) + "\n"


def _records(text: str):
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield no, line


def loads_fmesh(text: str) -> Complex:
    recs = list(_records(text))
    if not recs or recs[0][1] != MAGIC:
        raise MeshFormatError(f"missing '{MAGIC}' header")
    if len(recs) < 2 or recs[1][1].split()[0] != "dim":
        raise MeshFormatError("missing 'dim N' record")
    try:
        n = int(recs[1][1].split()[1])
    except (IndexError, ValueError):
        raise MeshFormatError(f"line {recs[1][0]}: bad dim record") from None
    if n < 1:
        raise MeshFormatError("ambient dimension must be positive")
    pts, simplices = [], []
    for no, line in recs[2:]:
        tag, *rest = line.split()
        try:
            if tag == "v":
                if len(rest) != n:
                    raise MeshFormatError(f"line {no}: expected {n} coordinates")
                p = [float(x) for x in rest]
                if not all(map(math.isfinite, p)):
                    raise MeshFormatError(f"line {no}: non-finite coordinate")
                pts.append(p)
            elif tag == "s":
                s = tuple(int(x) for x in rest)
                if not s or len(set(s)) != len(s):
                    raise MeshFormatError(f"line {no}: bad simplex record")
                simplices.append(s)
            else:
                raise MeshFormatError(f"line {no}: unknown record '{tag}'")
        except MeshFormatError:
            raise
        except ValueError as e:
            raise MeshFormatError(f"line {no}: {e}") from None
    return _checked(np.array(pts, dtype=float).reshape(-1, n), simplices)


def _checked(points: np.ndarray, simplices) -> Complex:
    nv = len(points)
    for s in simplices:
        if min(s) < 0 or max(s) >= nv:
            raise MeshFormatError(f"simplex {s} references a missing vertex")
        if len(s) > points.shape[1] + 1:
            raise MeshFormatError(f"simplex {s} too large for ambient dimension")
    return Complex(points, simplices)


def dumps_off(c: Complex) -> str:
    """OFF export of a complex in R^3 (faces are the top simplices)."""
    if c.ambient_dim != 3:
        raise MeshFormatError("OFF needs ambient dimension 3")
    lines = ["OFF", f"{len(c.points)} {len(c.simplices)} 0"]
    lines += [" ".join(_fmt(x) for x in p) for p in c.points]
    lines += [f"{len(s)} " + " ".join(str(i) for i in s) for s in c.simplices]
    return "\n".join(lines) + "\n"


def loads_off(text: str) -> Complex:
    recs = [line for _, line in _records(text)]
    if not recs or not recs[0].startswith("OFF"):
        raise MeshFormatError("missing OFF header")
    head = recs[0][3:].split() or None
    body = recs[1:]
    if head is None:
        if not body:
            raise MeshFormatError("missing OFF counts")
        head, body = body[0].split(), body[1:]
    try:
        nv, nf = int(head[0]), int(head[1])
        if len(body) < nv + nf:
            raise MeshFormatError("truncated OFF file")
        pts = np.array([[float(x) for x in body[i].split()[:3]] for i in range(nv)],
                       dtype=float).reshape(-1, 3)
        faces = []
        for line in body[nv:nv + nf]:
            toks = [int(x) for x in line.split()]
            k = toks[0]
            if len(toks) < k + 1:
                raise MeshFormatError(f"short face record '{line}'")
            faces.append(tuple(toks[1:k + 1]))
    except MeshFormatError:
        raise
    except (IndexError, ValueError) as e:
        raise MeshFormatError(f"bad OFF record: {e}") from None
    if not np.isfinite(pts).all():
        raise MeshFormatError("non-finite coordinate")
    tri = []
    for f in faces:
        if len(f) < 3:
            tri.append(f)
        else:
            # fan split of polygons
            tri += [(f[0], f[i], f[i + 1]) for i in range(1, len(f) - 1)]
    return _checked(pts, tri)


def read_mesh(path) -> Complex:
    path = Path(path)
    try:
        text = path.read_text()
    except (OSError, UnicodeDecodeError) as e:
        raise MeshFormatError(f"cannot read {path}: {e}") from None
    if path.suffix.lower() == ".off" or text.lstrip().startswith("OFF"):
        return loads_off(text)
    return loads_fmesh(text)


def write_mesh(c: Complex, path) -> None:
    path = Path(path)
    text = dumps_off(c) if path.suffix.lower() == ".off" else dumps_fmesh(c)
    path.write_text(text)

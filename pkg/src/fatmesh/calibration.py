"""Calibrated stand-ins for the existential constants of the merge schedule.

``d(phi0)``: the largest relative displacement ``r`` on a fixed grid such
that moving every vertex of a ``phi0``-fat simplex (diameter 1) by exactly
``r`` in a random direction never drops its fatness below ``phi0/2``.

``delta(phi, delta)``: the largest ``r`` on the same grid such that moving
every vertex of a ``phi``-fat simplex by ``r`` keeps a ``delta``-transverse
configuration ``delta/2``-transverse.

Both are measured by seeded trials and shipped as CSV under ``data/``;
lookups are conservative (the nearest grid point below the query).
"""
from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from .complex import faces_of
from .metrics import batch_fatness

TABLE_VERSION = 1
R_GRID = (0.0025, 0.005, 0.0075, 0.01, 0.015, 0.02, 0.025, 0.03, 0.04, 0.05, 0.06,
          0.075, 0.09, 0.1, 0.125, 0.15, 0.175, 0.2, 0.25, 0.3, 0.4, 0.5)
PHI0_GRID = (0.05, 0.1, 0.15, 0.2, 0.3, 0.4)
PHI_GRID = (0.05, 0.1, 0.2)
DELTA_GRID = (0.005, 0.01, 0.02, 0.05, 0.1, 0.2)
DIMS = (2, 3, 4)
D_TRIALS = 10_000
DELTA_TRIALS = 200
SEED = 20240601

# 3D transverse pairs cost ~0.4 s each, so fewer trials there
FLOOR_TRIALS = {2: 500, 3: 100}
# (m, phi0, delta); a regular tetrahedron only reaches fatness 0.118
FLOOR_GRID = ((2, 0.1, 0.05), (2, 0.1, 0.1), (2, 0.2, 0.05), (2, 0.2, 0.1),
              (3, 0.03, 0.02), (3, 0.03, 0.05), (3, 0.06, 0.02), (3, 0.06, 0.05))

D_FILE = "d_phi0.csv"
DELTA_FILE = "delta_fn.csv"
FLOOR_FILE = "subdivision_floor.csv"


def regular_simplex(k: int) -> np.ndarray:
    """Unit-diameter regular ``k``-simplex centred at the origin, in ``R^k``."""
    E = np.eye(k + 1) / math.sqrt(2)
    E -= E.mean(axis=0)
    u, _, _ = np.linalg.svd(E.T, full_matrices=False)
    return E @ u[:, :k]


def _random_rotation(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def random_fat_simplices(rng: np.random.Generator, k: int, n: int, phi: float,
                         count: int, diam: float = 1.0) -> np.ndarray:
    """``count`` random ``phi``-fat ``k``-simplices in ``R^n`` of diameter ``diam``.

    Regular simplices are distorted by Gaussian noise of random scale and
    kept when still ``phi``-fat, so the sample reaches down to the threshold.
    Returns shape ``(count, k+1, n)``; empty when no ``phi``-fat simplex exists.
    """
    base = regular_simplex(k)
    if batch_fatness(base[None])[0] < phi:
        return np.zeros((0, k + 1, n))
    out = []
    have = 0
    while have < count:
        m = 4 * (count - have) + 16
        scale = rng.random(m)[:, None, None] * 0.6
        S = base[None] + scale * rng.standard_normal((m, k + 1, k))
        S = S[batch_fatness(S) >= phi]
        if len(S) == 0:
            continue
        diff = S[:, :, None, :] - S[:, None, :, :]
        d = np.sqrt((diff ** 2).sum(-1)).reshape(len(S), -1).max(axis=1)
        S = S / d[:, None, None] * diam
        emb = np.zeros((len(S), k + 1, n))
        for i, s in enumerate(S):
            R = _random_rotation(rng, n)[:, :k]
            emb[i] = s @ R.T
        out.append(emb)
        have += len(emb)
    return np.concatenate(out)[:count]


def _unit_directions(rng: np.random.Generator, shape) -> np.ndarray:
    g = rng.standard_normal(shape)
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def fatness_survives(S: np.ndarray, r: float, phi0: float, rng: np.random.Generator) -> bool:
    moved = S + r * _unit_directions(rng, S.shape)
    return bool(np.all(batch_fatness(moved) >= phi0 / 2))


def calibrate_d_phi0(phi0: float, n: int, trials: int = D_TRIALS, seed: int = SEED
                     ) -> tuple[float, float, bool]:
    """Returns ``(d, empirical, floor_ok)``.

    ``empirical`` is the largest grid value with every smaller grid value
    passing too; the analytic floor ``phi0/(4n)`` is admitted when it passes
    the same trials, so ``d = max(empirical, floor)`` in that case.
    """
    rng = np.random.default_rng([seed, n, int(round(phi0 * 1e6))])
    pools = [random_fat_simplices(rng, k, n, phi0, trials) for k in range(2, n + 1)]
    pools = [p for p in pools if len(p)]
    if not pools:
        # only segments are phi0-fat; they survive any move shorter than 1/2
        return R_GRID[-1], R_GRID[-1], True

    def passes(r):
        sub = np.random.default_rng([seed, n, int(round(phi0 * 1e6)), int(r * 1e6)])
        return all(fatness_survives(p, r, phi0, sub) for p in pools)

    empirical = 0.0
    for r in R_GRID:
        if not passes(r):
            break
        empirical = r
    floor = phi0 / (4 * n)
    floor_ok = passes(floor)
    d = max(empirical, floor) if floor_ok else empirical
    return d, empirical, floor_ok


def _pair_faces(k1: int, k2: int):
    f1 = faces_of(tuple(range(k1 + 1)))
    f2 = faces_of(tuple(range(k2 + 1)))
    return f1, f2


def calibrate_delta_fn(phi: float, delta: float, n: int, trials: int = DELTA_TRIALS,
                       seed: int = SEED) -> float:
    """Largest grid ``r`` preserving ``delta/2``-transversality in every trial."""
    from .transversal import complex_margin

    rng = np.random.default_rng([seed, n, int(round(phi * 1e6)), int(round(delta * 1e6))])
    configs = []
    attempts = 0
    while len(configs) < trials and attempts < 200 * trials:
        attempts += 1
        k1 = int(rng.integers(1, n + 1))
        k2 = int(rng.integers(1, n + 1))
        s1 = random_fat_simplices(rng, k1, n, phi, 1)
        s2 = random_fat_simplices(rng, k2, n, phi, 1, diam=1.0 + rng.random())
        if len(s1) == 0 or len(s2) == 0:
            continue
        P = s1[0]
        Q = s2[0] + (rng.random(n) - 0.5) * 0.6
        f1, f2 = _pair_faces(k1, k2)
        cm = complex_margin(P, f1, Q, f2, n, 1.0)
        if cm.failures or cm.margin <= delta or cm.worst is None:
            continue
        configs.append((P, Q, f1, f2))
    if not configs:
        return 0.0
    best = 0.0
    for r in R_GRID:
        sub = np.random.default_rng([seed, n, int(r * 1e6)])
        ok = True
        for P, Q, f1, f2 in configs:
            moved = P + r * _unit_directions(sub, P.shape)
            cm = complex_margin(moved, f1, Q, f2, n, 1.0)
            if cm.failures or cm.margin <= delta / 2:
                ok = False
                break
        if not ok:
            break
        best = r
    return best


def transverse_fat_pairs(m: int, phi0: float, delta: float, count: int, seed: int = SEED,
                         max_attempts: int | None = None):
    """Seeded ``phi0``-fat full-dimensional simplex pairs in ``R^m`` that are
    more than ``delta``-transverse (every face pair, ``eta1 = 1``) and whose
    intersection has interior."""
    from .cells import intersect_simplices
    from .transversal import complex_margin

    rng = np.random.default_rng([seed, m, int(round(phi0 * 1e6)), int(round(delta * 1e6))])
    faces = faces_of(tuple(range(m + 1)))
    out = []
    attempts = 0
    limit = max_attempts or 200 * count
    while len(out) < count and attempts < limit:
        attempts += 1
        P = random_fat_simplices(rng, m, m, phi0, 1)[0]
        Q = random_fat_simplices(rng, m, m, phi0, 1, diam=1.0 + rng.random())[0]
        Q = Q + (rng.random(m) - 0.5) * 0.6
        cm = complex_margin(P, faces, Q, faces, m, 1.0)
        if cm.failures or not cm.margin > delta:
            continue
        cell = intersect_simplices(P, Q)
        if cell is None or cell.dim < m:
            continue
        out.append((P, Q, cell))
    return out


def subdivision_fatness(cell) -> tuple[float, float, float]:
    """``(min piece fatness, sum of piece volumes, cell volume)``; the cell
    volume comes from an independent convex hull."""
    from scipy.spatial import ConvexHull

    from .cells import subdivide_cell_fat
    from .metrics import simplex_volume

    pts, simplices = subdivide_cell_fat(cell)
    S = np.array([pts[list(t)] for t in simplices])
    total = float(sum(simplex_volume(x) for x in S))
    return float(batch_fatness(S).min()), total, float(ConvexHull(cell.vertices).volume)


def floor_samples(m: int, phi0: float, delta: float, trials: int | None = None,
                  seed: int = SEED) -> list[tuple[float, float, float]]:
    """``subdivision_fatness`` of every seeded pair at one grid point."""
    trials = FLOOR_TRIALS[m] if trials is None else trials
    pairs = transverse_fat_pairs(m, phi0, delta, trials, seed)
    if len(pairs) < trials:
        raise ValueError(f"only {len(pairs)} transverse pairs found for {(m, phi0, delta)}")
    return [subdivision_fatness(cell) for _, _, cell in pairs]


def calibrate_subdivision_floor(m: int, phi0: float, delta: float,
                                trials: int | None = None, seed: int = SEED) -> float:
    return min(f for f, _, _ in floor_samples(m, phi0, delta, trials, seed))


def build_floor_table(grid=FLOOR_GRID, trials: int | None = None, seed: int = SEED) -> str:
    rows = []
    for m, phi0, delta in grid:
        t = FLOOR_TRIALS[m] if trials is None else trials
        rows.append((m, phi0, delta, calibrate_subdivision_floor(m, phi0, delta, t, seed), t, seed))
    return format_csv(["m", "phi0", "delta", "floor", "trials", "seed"], rows)


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CalibrationTables:
    d_rows: tuple[tuple[float, int, float], ...]
    delta_rows: tuple[tuple[float, float, int, float], ...]
    floor_rows: tuple[dict, ...]
    version_hash: str

    def d_phi0(self, phi0: float, n: int) -> float:
        """Conservative lookup; below the grid, or beyond it in ``n``, the
        analytic floor ``phi0/(4n)`` is used."""
        rows = [(p, d) for p, nn, d in self.d_rows if nn == n and p <= phi0 + 1e-12]
        if not rows:
            return phi0 / (4 * n)
        return max(rows)[1]

    def delta_fn(self, phi: float, delta: float, n: int) -> float:
        """Conservative lookup, linear in ``phi`` and ``delta`` below the grid."""
        nn = min(max(n, DIMS[0]), DIMS[-1])
        scale = 1.0
        phis = sorted({p for p, _, m, _ in self.delta_rows if m == nn})
        dels = sorted({d for _, d, m, _ in self.delta_rows if m == nn})
        if not phis:
            raise ValueError(f"no delta calibration for n={n}")
        if phi < phis[0]:
            scale *= phi / phis[0]
            p = phis[0]
        else:
            p = max(x for x in phis if x <= phi + 1e-12)
        if delta < dels[0]:
            scale *= delta / dels[0]
            d = dels[0]
        else:
            d = max(x for x in dels if x <= delta + 1e-12)
        value = {(a, b): v for a, b, m, v in self.delta_rows if m == nn}[(p, d)]
        if n > DIMS[-1]:
            scale *= DIMS[-1] / n
        return value * scale

    def floor(self, m: int, phi0: float, delta: float) -> dict | None:
        for row in self.floor_rows:
            if (row["m"] == m and math.isclose(row["phi0"], phi0)
                    and math.isclose(row["delta"], delta)):
                return row
        return None


def _read(name: str) -> str:
    try:
        return resources.files("fatmesh.data").joinpath(name).read_text()
    except FileNotFoundError:
        return ""


def parse_tables(d_text: str, delta_text: str, floor_text: str) -> CalibrationTables:
    d_rows = tuple((float(r["phi0"]), int(r["n"]), float(r["d_phi0"]))
                   for r in csv.DictReader(io.StringIO(d_text)))
    delta_rows = tuple((float(r["phi"]), float(r["delta"]), int(r["n"]), float(r["delta_fn"]))
                       for r in csv.DictReader(io.StringIO(delta_text)))
    floor_rows = tuple({"m": int(r["m"]), "phi0": float(r["phi0"]), "delta": float(r["delta"]),
                        "floor": float(r["floor"]), "trials": int(r["trials"]),
                        "seed": int(r["seed"])}
                       for r in csv.DictReader(io.StringIO(floor_text)))
    digest = hashlib.sha256(
        "\0".join([str(TABLE_VERSION), d_text, delta_text, floor_text]).encode()).hexdigest()
    return CalibrationTables(d_rows, delta_rows, floor_rows, f"v{TABLE_VERSION}-{digest[:12]}")


@lru_cache(maxsize=1)
def load_tables() -> CalibrationTables:
    return parse_tables(_read(D_FILE), _read(DELTA_FILE), _read(FLOOR_FILE))


def format_csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def build_d_table(phi0_grid=PHI0_GRID, dims=DIMS, trials: int = D_TRIALS, seed: int = SEED) -> str:
    rows = []
    for n in dims:
        for phi0 in phi0_grid:
            d, emp, ok = calibrate_d_phi0(phi0, n, trials, seed)
            rows.append((phi0, n, d, emp, int(ok), trials, seed))
    return format_csv(["phi0", "n", "d_phi0", "empirical", "floor_ok", "trials", "seed"], rows)


def build_delta_table(phi_grid=PHI_GRID, delta_grid=DELTA_GRID, dims=DIMS,
                      trials: int = DELTA_TRIALS, seed: int = SEED) -> str:
    rows = []
    for n in dims:
        for phi in phi_grid:
            for delta in delta_grid:
                rows.append((phi, delta, n, calibrate_delta_fn(phi, delta, n, trials, seed),
                             trials, seed))
    return format_csv(["phi", "delta", "n", "delta_fn", "trials", "seed"], rows)

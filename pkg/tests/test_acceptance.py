"""Acceptance suite: one test per criterion, each printing a single
``ACCEPTANCE <n> ... PASS|FAIL`` line with the measured numbers.

Oracles are independent of the production code paths: exact rational
Cayley-Menger determinants, shapely / scipy hulls for areas and volumes, and
literal re-checks of every post-condition.
"""
import itertools
import json
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.spatial import ConvexHull
from scipy.stats import special_ortho_group

from fatmesh.alexander import (barycentric_subdivision, build_alexander_map,
                               continuity_residual, estimate_dilatation, model_simplex)
from fatmesh.calibration import FLOOR_GRID, PHI0_GRID, floor_samples, load_tables
from fatmesh.cli import main
from fatmesh.collar import (CollarInfeasible, CollarSpec, build_prism_complex, choose_n0,
                            collar_regions, slice_ids)
from fatmesh.complex import Complex, faces_of, validate
from fatmesh.fixtures import (ball_mesh, disk_mesh, fatness_ladder, icosahedron, kite,
                              kuhn_grid, octahedron, regular_polygon, segment, triangle_grid)
from fatmesh.io import dumps_fmesh, loads_fmesh, write_mesh
from fatmesh.merge import ExtendConfig, MergeError, extend_with_report
from fatmesh.metrics import batch_fatness, complex_fatness, fatness_of_points, simplex_volume
from fatmesh.transversal import (PerturbationFailure, TransversalityConfig, complex_margin,
                                 displacement_schedule, is_delta_transverse,
                                 perturb_vertex_for_transversality, transversality_margin)


@pytest.fixture
def verdict(capsys):
    def emit(number, name, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, detail
    return emit


# ---------------------------------------------------------------------------
# 1. fatness oracle
# ---------------------------------------------------------------------------

def _det(M):
    M = [row[:] for row in M]
    n, d = len(M), Fraction(1)
    for i in range(n):
        p = next((r for r in range(i, n) if M[r][i] != 0), None)
        if p is None:
            return Fraction(0)
        if p != i:
            M[i], M[p] = M[p], M[i]
            d = -d
        d *= M[i][i]
        for r in range(i + 1, n):
            f = M[r][i] / M[i][i]
            if f:
                for c in range(i, n):
                    M[r][c] -= f * M[i][c]
    return d


def exact_fatness(P) -> float:
    """Cayley-Menger over every face in exact rationals; one rounding at the
    final square root."""
    P = [[Fraction(float(x)) for x in p] for p in P]
    best = math.inf
    for r in range(2, len(P) + 1):
        for f in itertools.combinations(range(len(P)), r):
            F = [P[i] for i in f]
            k = r - 1
            D2 = [[sum((a - b) ** 2 for a, b in zip(x, y)) for y in F] for x in F]
            B = [[Fraction(0)] + [Fraction(1)] * r] + [[Fraction(1)] + D2[i] for i in range(r)]
            vol2 = Fraction((-1) ** (k + 1), 2 ** k * math.factorial(k) ** 2) * _det(B)
            diam2 = max(max(row) for row in D2)
            best = min(best, math.sqrt(vol2 / diam2 ** k))
    return best


def test_1_fatness_oracle(verdict):
    rng = np.random.default_rng(20240601)
    worst = {}
    for k in (1, 2, 3, 4):
        S = rng.normal(size=(1000, k + 1, k))
        got = batch_fatness(S)
        single = np.array([fatness_of_points(s) for s in S[:100]])
        oracle = np.array([exact_fatness(s) for s in S])
        rel = np.abs(got - oracle) / oracle
        rel1 = np.abs(single - oracle[:100]) / oracle[:100]
        worst[k] = float(max(rel.max(), rel1.max()))
    eq = np.array([[0, 0], [1, 0], [0.5, math.sqrt(3) / 2]])
    tet = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], float)
    fixed = (abs(fatness_of_points(eq) / (math.sqrt(3) / 4) - 1),
             abs(fatness_of_points(tet) / (math.sqrt(2) / 12) - 1))
    ok = max(worst.values()) <= 1e-9 and max(fixed) <= 1e-9
    verdict(1, "fatness oracle", ok,
            "max rel err per k " + ", ".join(f"{k}:{v:.1e}" for k, v in worst.items())
            + f"; fixed values {max(fixed):.1e}")


# ---------------------------------------------------------------------------
# 2. collar
# ---------------------------------------------------------------------------

def _boundary_measure(J):
    return sum(simplex_volume(J.coords(s)) for s in J.simplices)


def _slice_preserved(J, K, spec) -> bool:
    faces = set(K.faces)
    for layer in range(spec.layers + 1):
        ids = slice_ids(J, layer)
        height = layer / spec.n0 * spec.vertical_scale
        expect = np.hstack([J.points, np.full((len(J.points), 1), height)])
        if not np.array_equal(K.points[ids], expect):
            return False
        if any(tuple(sorted(int(ids[v]) for v in s)) not in faces for s in J.simplices):
            return False
    return True


def test_2_collar(verdict):
    notes, ok = [], True
    for name, J in (("segment", segment()), ("12-gon", regular_polygon(12)),
                    ("icosahedron", icosahedron())):
        for spec in (CollarSpec(n0=4, depth=1.0, vertical_scale=0.5),
                     CollarSpec(n0=6, depth=0.5, vertical_scale=0.3)):
            K = build_prism_complex(J, spec)
            vol = sum(simplex_volume(K.coords(s)) for s in K.simplices)
            expect = _boundary_measure(J) * (spec.layers / spec.n0) * spec.vertical_scale
            good = (validate(K) == [] and abs(vol - expect) <= 1e-9 * expect
                    and _slice_preserved(J, K, spec))
            ok &= good
        for target in (0.05, 0.1, 0.2, 0.3):
            try:
                chosen = choose_n0(J, target, math.inf)
                K = build_prism_complex(J, CollarSpec(chosen.n0, 1.0, target,
                                                      chosen.vertical_scale))
                phi = complex_fatness(K).complex_min
                ok &= phi >= target
                notes.append(f"{name}@{target}: n0={chosen.n0} phi={phi:.3f}")
            except CollarInfeasible as e:
                ok &= e.best_phi < target
                notes.append(f"{name}@{target}: infeasible (best {e.best_phi:.3f})")
    r = collar_regions(30)
    ok &= (r.k1, r.k2, r.k3, r.k4) == (25, 24, 22, 15)
    verdict(2, "collar", ok, "; ".join(notes) + f"; regions {(r.k1, r.k2, r.k3, r.k4)}")


# ---------------------------------------------------------------------------
# 3. transversality and perturbation
# ---------------------------------------------------------------------------

ETA1 = 0.1
EPS = 0.1
CLEARANCE = 0.02   # fixed faces of the star must already be this transverse


def _star(n, rng, v0):
    """Cone from ``v0`` over a jittered, rotated cross-polytope."""
    E = np.vstack([np.eye(n), -np.eye(n)])
    R = special_ortho_group.rvs(n, random_state=rng)
    P = v0 + rng.uniform(0.15, 0.25) * (E * rng.uniform(0.9, 1.1, (2 * n, 1))) @ R.T
    tops = [(0,) + tuple(1 + i + n * s for i, s in enumerate(signs))
            for signs in itertools.product((0, 1), repeat=n)]
    return Complex(np.vstack([v0, P]), tops)


def _degenerate_point(kind, c2, rng, n):
    centre = c2.points.mean(axis=0)
    if kind == "shared vertex":
        inner = [v for v in range(len(c2.points))
                 if np.abs(c2.points[v] - centre).max() < 0.6]
        return c2.points[rng.choice(inner)].copy()
    faces = [f for f in c2.faces if 2 <= len(f) <= n
             and all(np.abs(c2.points[v] - centre).max() < 1.1 for v in f)]
    P = c2.points[list(faces[rng.integers(len(faces))])]
    if kind == "on a simplex":
        return rng.dirichlet(np.ones(len(P))) @ P
    # on the affine hull of an edge, outside the edge itself
    return P[0] + rng.uniform(1.1, 1.4) * (P[1] - P[0])


def _check_configuration(n, c2, rng, seed, kind, cfg):
    while True:
        v0 = _degenerate_point(kind, c2, rng, n)
        c1 = _star(n, rng, v0)
        fixed = sorted({f for s in c1.simplices for f in faces_of(s) if 0 not in f})
        if complex_margin(c1.points, fixed, c2.points, c2.faces, n, ETA1).margin >= CLEARANCE:
            break
    try:
        res = perturb_vertex_for_transversality(c1, 0, c2, EPS, cfg, rng_seed=seed)
    except PerturbationFailure as e:
        return f"{kind}: {e}"
    X = c1.points.copy()
    X[0] = res.point
    if not res.displacement < EPS * res.d1:
        return f"{kind}: displacement {res.displacement} >= {EPS * res.d1}"
    if batch_fatness(X[np.array(c1.simplices)]).min() < res.phi0 / 2:
        return f"{kind}: star lost fatness"
    if res.delta_star < res.delta_floor:
        return f"{kind}: delta* {res.delta_star} below floor"
    pairs = complex_margin(X, res.star_faces, c2.points, res.l2_faces, n, ETA1,
                           keep_pairs=True).pairs
    literal = TransversalityConfig(delta=res.delta_floor, eta1=ETA1)
    for f, g, _ in pairs:
        P, Q = X[list(f)], c2.points[list(g)]
        good, w = is_delta_transverse(P, Q, literal)
        margin = transversality_margin(P, Q, n, ETA1).margin
        if not good or margin < res.delta_star:
            return f"{kind}: pair {f}/{g} clause {w.clause} margin {margin}"
    return None


def test_3_transversality(verdict):
    cfg = TransversalityConfig(delta=0.5, eta1=ETA1)
    kinds = ("shared vertex", "on a simplex", "on an affine hull")
    failures, counts = [], {}
    for n, c2 in ((2, triangle_grid(3, 3, equilateral=False)), (3, kuhn_grid((3, 3, 3)))):
        rng = np.random.default_rng([20240601, n])
        for i in range(200):
            err = _check_configuration(n, c2, rng, i, kinds[i % 3], cfg)
            if err:
                failures.append(f"n={n} #{i} {err}")
        counts[n] = 200
    verdict(3, "transversality", not failures,
            f"configurations {counts}, failures {len(failures)}"
            + (f": {failures[:3]}" if failures else ""))


# ---------------------------------------------------------------------------
# 4. displacement schedule
# ---------------------------------------------------------------------------

def test_4_schedule(verdict):
    bad = []
    count = 0
    for phi0 in PHI0_GRID:
        for n in (2, 3, 4):
            base = displacement_schedule(phi0, 1.0, n)
            for d1 in (0.25, 1.0, 3.0, 17.5):
                s = displacement_schedule(phi0, d1, n)
                count += 1
                if any(a < b for a, b in zip(s.t, s.t[1:])):
                    bad.append((phi0, n, d1, "t increases"))
                if s.delta_bigstar != 0.5 * min(s.delta_star):
                    bad.append((phi0, n, d1, "delta bigstar"))
                scaled = np.array(base.t) * d1
                if np.abs(np.array(s.t) - scaled).max() > 1e-12 * scaled.max():
                    bad.append((phi0, n, d1, "not linear in d1"))
    verdict(4, "displacement schedule", not bad, f"{count} grid inputs, violations {bad[:3]}")


# ---------------------------------------------------------------------------
# 5. subdivision fattening floor
# ---------------------------------------------------------------------------

def test_5_subdivision_floor(verdict):
    tables = load_tables()
    notes, ok = [], True
    for m, phi0, delta in FLOOR_GRID:
        row = tables.floor(m, phi0, delta)
        rows = floor_samples(m, phi0, delta, row["trials"], row["seed"])
        conserved = all(abs(total - hull) <= 1e-9 * hull for _, total, hull in rows)
        low = min(f for f, _, _ in rows)
        same = low == row["floor"]
        ok &= conserved and low >= row["floor"] and same and len(rows) == row["trials"]
        notes.append(f"({m},{phi0},{delta}) n={len(rows)} min={low:.3g}"
                     f"{'' if same else ' MISMATCH'}{'' if conserved else ' VOLUME'}")
    verdict(5, "subdivision floor", ok, "; ".join(notes))


# ---------------------------------------------------------------------------
# 6. end-to-end extension
# ---------------------------------------------------------------------------

EXTEND_FIXTURES = {
    "circle/disk": (lambda: regular_polygon(12), lambda: disk_mesh(0.4, 0.08),
                    ExtendConfig()),
    "icosahedron/ball": (icosahedron, lambda: ball_mesh(0.25, 0.1),
                         ExtendConfig(vertical_scale=0.9)),
}


def _solid_measure(J):
    if J.ambient_dim == 2:
        from shapely.geometry import Polygon

        # regular_polygon lists its vertices in boundary order
        return Polygon(J.points).area
    return ConvexHull(J.points).volume


@pytest.mark.parametrize("name", list(EXTEND_FIXTURES))
def test_6_extend(verdict, name):
    make_j, make_i, cfg = EXTEND_FIXTURES[name]
    J, interior = make_j(), make_i()
    floor_error = None
    try:
        res = extend_with_report(J, interior, cfg)
        mres = res.merge
    except MergeError as e:
        floor_error, mres = str(e), e.result
    if mres is None:
        verdict(6, f"extend {name}", False, f"no merged complex: {floor_error}")
    M = mres.merged
    valid = validate(M) == []
    vol = sum(simplex_volume(M.coords(s)) for s in M.simplices)
    oracle = _solid_measure(J)
    covered = abs(vol - oracle) <= 1e-6 * oracle
    nb = len(J.points)
    records = dumps_fmesh(M).splitlines()[2:2 + nb] == dumps_fmesh(J).splitlines()[2:2 + nb]
    faces = set(M.faces)
    records &= all(tuple(sorted(s)) in faces for s in J.simplices)
    phi_in = min(complex_fatness(J).complex_min, complex_fatness(interior).complex_min)
    phi = mres.fatness_after.complex_min
    floor_ok = phi >= 0.25 * phi_in
    verdict(6, f"extend {name}", valid and covered and records and floor_ok,
            f"valid={valid} volume {vol:.12g} vs {oracle:.12g} (rel {abs(vol - oracle) / oracle:.1e}) "
            f"boundary_bits={records} "
            f"phi {phi:.3g} vs floor 0.25*{phi_in:.3g}={0.25 * phi_in:.3g}"
            + (f"; {floor_error}" if floor_error else ""))


# ---------------------------------------------------------------------------
# 7. Alexander map
# ---------------------------------------------------------------------------

def test_7_alexander(verdict):
    notes, ok = [], True
    fixtures = {"octahedron": octahedron(),
                "sd(octahedron)": barycentric_subdivision(octahedron()),
                "sd(grid)": barycentric_subdivision(triangle_grid(2, 2)),
                "sd(cube)": barycentric_subdivision(kuhn_grid((1, 1, 1)))}
    for name, c in fixtures.items():
        m = build_alexander_map(c)
        res = continuity_residual(m, 1000)
        a = estimate_dilatation(m, 256)
        b = estimate_dilatation(build_alexander_map(c), 256)
        same = a.K_outer == b.K_outer and a.per_simplex_max == b.per_simplex_max
        ok &= res <= 1e-9 and math.isfinite(a.K_outer) and same
        notes.append(f"{name}: residual {res:.1e} K {a.K_outer:.4g}")
    ident = build_alexander_map(Complex(model_simplex(2).copy(), [(0, 1, 2)]))
    K_id = estimate_dilatation(ident, 256).K_outer
    ok &= 1.0 <= K_id <= 1.0 + 1e-6
    ladder = [kite(T) for T in fatness_ladder(5)]
    phis = [complex_fatness(c).complex_min for c in ladder]
    Ks = [estimate_dilatation(build_alexander_map(c), 256).K_outer for c in ladder]
    order = np.argsort(phis)
    Ks_by_phi = [Ks[i] for i in order]
    ok &= all(a >= b for a, b in zip(Ks_by_phi, Ks_by_phi[1:]))
    notes.append(f"identity K {K_id:.9f}")
    notes.append("ladder " + ", ".join(f"phi {phis[i]:.3f} K {Ks[i]:.3g}" for i in order))
    verdict(7, "alexander", ok, "; ".join(notes))


# ---------------------------------------------------------------------------
# 8. determinism and round trip
# ---------------------------------------------------------------------------

def _run_twice(capsys, argv, outputs):
    blobs = []
    for _ in range(2):
        code = main([str(a) for a in argv])
        out, _ = capsys.readouterr()
        blobs.append((code, out, tuple(p.read_bytes() if p.exists() else None
                                       for p in outputs)))
    return blobs[0] == blobs[1], blobs[0][0]


def test_8_determinism(verdict, tmp_path, capsys):
    fixtures = {"segment": segment(), "12-gon": regular_polygon(12),
                "icosahedron": icosahedron(), "octahedron": octahedron(),
                "grid": triangle_grid(5, 5), "kuhn": kuhn_grid((2, 2, 2)),
                "disk": disk_mesh(0.4, 0.08), "ball": ball_mesh(0.25, 0.1),
                "empty": Complex.empty(2)}
    round_trip = {k: loads_fmesh(dumps_fmesh(c)).same_as(c) for k, c in fixtures.items()}
    p = {k: tmp_path / f"{k}.fmesh" for k in fixtures}
    for k, c in fixtures.items():
        write_mesh(c, p[k])
    a, b = tmp_path / "a.fmesh", tmp_path / "b.fmesh"
    write_mesh(triangle_grid(4, 4), a)
    write_mesh(triangle_grid(4, 4, origin=(2.37, 0.21)), b)
    disk = tmp_path / "small_disk.fmesh"
    write_mesh(disk_mesh(0.38, 0.12), disk)
    o = tmp_path / "out.fmesh"
    t = tmp_path / "t.jsonl"
    csv = tmp_path / "r.csv"
    commands = {
        "fatness": (["fatness", p["icosahedron"], "--csv", csv], [csv]),
        "collar": (["collar", p["12-gon"], "--n0", 30, "--regions", "-o", o],
                   [o, tmp_path / "out.fmesh.json"]),
        "merge": (["merge", a, b, "-o", o, "--transcript", t, "--no-floor", "--seed", 5],
                  [o, t]),
        "extend": (["extend", p["12-gon"], disk, "-o", o, "--no-floor", "--seed", 5], [o]),
        "alexander": (["alexander", p["octahedron"], "--csv", csv, "--face-samples", 200],
                      [csv]),
        "calibrate": (["calibrate", "--out-dir", tmp_path / "cal", "--table", "d",
                       "--phi0-grid", "0.1,0.2", "--n", "2..3", "--trials", 200],
                      [tmp_path / "cal" / "d_phi0.csv"]),
    }
    stable = {}
    for name, (argv, outs) in commands.items():
        same, code = _run_twice(capsys, argv, outs)
        stable[name] = (same, code)
    ok = all(round_trip.values()) and all(s and c == 0 for s, c in stable.values())
    verdict(8, "determinism and round trip", ok,
            f"round trip {sum(round_trip.values())}/{len(round_trip)}; "
            + ", ".join(f"{k}: {'stable' if s else 'UNSTABLE'} exit {c}"
                        for k, (s, c) in stable.items()))

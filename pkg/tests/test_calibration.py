import math

import numpy as np
import pytest

from fatmesh.calibration import (DIMS, FLOOR_GRID, calibrate_d_phi0, floor_samples,
                                 load_tables, parse_tables, random_fat_simplices)
from fatmesh.metrics import fatness_of_points

T = load_tables()


def test_tables_are_shipped_and_versioned():
    assert T.d_rows and T.delta_rows and len(T.floor_rows) == len(FLOOR_GRID)
    assert T.version_hash.startswith("v1-") and len(T.version_hash) == 15
    assert load_tables() is T


def test_version_hash_tracks_content():
    a = parse_tables("phi0,n,d_phi0\n0.1,2,0.05\n", "", "")
    b = parse_tables("phi0,n,d_phi0\n0.1,2,0.04\n", "", "")
    assert a.version_hash != b.version_hash


@pytest.mark.parametrize("n", DIMS)
def test_d_table_is_monotone_and_above_the_floor(n):
    rows = sorted((p, d) for p, nn, d in T.d_rows if nn == n)
    assert all(d1 <= d2 for (_, d1), (_, d2) in zip(rows, rows[1:]))
    assert all(d >= p / (4 * n) for p, d in rows)


def test_d_lookup_is_conservative():
    assert T.d_phi0(0.12, 2) == T.d_phi0(0.1, 2)
    assert T.d_phi0(0.01, 3) == pytest.approx(0.01 / 12)
    assert T.d_phi0(0.2, 7) == pytest.approx(0.2 / 28)


def test_delta_lookup_scales_below_the_grid():
    base = T.delta_fn(0.05, 0.005, 2)
    assert T.delta_fn(0.025, 0.005, 2) == pytest.approx(base / 2)
    assert T.delta_fn(0.05, 0.0025, 2) == pytest.approx(base / 2)
    assert T.delta_fn(0.2, 0.1, 3) >= T.delta_fn(0.1, 0.1, 3)


def test_floor_lookup():
    row = T.floor(2, 0.1, 0.05)
    assert row["trials"] == 500 and 0 < row["floor"] < 0.1
    assert T.floor(2, 0.3, 0.05) is None


def test_random_fat_simplices_meet_their_bound(rng):
    S = random_fat_simplices(rng, 3, 3, 0.1, 50)
    assert len(S) and all(fatness_of_points(x) >= 0.1 for x in S)


def test_d_calibration_is_deterministic():
    a = calibrate_d_phi0(0.1, 2, 300)
    assert a == calibrate_d_phi0(0.1, 2, 300)
    assert a[0] >= 0.1 / 8


def test_floor_samples_conserve_volume():
    rows = floor_samples(2, 0.2, 0.1, trials=20)
    assert len(rows) == 20
    for minfat, total, hull in rows:
        assert minfat > 0
        assert math.isclose(total, hull, rel_tol=1e-9)

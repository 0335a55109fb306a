import math

import numpy as np
import pytest
from shapely.geometry import Polygon
from shapely.ops import unary_union

from fatmesh.complex import ComplexError, validate
from fatmesh.fixtures import disk_mesh, regular_polygon, triangle_grid
from fatmesh.io import dumps_fmesh
from fatmesh.merge import (ExtendConfig, InteriorTooShallow, MergeConfig, MergeError,
                           extend_with_report, merge_fat_triangulations, select_overlap_regions)
from fatmesh.metrics import simplex_volume

K1 = triangle_grid(5, 5)
K2 = triangle_grid(5, 5, origin=(3.37, 0.21))


def union_area(*cs):
    return unary_union([Polygon(c.coords(s)) for c in cs for s in c.simplices]).area


@pytest.fixture(scope="module")
def merged():
    return merge_fat_triangulations(K1, K2, MergeConfig(check_fatness=False))


def test_merge_covers_the_union(merged):
    M = merged.merged
    assert validate(M) == []
    area = sum(simplex_volume(M.coords(s)) for s in M.simplices)
    assert area == pytest.approx(union_area(K1, K2), rel=1e-12)


def test_transcript_respects_caps(merged):
    assert merged.transcript
    t = merged.schedule_used.t
    for m in merged.transcript:
        assert m.displacement < m.cap == t[m.stage]
        assert np.linalg.norm(np.subtract(m.new, m.old)) == pytest.approx(m.displacement)
        assert m.margin > 0
    assert all(a >= b for a, b in zip(t, t[1:]))


def test_merge_is_deterministic(merged):
    again = merge_fat_triangulations(K1, K2, MergeConfig(check_fatness=False))
    assert dumps_fmesh(again.merged) == dumps_fmesh(merged.merged)
    assert again.transcript_jsonl() == merged.transcript_jsonl()


def test_floor_is_enforced(merged):
    # the refined overlap is thinner than a quarter of the input fatness;
    # the default configuration reports that instead of returning silently
    assert merged.fatness_after.complex_min < 0.25 * merged.phi0
    with pytest.raises(MergeError) as info:
        merge_fat_triangulations(K1, K2)
    assert info.value.result is not None
    assert info.value.details["complex_min"] == merged.fatness_after.complex_min


def test_identical_inputs_are_absorbed():
    res = merge_fat_triangulations(K1, K1)
    assert res.transcript == [] and res.merged.same_as(K1)


def test_disjoint_inputs():
    with pytest.raises(ComplexError, match="empty overlap"):
        merge_fat_triangulations(K1, triangle_grid(2, 2, origin=(20, 20)))


def test_overlap_regions_are_nested():
    r = select_overlap_regions(K1, K2, np.array([4.5, 1.5]), 3.0, 0.5, 1.5)
    assert r.L1.members <= r.M1.members and r.L2.members <= r.M2.members
    assert r.L1.members and r.L2.members


def test_extend_with_empty_interior_returns_the_collar():
    from fatmesh.complex import Complex

    res = extend_with_report(regular_polygon(12), Complex.empty(2), ExtendConfig())
    assert res.merged.same_as(res.collar)
    assert res.boundary_preserved


def test_extend_rejects_a_shallow_interior():
    with pytest.raises(InteriorTooShallow):
        extend_with_report(regular_polygon(12), disk_mesh(0.15, 0.05), ExtendConfig())

import json

import numpy as np
import pytest

from simplexchain import fixtures
from simplexchain.absorbing import (AbsorbingClass, Region2D, classify_1d,
                                    classify_2d, full_simplex_region,
                                    grow_region, initial_region, region_member,
                                    verify_absorbing, vertex_member)
from simplexchain.chain import ChainConfig, run_replicas
from simplexchain.geometry import SimplexPoint
from simplexchain.operators import SimplexGrid
from simplexchain.weights import (AffineWeights, ConstantWeights,
                                  boundary_profile)


def test_classify_1d_cases():
    cases = [
        (fixtures.d1_no_sticky_spec(), AbsorbingClass.FULL_INTERVAL),
        (fixtures.d1_sticky_left_spec(), AbsorbingClass.LEFT_ENDPOINT),
        (fixtures.d1_sticky_right_spec(), AbsorbingClass.RIGHT_ENDPOINT),
        (fixtures.d1_both_sticky_spec(), AbsorbingClass.BOTH_ENDPOINTS),
    ]
    for spec, expected in cases:
        result = classify_1d(spec)
        assert result.class_name is expected


def test_classify_1d_nearly_sticky_right():
    # weight 1 toward the right endpoint at 1, but only 0.9 toward the left
    # endpoint at 0: the chain escapes 0 and eventually sticks at 1
    spec = AffineWeights([0.0, 0.1])
    result = classify_1d(spec)
    assert result.class_name is AbsorbingClass.RIGHT_ENDPOINT
    assert result.members[0].vertex == 1


def test_classify_1d_oracle_agreement():
    cases = [fixtures.d1_no_sticky_spec(), fixtures.d1_sticky_left_spec(),
             fixtures.d1_sticky_right_spec(), fixtures.d1_both_sticky_spec()]
    for spec in cases:
        result = classify_1d(spec)
        finals = run_replicas(
            ChainConfig(spec=spec, start=SimplexPoint([0.6]), steps=20_000,
                        seed=51), replicas=30)
        dists = []
        for member in result.members:
            if member.kind == "vertex":
                dists.append(np.abs(finals[:, 0] - float(member.vertex)))
            else:
                dists.append(np.zeros(finals.shape[0]))
        nearest = np.min(np.stack(dists, axis=1), axis=1)
        assert (nearest <= 1e-3).mean() >= 0.99


@pytest.mark.parametrize("build,expected", [
    (fixtures.three_vertex_spec, AbsorbingClass.THREE_VERTICES),
    (fixtures.two_vertex_spec, AbsorbingClass.TWO_VERTICES),
    (fixtures.one_vertex_spec, AbsorbingClass.ONE_VERTEX),
    (fixtures.one_edge_spec, AbsorbingClass.ONE_EDGE),
    (fixtures.vertex_edge_spec, AbsorbingClass.VERTEX_PLUS_OPPOSITE_EDGE),
    (fixtures.full_simplex_spec, AbsorbingClass.INTERIOR_COMPACT),
])
def test_classify_2d_fixtures(build, expected):
    spec = build()
    result = classify_2d(spec, resolution=48)
    assert result.class_name is expected
    for member in result.members:
        assert verify_absorbing(spec, member).max_escape <= 1e-6


def test_classify_2d_constant_reaches_full_simplex():
    result = classify_2d(ConstantWeights([1 / 3, 1 / 3, 1 / 3]), resolution=32)
    assert result.class_name is AbsorbingClass.INTERIOR_COMPACT
    assert result.reached_full_simplex
    assert result.members[0].region.is_full


def test_classify_2d_stationary_core():
    spec = fixtures.hexagon_barrier_spec()
    result = classify_2d(spec, resolution=64)
    assert result.class_name is AbsorbingClass.INTERIOR_COMPACT
    assert result.converged
    assert not result.reached_full_simplex
    region = result.members[0].region
    assert 0.3 < region.area < 0.48
    # the reachable region has an interior hole
    assert len(region.rings()) >= 2
    assert verify_absorbing(spec, result.members[0]).max_escape <= 1e-6


def test_classify_2d_vertex_edge_members():
    result = classify_2d(fixtures.vertex_edge_spec(), resolution=32)
    kinds = sorted(m.kind for m in result.members)
    assert kinds == ["edge", "vertex"]
    edge = [m for m in result.members if m.kind == "edge"][0]
    assert edge.edge == (1, 2)


def test_classify_2d_borderline_warning():
    eps = 1e-7
    spec = ConstantWeights([1.0 - eps, eps / 2, eps / 2])
    result = classify_2d(spec, resolution=32)
    assert result.borderline_warnings
    assert result.class_name is AbsorbingClass.INTERIOR_COMPACT


def test_grow_region_monotone():
    spec = ConstantWeights([1 / 3, 1 / 3, 1 / 3])
    grid = SimplexGrid(2, 24)
    mask = np.zeros(grid.n_cells, dtype=bool)
    mask[grid.vertex_cells()] = True
    region = Region2D(grid, mask)
    grown = grow_region(spec, region)
    assert np.all(grown.mask[region.mask])
    assert grown.area > region.area


def test_grow_region_full_simplex_fixed():
    spec = ConstantWeights([1 / 3, 1 / 3, 1 / 3])
    region = full_simplex_region(24)
    grown = grow_region(spec, region)
    assert grown.is_full


def test_corner_regions_spread_to_full_simplex():
    spec = ConstantWeights([1 / 3, 1 / 3, 1 / 3])
    grid = SimplexGrid(2, 32)
    mask = np.zeros(grid.n_cells, dtype=bool)
    mask[grid.vertex_cells()] = True
    region = Region2D(grid, mask)
    for _ in range(3):
        region = grow_region(spec, region)
    assert 0.5 - region.area <= 2.0 / 32 * 0.5


def test_initial_region_interval_triangles():
    profile = boundary_profile(fixtures.hexagon_barrier_spec(), 64)
    region = initial_region(profile, 64)
    # union of six corner triangles: between half and the full simplex area
    assert 0.25 < region.area < 0.5
    center = np.array([[1 / 3, 1 / 3]])
    assert not region.covers_points(center)[0]


def test_verify_absorbing_full_simplex_zero():
    spec = ConstantWeights([1 / 3, 1 / 3, 1 / 3])
    report = verify_absorbing(spec, full_simplex_region(24))
    assert report.max_escape == 0.0
    assert report.witnesses == ()


def test_verify_absorbing_leaky_vertex():
    spec = ConstantWeights([0.5, 0.3, 0.2])
    report = verify_absorbing(spec, vertex_member(1))
    assert report.max_escape == pytest.approx(0.8)
    assert report.witnesses


def test_verify_absorbing_sticky_vertex():
    report = verify_absorbing(fixtures.vertex_edge_spec(), vertex_member(0))
    assert report.max_escape == 0.0


def test_region_polygon_extraction():
    region = full_simplex_region(8)
    assert region.area == pytest.approx(0.5)
    rings = region.rings()
    assert len(rings) == 1
    assert region.geometry.area == pytest.approx(0.5, abs=1e-12)


def test_region_validation():
    grid = SimplexGrid(2, 4)
    with pytest.raises(ValueError):
        Region2D(grid, np.zeros(grid.n_cells, dtype=bool))


def test_classification_json(tmp_path):
    result = classify_2d(fixtures.three_vertex_spec(), resolution=32)
    path = tmp_path / "classification.json"
    result.to_json(path)
    data = json.loads(path.read_text())
    assert data["class"] == "three_vertices"
    assert len(data["members"]) == 3
    assert data["thresholds"]["sticky_equality"] == 1e-9
    result2 = classify_2d(fixtures.hexagon_barrier_spec(), resolution=32)
    result2.to_json(path)
    data2 = json.loads(path.read_text())
    assert data2["members"][0]["kind"] == "region"
    assert data2["members"][0]["rings"]


def test_dimension_validation():
    with pytest.raises(ValueError):
        classify_1d(ConstantWeights([0.3, 0.3, 0.4]))
    with pytest.raises(ValueError):
        classify_2d(ConstantWeights([0.5, 0.5]))
    with pytest.raises(ValueError):
        classify_2d(fixtures.three_vertex_spec(), resolution=8)

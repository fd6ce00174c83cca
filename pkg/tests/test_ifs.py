import json

import numpy as np
import pytest

from simplexchain import fixtures
from simplexchain.absorbing import classify_2d
from simplexchain.ifs import (Verdict, check_uniqueness, contraction_coefficient)
from simplexchain.weights import (AffineWeights, ConstantWeights,
                                  ProgrammaticWeights, TabulatedWeights,
                                  mesh_points)


def test_contraction_coefficient_values():
    assert contraction_coefficient(1.0) == 0.5
    assert contraction_coefficient(0.5) == 1.0 / 1.5
    values = [contraction_coefficient(a) for a in np.linspace(0.05, 1.0, 20)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert contraction_coefficient(0.01) > 0.99


def test_contraction_coefficient_domain():
    with pytest.raises(ValueError):
        contraction_coefficient(0.0)
    with pytest.raises(ValueError):
        contraction_coefficient(1.5)


def test_constant_weights_verdict():
    report = check_uniqueness(ConstantWeights([0.3, 0.5, 0.2]))
    assert report.verdict is Verdict.UNIQUE_CONSTANT_WEIGHTS
    assert report.contraction == 0.5
    assert report.holder_bound.value == 0.0


def test_affine_verdict_with_exact_minimum():
    report = check_uniqueness(AffineWeights([0.1, 0.2, 0.3]))
    assert report.verdict is Verdict.UNIQUE_BY_CRITERIA
    assert report.minorization_certified
    assert report.minorization_index == 0
    assert report.minorization_value == 0.1


def test_coordinate_weights_inconclusive_and_consistent():
    spec = AffineWeights([0.0, 0.0, 0.0])
    report = check_uniqueness(spec)
    assert report.verdict is Verdict.INCONCLUSIVE
    classification = classify_2d(spec, resolution=32)
    # a multi-member classification must never coincide with a uniqueness claim
    assert len(classification.members) > 1
    assert report.verdict is Verdict.INCONCLUSIVE


def test_fixture_verdicts_never_contradict_classifier():
    for build in (fixtures.three_vertex_spec, fixtures.two_vertex_spec,
                  fixtures.vertex_edge_spec):
        spec = build()
        classification = classify_2d(spec, resolution=32)
        if len(classification.members) > 1:
            report = check_uniqueness(spec)
            assert report.verdict is Verdict.INCONCLUSIVE


def test_tabulated_minimum_certified():
    values = np.tile([0.3, 0.4, 0.3], (mesh_points(2, 4).shape[0], 1))
    spec = TabulatedWeights(2, 4, values)
    report = check_uniqueness(spec)
    assert report.verdict is Verdict.UNIQUE_BY_CRITERIA
    assert report.minorization_certified
    assert report.minorization_value == pytest.approx(0.3)


def test_programmatic_minimum_is_not_certified():
    def fn(pts):
        y0 = np.maximum(1 - pts.sum(1), 0)
        base = np.stack([y0, pts[:, 0], pts[:, 1]], axis=1)
        return 0.4 * base + 0.2

    spec = ProgrammaticWeights(fn, dim=2)
    report = check_uniqueness(spec)
    assert report.verdict is Verdict.UNIQUE_BY_CRITERIA
    assert not report.minorization_certified
    assert report.minorization_value >= 0.2


def test_programmatic_zero_minimum_inconclusive():
    def fn(pts):
        y0 = np.maximum(1 - pts.sum(1), 0)
        return np.stack([y0, pts[:, 0], pts[:, 1]], axis=1)

    report = check_uniqueness(ProgrammaticWeights(fn, dim=2))
    assert report.verdict is Verdict.INCONCLUSIVE


def test_report_json(tmp_path):
    report = check_uniqueness(AffineWeights([0.1, 0.2, 0.3]))
    path = tmp_path / "uniqueness.json"
    report.to_json(path)
    data = json.loads(path.read_text())
    assert data["verdict"] == "unique_by_criteria"
    assert data["contraction"] == 0.5
    assert data["holder_bound"]["value"] == pytest.approx(0.4, rel=0.05)

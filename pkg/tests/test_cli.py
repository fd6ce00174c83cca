import json

import pytest

from simplexchain.cli import main


@pytest.fixture
def constant_spec(tmp_path):
    path = tmp_path / "constant.json"
    path.write_text(json.dumps({"kind": "constant", "p": [0.3, 0.5, 0.2]}))
    return path


@pytest.fixture
def coordinate_spec(tmp_path):
    path = tmp_path / "coords.json"
    path.write_text(json.dumps({"kind": "affine", "theta": [0.0, 0.0, 0.0]}))
    return path


def test_simulate_command(tmp_path, constant_spec):
    out = tmp_path / "run"
    code = main(["simulate", "--spec", str(constant_spec), "--steps", "200",
                 "--seed", "7", "--out", str(out)])
    assert code == 0
    assert (out / "trajectory.csv").exists()
    assert (out / "trajectory.csv.json").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["args"]["seed"] == 7


def test_simulate_deterministic_artifacts(tmp_path, constant_spec):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    for out in (out1, out2):
        assert main(["simulate", "--spec", str(constant_spec), "--steps", "500",
                     "--seed", "11", "--out", str(out)]) == 0
    assert (out1 / "trajectory.csv").read_bytes() == (out2 / "trajectory.csv").read_bytes()
    assert (out1 / "manifest.json").read_bytes() == (out2 / "manifest.json").read_bytes()


def test_invariant_command_1d(tmp_path):
    spec = tmp_path / "d1.json"
    spec.write_text(json.dumps({"kind": "constant", "p": [0.4, 0.6]}))
    out = tmp_path / "inv"
    code = main(["invariant", "--spec", str(spec), "--resolution", "32",
                 "--out", str(out)])
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["results"]["status"] == "converged"
    assert manifest["results"]["l1_vs_dirichlet"] < 0.05
    assert (out / "density.csv").exists()
    assert (out / "density.svg").read_text().startswith("<svg")


def test_invariant_command_degenerate(tmp_path, coordinate_spec):
    out = tmp_path / "deg"
    code = main(["invariant", "--spec", str(coordinate_spec), "--resolution",
                 "16", "--out", str(out)])
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["results"]["status"] == "degenerate"


def test_classify_command(tmp_path, coordinate_spec):
    out = tmp_path / "cls"
    code = main(["classify", "--spec", str(coordinate_spec), "--resolution",
                 "32", "--render", "--out", str(out)])
    assert code == 0
    data = json.loads((out / "classification.json").read_text())
    assert data["class"] == "three_vertices"
    assert (out / "classification.svg").exists()


def test_check_uniqueness_command(tmp_path):
    spec = tmp_path / "affine.json"
    spec.write_text(json.dumps({"kind": "affine", "theta": [0.1, 0.2, 0.3]}))
    out = tmp_path / "unq"
    code = main(["check-uniqueness", "--spec", str(spec), "--out", str(out)])
    assert code == 0
    data = json.loads((out / "uniqueness.json").read_text())
    assert data["verdict"] == "unique_by_criteria"


def test_input_errors(tmp_path):
    missing = tmp_path / "nope.json"
    assert main(["simulate", "--spec", str(missing), "--out",
                 str(tmp_path / "x")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"kind": "constant", "p": [0.5')
    assert main(["classify", "--spec", str(bad), "--out",
                 str(tmp_path / "y")]) == 2


def test_validate_quick(tmp_path):
    out = tmp_path / "val"
    code = main(["validate", "--quick", "--seed", "3", "--out", str(out)])
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["quick"] is True
    assert len(manifest["criteria"]) == 10
    assert (out / "timings.log").exists()

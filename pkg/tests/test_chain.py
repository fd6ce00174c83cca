import json

import numpy as np
import pytest
import scipy.stats

from simplexchain.chain import (ChainConfig, absorption_experiment, coordinate,
                                coordinate_product, ergodic_average,
                                run_replicas, simulate, step)
from simplexchain.geometry import SimplexPoint, segment_map
from simplexchain.rng import stream
from simplexchain.weights import AffineWeights, ConstantWeights, ProgrammaticWeights


class _QueuedRng:
    def __init__(self, values):
        self.values = list(values)

    def random(self):
        return self.values.pop(0)


def test_step_forced_draw():
    spec = ConstantWeights([0.3, 0.5, 0.2])
    x = SimplexPoint([0.3, 0.4])
    # 0.35 lands in the second bin of the cumulative (0.3, 0.8, 1.0).
    y, i, t = step(x, spec, _QueuedRng([0.35, 0.25]))
    assert i == 1
    assert t == 0.25
    assert np.allclose(y.coords, [0.825, 0.1], atol=0, rtol=0)


def test_step_sticky_vertex():
    def fn(pts):
        y0 = np.maximum(1 - pts.sum(1), 0)
        rest = (1 - y0) / 2
        return np.stack([y0, rest, rest], axis=1)

    spec = ProgrammaticWeights(fn, dim=2)
    e0 = SimplexPoint([0.0, 0.0])
    y, i, _ = step(e0, spec, _QueuedRng([0.5, 0.7]))
    assert i == 0
    assert y == e0


def test_step_vertex_frequencies():
    spec = ConstantWeights([0.3, 0.5, 0.2])
    x = SimplexPoint([0.3, 0.4])
    rng = stream(21, 0)
    counts = np.zeros(3)
    n = 30_000
    for _ in range(n):
        _, i, _ = step(x, spec, rng)
        counts[i] += 1
    freq = counts / n
    for k, p in enumerate([0.3, 0.5, 0.2]):
        assert abs(freq[k] - p) <= 4 * np.sqrt(p * (1 - p) / n)


def test_simulate_zero_steps():
    config = ChainConfig(spec=ConstantWeights([0.5, 0.5]),
                         start=SimplexPoint([0.6]), steps=0, seed=1)
    traj = simulate(config)
    assert len(traj) == 1
    assert np.array_equal(traj.points[0], [0.6])


def test_simulate_deterministic():
    config = ChainConfig(spec=AffineWeights([0.1, 0.2, 0.3]),
                         start=SimplexPoint([0.3, 0.4]), steps=2000, seed=99)
    a = simulate(config)
    b = simulate(config)
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(a.params, b.params)
    assert np.array_equal(a.origin_weight, b.origin_weight)


@pytest.mark.parametrize("spec", [ConstantWeights([0.3, 0.5, 0.2]),
                                  AffineWeights([0.1, 0.2, 0.3])])
def test_scalar_and_generic_paths_identical(spec):
    config = ChainConfig(spec=spec, start=SimplexPoint([0.3, 0.4]),
                         steps=5000, seed=123)
    fast = simulate(config, scalar_fast_path=True)
    slow = simulate(config, scalar_fast_path=False)
    assert np.array_equal(fast.points, slow.points)
    assert np.array_equal(fast.vertex_indices, slow.vertex_indices)
    assert np.array_equal(fast.params, slow.params)
    assert np.array_equal(fast.origin_weight, slow.origin_weight)


def test_trajectory_segment_map_invariant():
    config = ChainConfig(spec=AffineWeights([0.1, 0.2, 0.3]),
                         start=SimplexPoint([0.3, 0.4]), steps=3000, seed=5)
    traj = simulate(config)
    for k in range(0, 3000, 7):
        expected = segment_map(int(traj.vertex_indices[k]),
                               float(traj.params[k]), traj.point(k))
        assert expected == traj.point(k + 1)


def test_trajectory_closure():
    config = ChainConfig(spec=AffineWeights([0.0, 0.0, 0.0]),
                         start=SimplexPoint([0.3, 0.4]), steps=50_000, seed=2)
    traj = simulate(config)
    assert traj.points.min() >= 0.0
    assert traj.points.sum(axis=1).max() <= 1.0


def test_barycentric_track_consistency():
    config = ChainConfig(spec=ConstantWeights([0.3, 0.5, 0.2]),
                         start=SimplexPoint([0.3, 0.4]), steps=5000, seed=3)
    traj = simulate(config)
    derived = np.maximum(1.0 - traj.points.sum(axis=1), 0.0)
    assert np.max(np.abs(traj.origin_weight - derived)) <= 1e-12


def test_ergodic_average_constant_function():
    config = ChainConfig(spec=ConstantWeights([0.5, 0.3, 0.2]),
                         start=SimplexPoint([0.3, 0.4]), steps=5000, seed=4,
                         burn_in=100)
    result = ergodic_average(config, lambda pts: np.ones(pts.shape[0]))
    assert result.estimate == 1.0
    assert result.stderr == 0.0


def test_ergodic_average_matches_dirichlet_mean():
    config = ChainConfig(spec=ConstantWeights([1 / 3, 1 / 3, 1 / 3]),
                         start=SimplexPoint([0.3, 0.4]), steps=200_000, seed=6,
                         burn_in=1000)
    result = ergodic_average(config, coordinate(1))
    assert abs(result.estimate - 1 / 3) <= 4 * result.stderr


def test_ergodic_average_affine_mean():
    config = ChainConfig(spec=AffineWeights([0.1, 0.2, 0.3]),
                         start=SimplexPoint([0.3, 0.4]), steps=200_000, seed=7,
                         burn_in=1000)
    result = ergodic_average(config, coordinate(1))
    assert abs(result.estimate - 1 / 3) <= 4 * result.stderr
    prod = ergodic_average(config, coordinate_product(1, 1))
    # Second moment of a Beta(0.2, 0.4) marginal.
    expected = (0.2 * 1.2) / (0.6 * 1.6)
    assert abs(prod.estimate - expected) <= 5 * prod.stderr


def test_one_step_distribution_matches_direct_sampling():
    spec = AffineWeights([0.1, 0.2, 0.3])
    x = SimplexPoint([0.3, 0.4])
    n = 20_000
    rng = stream(31, 0)
    direct = np.array([step(x, spec, rng)[0].coords for _ in range(n)])
    finals = run_replicas(ChainConfig(spec=spec, start=x, steps=1, seed=77),
                          replicas=n)
    for j in range(2):
        ks = scipy.stats.ks_2samp(direct[:, j], finals[:, j])
        assert ks.pvalue > 0.01


def test_run_replicas_streams_are_stable():
    spec = AffineWeights([0.0, 0.0, 0.0])
    config = ChainConfig(spec=spec, start=SimplexPoint([0.3, 0.4]),
                         steps=50, seed=11)
    few = run_replicas(config, 10)
    many = run_replicas(config, 40)
    assert np.array_equal(few, many[:10])


def test_absorption_experiment_three_vertices():
    spec = AffineWeights([0.0, 0.0, 0.0])
    config = ChainConfig(spec=spec, start=SimplexPoint([0.3, 0.4]),
                         steps=300, seed=13)
    result = absorption_experiment(config, radius=1e-3, replicas=2000,
                                   resolution=32)
    assert result.unresolved <= 0.01
    total = sum(result.frequencies) + result.unresolved
    assert total == 1.0
    for label, p in zip(("vertex_0", "vertex_1", "vertex_2"), (0.3, 0.3, 0.4)):
        k = result.target_labels.index(label)
        sigma = np.sqrt(p * (1 - p) / result.replicas)
        assert abs(result.frequencies[k] - p) <= 4 * sigma


def test_absorption_experiment_validation():
    spec = AffineWeights([0.0, 0.0, 0.0])
    config = ChainConfig(spec=spec, start=SimplexPoint([0.3, 0.4]),
                         steps=10, seed=1)
    with pytest.raises(ValueError):
        absorption_experiment(config, radius=0.0, replicas=10)


def test_config_validation():
    spec = ConstantWeights([0.5, 0.5])
    with pytest.raises(ValueError):
        ChainConfig(spec=spec, start=SimplexPoint([0.5]), steps=-1, seed=0)
    with pytest.raises(ValueError):
        ChainConfig(spec=spec, start=SimplexPoint([0.5]), steps=10, seed=0,
                    burn_in=10)
    with pytest.raises(ValueError):
        ChainConfig(spec=spec, start=SimplexPoint([0.3, 0.4]), steps=10, seed=0)


def test_trajectory_csv_round_trip(tmp_path):
    config = ChainConfig(spec=ConstantWeights([0.3, 0.5, 0.2]),
                         start=SimplexPoint([0.3, 0.4]), steps=50, seed=8)
    traj = simulate(config)
    path = tmp_path / "trajectory.csv"
    traj.to_csv(path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "step,x1,x2,i,t"
    assert len(lines) == 52
    cells = lines[1].split(",")
    assert float(cells[1]) == traj.points[0, 0]
    assert int(cells[3]) == traj.vertex_indices[0]
    last = lines[-1].split(",")
    assert last[3] == "" and last[4] == ""
    sidecar = json.loads((tmp_path / "trajectory.csv.json").read_text())
    assert sidecar["seed"] == 8
    assert sidecar["spec"]["kind"] == "constant"

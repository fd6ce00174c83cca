import math

import numpy as np
import pytest

from simplexchain.dirichlet import DirichletParams, cell_integrals, cell_masses, density_batch
from simplexchain.operators import (GridDensity, GridFunction, SimplexGrid,
                                    aggregate_density, apply_transition,
                                    closed_form_density_1d,
                                    estimate_convergence_rate, lift_density,
                                    power_iterate, push_density,
                                    pushforward_integral_form,
                                    trace_segments, transition_matrix)
from simplexchain.rng import stream
from simplexchain.weights import (AffineWeights, ConstantWeights,
                                  uniform_simplex_sample)


def test_grid_cell_counts_and_volumes():
    g1 = SimplexGrid(1, 17)
    assert g1.n_cells == 17
    assert abs(g1.cell_volume * g1.n_cells - 1.0) <= 1e-12
    g2 = SimplexGrid(2, 12)
    assert g2.n_cells == 144
    assert abs(g2.cell_volume * g2.n_cells - 0.5) <= 1e-12
    with pytest.raises(ValueError):
        SimplexGrid(3, 4)


def test_locate_centers_and_random_points():
    grid = SimplexGrid(2, 9)
    assert np.array_equal(grid.locate(grid.centers), np.arange(grid.n_cells))
    tris = grid.cell_triangles()
    pts = uniform_simplex_sample(2, stream(12, 0), 3000)
    ids = grid.locate(pts)
    for k in range(0, 3000, 97):
        a, b, c = tris[ids[k]]
        # point lies inside its assigned triangle (inclusive test)
        def cross(p, q, r):
            return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
        signs = [cross(a, b, pts[k]), cross(b, c, pts[k]), cross(c, a, pts[k])]
        assert min(signs) >= -1e-12


def test_locate_boundary_points():
    grid = SimplexGrid(2, 8)
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.5],
                    [0.25, 0.75], [0.125, 0.125]])
    ids = grid.locate(pts)
    assert ids.min() >= 0
    assert ids.max() < grid.n_cells


def test_trace_segments_measures_sum_to_one():
    grid = SimplexGrid(2, 16)
    pts = uniform_simplex_sample(2, stream(13, 0), 50)
    for i in range(3):
        idx, cells, dt = trace_segments(grid, pts, i)
        sums = np.zeros(50)
        np.add.at(sums, idx, dt)
        assert np.allclose(sums, 1.0, atol=1e-12)
        assert cells.min() >= 0 and cells.max() < grid.n_cells


@pytest.mark.parametrize("method", ["exact", "nodes"])
def test_transition_matrix_row_stochastic(method):
    spec = ConstantWeights([0.3, 0.5, 0.2])
    grid = SimplexGrid(2, 12)
    matrix = transition_matrix(spec, grid, method=method)
    rows = np.asarray(matrix.sum(axis=1)).ravel()
    assert np.max(np.abs(rows - 1.0)) <= 1e-12
    assert matrix.min() >= 0.0


def test_transition_matrix_row_matches_monte_carlo():
    spec = ConstantWeights([0.3, 0.5, 0.2])
    grid = SimplexGrid(2, 8)
    matrix = transition_matrix(spec, grid).toarray()
    rng = stream(14, 0)
    cid = 20
    x = grid.centers[cid]
    n = 200_000
    i = rng.choice(3, size=n, p=[0.3, 0.5, 0.2])
    t = rng.random(n)
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    landing = t[:, None] * x + (1 - t[:, None]) * verts[i]
    mc = np.bincount(grid.locate(landing), minlength=grid.n_cells) / n
    assert np.abs(matrix[cid] - mc).sum() <= 0.02


def test_sticky_vertex_row_concentrates_on_segment():
    def fn(pts):
        y0 = np.maximum(1 - pts.sum(1), 0)
        rest = (1 - y0) / 2
        return np.stack([y0, rest, rest], axis=1)
    from simplexchain.weights import ProgrammaticWeights

    spec = ProgrammaticWeights(fn, dim=2)
    grid = SimplexGrid(2, 8)
    matrix = transition_matrix(spec, grid).tocsr()
    corner = grid.vertex_cells()[0]
    row = matrix[corner].toarray().ravel()
    # nearly all weight goes toward the origin vertex: the support cells sit
    # on the segment from the corner cell's center to the origin
    support = np.nonzero(row > 1e-12)[0]
    centers = grid.centers[support]
    ratio = centers[:, 1] / centers[:, 0]
    x = grid.centers[corner]
    own_mass = row[support][np.isclose(ratio, x[1] / x[0], atol=0.5)].sum()
    assert own_mass >= 0.95


def test_apply_transition_fixes_constants_exactly():
    grid = SimplexGrid(2, 16)
    for spec in (ConstantWeights([0.3, 0.5, 0.2]), AffineWeights([0.1, 0.2, 0.3])):
        out = apply_transition(GridFunction.ones(grid), spec, nodes=16)
        assert np.all(out.values == 1.0)


def test_apply_transition_preserves_nonnegativity():
    grid = SimplexGrid(2, 12)
    spec = AffineWeights([0.1, 0.2, 0.3])
    rng = stream(15, 0)
    for _ in range(100):
        fn = GridFunction(grid, rng.random(grid.n_cells))
        out = apply_transition(fn, spec, nodes=8)
        assert out.values.min() >= 0.0


def test_apply_transition_fixes_coordinates_for_coordinate_weights():
    from simplexchain.chain import coordinate

    spec = AffineWeights([0.0, 0.0, 0.0])
    m = 32
    grid = SimplexGrid(2, m)
    for j in range(3):
        fn = GridFunction.from_callable(grid, coordinate(j))
        out = apply_transition(fn, spec, nodes=32)
        assert fn.sup_distance(out) <= 2.0 / m


def test_push_density_conserves_mass():
    spec = ConstantWeights([0.3, 0.5, 0.2])
    grid = SimplexGrid(2, 16)
    matrix = transition_matrix(spec, grid)
    rng = stream(16, 0)
    for _ in range(20):
        g = GridDensity.from_masses(grid, rng.standard_exponential(grid.n_cells))
        out = push_density(g, spec, matrix=matrix)
        assert abs(float(out.masses.sum()) - 1.0) <= 1e-12
        assert out.masses.min() >= 0.0


def test_strict_contraction_on_random_pairs():
    spec = ConstantWeights([0.3, 0.5, 0.2])
    grid = SimplexGrid(2, 32)
    matrix = transition_matrix(spec, grid)
    rng = stream(18, 0)
    for _ in range(20):
        g1 = GridDensity.from_masses(grid, rng.standard_exponential(grid.n_cells))
        g2 = GridDensity.from_masses(grid, rng.standard_exponential(grid.n_cells))
        before = g1.l1_distance(g2)
        after = push_density(g1, spec, matrix=matrix).l1_distance(
            push_density(g2, spec, matrix=matrix))
        assert after < before


def test_power_iterate_near_fixed_point_converges_fast():
    spec = ConstantWeights([0.3, 0.5, 0.2])
    grid = SimplexGrid(2, 32)
    start = cell_masses(DirichletParams([0.3, 0.5, 0.2]), grid)
    # tolerance at the scale of the discretization error near the boundary
    result = power_iterate(start, spec, tol=0.15)
    assert result.status == "converged"
    assert result.iterations <= 2


def test_power_iterate_uniform_converges():
    spec = ConstantWeights([0.3, 0.5, 0.2])
    grid = SimplexGrid(2, 24)
    result = power_iterate(GridDensity.uniform(grid), spec, tol=1e-8)
    assert result.status == "converged"
    assert result.final_step < 1e-8


def test_power_iterate_detects_degenerate_limit():
    spec = AffineWeights([0.0, 0.0, 0.0])
    grid = SimplexGrid(2, 16)
    result = power_iterate(GridDensity.uniform(grid), spec, tol=1e-8)
    assert result.status == "degenerate"


def test_power_iterate_refine_improves_singular_case():
    spec = ConstantWeights([0.3, 0.5, 0.2])
    params = DirichletParams([0.3, 0.5, 0.2])
    grid = SimplexGrid(2, 16)
    ref = cell_integrals(params, grid)
    ref = ref / ref.sum()
    plain = power_iterate(GridDensity.uniform(grid), spec, tol=1e-9)
    refined = power_iterate(GridDensity.uniform(grid), spec, tol=1e-9, refine=2)
    err_plain = np.abs(plain.density.masses - ref).sum()
    err_refined = np.abs(refined.density.masses - ref).sum()
    assert err_refined < err_plain


def test_lift_aggregate_round_trip():
    grid = SimplexGrid(2, 8)
    rng = stream(19, 0)
    g = GridDensity.from_masses(grid, rng.standard_exponential(grid.n_cells))
    lifted = lift_density(g, 3)
    back = aggregate_density(lifted, grid)
    assert np.max(np.abs(back.masses - g.masses)) <= 1e-14


def test_monotone_refinement_1d():
    spec = ConstantWeights([0.5, 0.5])
    params = DirichletParams([0.5, 0.5])
    errors = []
    for m in (32, 64, 128):
        grid = SimplexGrid(1, m)
        result = power_iterate(GridDensity.uniform(grid), spec, tol=1e-10)
        ref = cell_integrals(params, grid)
        errors.append(np.abs(result.density.masses - ref / ref.sum()).sum())
    assert errors[0] > errors[1] > errors[2]


def test_estimate_rate_geometric_decay():
    spec = AffineWeights([0.2, 0.3, 0.4])
    grid = SimplexGrid(2, 16)
    rate = estimate_convergence_rate(GridDensity.uniform(grid), spec, iters=25)
    assert 0.0 < rate.rate < 1.0
    assert rate.fit_residual < 0.05


def test_estimate_rate_1d():
    spec = ConstantWeights([0.5, 0.5])
    grid = SimplexGrid(1, 64)
    rate = estimate_convergence_rate(GridDensity.uniform(grid), spec, iters=30)
    assert 0.0 < rate.rate < 1.0


def test_closed_form_1d_requires_validity():
    grid = SimplexGrid(1, 32)
    with pytest.raises(ValueError, match="p_1"):
        closed_form_density_1d(AffineWeights([0.5, 0.0]), grid)


def test_closed_form_1d_symmetric():
    grid = SimplexGrid(1, 64)
    out = closed_form_density_1d(ConstantWeights([0.5, 0.5]), grid)
    assert np.max(np.abs(out.masses - out.masses[::-1])) <= 1e-8


def test_closed_form_1d_matches_beta():
    grid = SimplexGrid(1, 64)
    out = closed_form_density_1d(ConstantWeights([0.4, 0.6]), grid)
    ref = cell_integrals(DirichletParams([0.4, 0.6]), grid)
    assert np.abs(out.masses - ref / ref.sum()).sum() <= 1e-6


def test_pushforward_integral_forms_agree():
    spec = ConstantWeights([0.3, 0.5, 0.2])
    params = DirichletParams([2.0, 3.0, 4.0])

    def g(pts):
        return density_batch(params, pts)

    for y in (np.array([0.3, 0.4]), np.array([0.2, 0.2]), np.array([0.5, 0.1])):
        t_val = pushforward_integral_form(g, spec, y, form="t")
        s_val = pushforward_integral_form(g, spec, y, form="s")
        assert t_val == pytest.approx(s_val, rel=1e-9)


def test_pushforward_integral_form_matches_matrix():
    spec = ConstantWeights([0.3, 0.5, 0.2])
    params = DirichletParams([2.0, 3.0, 4.0])
    grid = SimplexGrid(2, 32)
    g = cell_masses(params, grid)
    pushed = push_density(g, spec, matrix=transition_matrix(spec, grid))
    values = pushed.masses / grid.cell_volume

    def g_fn(pts):
        return density_batch(params, pts)

    interior = [np.array([0.3, 0.4]), np.array([0.25, 0.25]), np.array([0.4, 0.2])]
    for y in interior:
        cid = int(grid.locate(y[None, :])[0])
        direct = pushforward_integral_form(g_fn, spec, y, form="s")
        assert values[cid] == pytest.approx(direct, rel=0.08)


def test_grid_density_validation():
    grid = SimplexGrid(2, 4)
    with pytest.raises(ValueError):
        GridDensity(grid, np.full(grid.n_cells, 2.0 / grid.n_cells))
    with pytest.raises(ValueError):
        GridDensity(grid, np.ones(3))


def test_density_csv(tmp_path):
    grid = SimplexGrid(1, 8)
    g = GridDensity.uniform(grid)
    path = tmp_path / "density.csv"
    g.to_csv(path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "cell_id,x1,mass"
    assert len(lines) == 9

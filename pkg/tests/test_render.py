from simplexchain.absorbing import classify_2d
from simplexchain.fixtures import hexagon_barrier_spec, three_vertex_spec
from simplexchain.operators import GridDensity, SimplexGrid
from simplexchain.render import classification_svg, density_svg


def test_density_svg_2d():
    grid = SimplexGrid(2, 8)
    svg = density_svg(GridDensity.uniform(grid))
    assert svg.startswith("<svg")
    assert svg.count("<polygon") == grid.n_cells + 1
    assert "linear" in svg


def test_density_svg_1d_log():
    grid = SimplexGrid(1, 16)
    svg = density_svg(GridDensity.uniform(grid), scale="log")
    assert "<rect" in svg
    assert "log" in svg


def test_classification_svg_members():
    svg = classification_svg(classify_2d(three_vertex_spec(), resolution=32))
    assert svg.count("<circle") == 3
    svg2 = classification_svg(classify_2d(hexagon_barrier_spec(), resolution=32))
    assert "fill-opacity" in svg2

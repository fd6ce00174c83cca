"""Discretized transition and push-forward operators on a gridded simplex.

The transition operator averages a function over one chain step; its dual
pushes a probability density forward.  The dual is realized as the exact
adjoint of a sparse transition matrix whose rows are the push-forward of
the uniform segment parameter from each cell center, so mass is conserved
to rounding and no boundary-singular integral is ever sampled directly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.integrate
import scipy.sparse

from .geometry import vertex_coords
from .weights import WeightSpec, _locate_lattice


@dataclass(frozen=True)
class SimplexGrid:
    """Equal-volume cells on the 1- or 2-simplex.

    d=1: m intervals of width 1/m.  d=2: a regular triangulation with m*m
    triangles; "lower" triangles have the right angle at the lattice point
    (a, b)/m, "upper" ones fill the remaining half-cells.
    """

    dim: int
    resolution: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("grids support d = 1 or 2 only")
        if self.resolution < 1:
            raise ValueError("resolution must be >= 1")
        m = self.resolution
        if self.dim == 1:
            centers = ((np.arange(m) + 0.5) / m)[:, None]
            kinds = np.zeros(m, dtype=np.int8)
            ab = np.stack([np.arange(m), np.zeros(m, dtype=int)], axis=1)
            lower_ids = np.arange(m, dtype=int)[:, None]
            upper_ids = None
        else:
            lower_ids = -np.ones((m, m), dtype=int)
            upper_ids = -np.ones((m, m), dtype=int)
            rows = []
            n = 0
            for a in range(m):
                for b in range(m - a):
                    lower_ids[a, b] = n
                    rows.append((0, a, b))
                    n += 1
            for a in range(m):
                for b in range(m - 1 - a):
                    upper_ids[a, b] = n
                    rows.append((1, a, b))
                    n += 1
            kinds = np.array([r[0] for r in rows], dtype=np.int8)
            ab = np.array([(r[1], r[2]) for r in rows], dtype=int)
            h = 1.0 / m
            centers = np.empty((n, 2))
            low = kinds == 0
            centers[low] = (ab[low] + 1.0 / 3.0) * h
            centers[~low] = (ab[~low] + 2.0 / 3.0) * h
        object.__setattr__(self, "_centers", centers)
        object.__setattr__(self, "_kinds", kinds)
        object.__setattr__(self, "_ab", ab)
        object.__setattr__(self, "_lower_ids", lower_ids)
        object.__setattr__(self, "_upper_ids", upper_ids)

    @property
    def n_cells(self) -> int:
        return self._centers.shape[0]

    @property
    def centers(self) -> np.ndarray:
        return self._centers

    @property
    def cell_volume(self) -> float:
        return self.total_volume / self.n_cells

    @property
    def total_volume(self) -> float:
        return 1.0 / math.factorial(self.dim)

    def locate(self, points: np.ndarray) -> np.ndarray:
        """Cell id containing each point; boundary ties resolved low-side."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        m = self.resolution
        if self.dim == 1:
            k = np.clip((points[:, 0] * m).astype(int), 0, m - 1)
            return k
        a, b, f1, f2 = _locate_lattice(points, m)
        upper = (f1 + f2 > 1.0) & (a + b <= m - 2)
        ids = np.where(upper, self._upper_ids[a, b], self._lower_ids[a, b])
        return ids

    def cell_triangles(self) -> np.ndarray:
        """Vertex coordinates of every cell: (n, 3, 2) for d=2."""
        if self.dim != 2:
            raise ValueError("cell_triangles requires d = 2")
        h = 1.0 / self.resolution
        ab = self._ab
        tri = np.empty((self.n_cells, 3, 2))
        low = self._kinds == 0
        tri[low, 0] = ab[low] * h
        tri[low, 1] = (ab[low] + [1, 0]) * h
        tri[low, 2] = (ab[low] + [0, 1]) * h
        up = ~low
        tri[up, 0] = (ab[up] + [1, 0]) * h
        tri[up, 1] = (ab[up] + [0, 1]) * h
        tri[up, 2] = (ab[up] + [1, 1]) * h
        return tri

    def vertex_cells(self) -> np.ndarray:
        """Ids of the cells whose closure contains a simplex vertex."""
        m = self.resolution
        if self.dim == 1:
            return np.array([0, m - 1])
        return np.array([
            self._lower_ids[0, 0],
            self._lower_ids[m - 1, 0],
            self._lower_ids[0, m - 1],
        ])


@dataclass(frozen=True)
class GridDensity:
    """Cell masses of a probability density on a SimplexGrid."""

    grid: SimplexGrid
    masses: np.ndarray

    def __post_init__(self):
        masses = np.asarray(self.masses, dtype=float)
        if masses.shape != (self.grid.n_cells,):
            raise ValueError("mass vector does not match the grid")
        if masses.min() < -1e-12:
            raise ValueError(f"negative cell mass {masses.min()!r}")
        total = masses.sum()
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"cell masses sum to {total!r}, not 1")
        masses = masses.copy()
        masses.flags.writeable = False
        object.__setattr__(self, "masses", masses)

    @classmethod
    def uniform(cls, grid: SimplexGrid) -> "GridDensity":
        return cls(grid, np.full(grid.n_cells, 1.0 / grid.n_cells))

    @classmethod
    def from_masses(cls, grid: SimplexGrid, raw: np.ndarray) -> "GridDensity":
        raw = np.maximum(np.asarray(raw, dtype=float), 0.0)
        return cls(grid, raw / raw.sum())

    def l1_distance(self, other: "GridDensity") -> float:
        return float(np.abs(self.masses - other.masses).sum())

    def density_values(self) -> np.ndarray:
        """Pointwise density (mass per volume) per cell."""
        return self.masses / self.grid.cell_volume

    def to_csv(self, path) -> None:
        d = self.grid.dim
        header = "cell_id," + ",".join(f"x{j + 1}" for j in range(d)) + ",mass"
        lines = [header]
        for cid in range(self.grid.n_cells):
            coords = ",".join(repr(float(v)) for v in self.grid.centers[cid])
            lines.append(f"{cid},{coords},{self.masses[cid]!r}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


@dataclass(frozen=True)
class GridFunction:
    """Values of a bounded function at the cell centers."""

    grid: SimplexGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_cells,):
            raise ValueError("value vector does not match the grid")
        if not np.isfinite(values).all():
            raise ValueError("grid function values must be finite")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callable(cls, grid: SimplexGrid, fn: Callable[[np.ndarray], np.ndarray]):
        return cls(grid, np.asarray(fn(grid.centers), dtype=float))

    @classmethod
    def ones(cls, grid: SimplexGrid) -> "GridFunction":
        return cls(grid, np.ones(grid.n_cells))

    def sup_distance(self, other: "GridFunction") -> float:
        return float(np.max(np.abs(self.values - other.values)))


# ---------------------------------------------------------------------------
# Transition matrix (push-forward of the segment measure from cell centers)
# ---------------------------------------------------------------------------

def _segment_crossings(grid: SimplexGrid, centers: np.ndarray, i: int) -> np.ndarray:
    """Sorted parameter values where center->vertex segments cross cell lines.

    The segment is y(t) = t*x + (1-t)*e_i for t in [0, 1].  Returns the
    padded sorted parameter array including 0 and 1, NaN where invalid.
    """
    m = grid.resolution
    e = vertex_coords(i, grid.dim)
    kh = np.arange(1, m) / m
    cols = [np.zeros((centers.shape[0], 1)), np.ones((centers.shape[0], 1))]
    if grid.dim == 1:
        families = [(centers[:, 0], e[0])]
    else:
        families = [
            (centers[:, 0], e[0]),
            (centers[:, 1], e[1]),
            (centers[:, 0] + centers[:, 1], e[0] + e[1]),
        ]
    for value, origin in families:
        den = value - origin
        safe = np.where(np.abs(den) < 1e-300, np.nan, den)
        t = (kh[None, :] - origin) / safe[:, None]
        t[(t <= 0.0) | (t >= 1.0)] = np.nan
        cols.append(t)
    t_all = np.concatenate(cols, axis=1)
    t_all.sort(axis=1)
    return t_all


def trace_segments(grid: SimplexGrid, points: np.ndarray, i: int):
    """Cells crossed by the segments from each point toward vertex e_i.

    Returns (point_index, cell_id, dt): for every crossed cell, the index
    of the source point, the cell, and the exact measure of the segment
    parameter spent inside it (the dt sum per point is 1).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    e = vertex_coords(i, grid.dim)
    t_all = _segment_crossings(grid, points, i)
    diffs = np.diff(t_all, axis=1)
    mids = 0.5 * (t_all[:, 1:] + t_all[:, :-1])
    valid = np.isfinite(diffs) & (diffs > 1e-15)
    row_idx, seg_idx = np.nonzero(valid)
    t_mid = mids[row_idx, seg_idx]
    pts = t_mid[:, None] * points[row_idx] + (1.0 - t_mid[:, None]) * e
    cells = grid.locate(pts)
    return row_idx, cells, diffs[row_idx, seg_idx]


def transition_matrix(spec: WeightSpec, grid: SimplexGrid, nodes: int = 32,
                      method: str = "exact", chunk: int = 4096) -> scipy.sparse.csr_matrix:
    """Row-stochastic matrix of the one-step kernel between grid cells.

    Row c carries, for each vertex i, mass p_i(center_c) distributed over
    the cells crossed by the segment from center_c to e_i.  With
    method="exact" the distribution is the exact interval measure of the
    uniform segment parameter; with method="nodes" equal masses
    p_i(center)/nodes are deposited at the midpoint parameters
    (k + 1/2)/nodes.  Rows are normalized to sum to 1 after assembly.
    """
    if grid.dim != spec.dim:
        raise ValueError("grid and weight spec dimensions differ")
    if method not in ("exact", "nodes"):
        raise ValueError(f"unknown method {method!r}")
    if method == "nodes" and nodes < 8:
        raise ValueError("need at least 8 nodes")
    n = grid.n_cells
    blocks = []
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        centers = grid.centers[lo:hi]
        weights = spec.evaluate_batch(centers)
        rows_acc, cols_acc, data_acc = [], [], []
        for i in range(spec.dim + 1):
            if method == "exact":
                row_idx, cells, dt = trace_segments(grid, centers, i)
                mass = dt * weights[row_idx, i]
            else:
                e = vertex_coords(i, grid.dim)
                t_mid = np.tile((np.arange(nodes) + 0.5) / nodes, centers.shape[0])
                row_idx = np.repeat(np.arange(centers.shape[0]), nodes)
                mass = np.repeat(weights[:, i] / nodes, nodes)
                pts = t_mid[:, None] * centers[row_idx] + (1.0 - t_mid[:, None]) * e
                cells = grid.locate(pts)
            rows_acc.append(row_idx + lo)
            cols_acc.append(cells)
            data_acc.append(mass)
        block = scipy.sparse.coo_matrix(
            (np.concatenate(data_acc),
             (np.concatenate(rows_acc), np.concatenate(cols_acc))),
            shape=(n, n),
        )
        blocks.append(block.tocsr())
    matrix = blocks[0]
    for extra in blocks[1:]:
        matrix = matrix + extra
    row_sums = np.asarray(matrix.sum(axis=1)).ravel()
    inv = scipy.sparse.diags(1.0 / row_sums)
    return (inv @ matrix).tocsr()


# ---------------------------------------------------------------------------
# Operator applications
# ---------------------------------------------------------------------------

def _gauss_legendre_01(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(nodes)
    return (x + 1.0) / 2.0, w / 2.0


def apply_transition(fn: GridFunction, spec: WeightSpec, nodes: int = 32) -> GridFunction:
    """One application of the transition operator to a grid function.

    At each cell center x, averages fn over the segment toward each vertex
    with Gauss-Legendre quadrature and combines with the weights p_i(x).
    The quadrature mass is divided out, so constants are fixed exactly and
    nonnegative functions stay nonnegative.
    """
    if nodes < 8:
        raise ValueError("need at least 8 quadrature nodes")
    grid = fn.grid
    if grid.dim != spec.dim:
        raise ValueError("grid and weight spec dimensions differ")
    t, w = _gauss_legendre_01(nodes)
    centers = grid.centers
    weights = spec.evaluate_batch(centers)
    numer = np.zeros(grid.n_cells)
    denom = np.zeros(grid.n_cells)
    ones = np.ones((grid.n_cells, nodes))
    for i in range(spec.dim + 1):
        e = vertex_coords(i, grid.dim)
        pts = (t[None, :, None] * centers[:, None, :]
               + (1.0 - t)[None, :, None] * e[None, None, :])
        cells = grid.locate(pts.reshape(-1, grid.dim)).reshape(grid.n_cells, nodes)
        vals = fn.values[cells]
        numer += weights[:, i] * (vals @ w)
        denom += weights[:, i] * (ones @ w)
    return GridFunction(grid, numer / denom)


def push_density(g: GridDensity, spec: WeightSpec,
                 matrix: scipy.sparse.csr_matrix | None = None,
                 nodes: int = 32) -> GridDensity:
    """Push a density forward one step: the adjoint of the transition matrix.

    Total mass is conserved to rounding because the matrix rows sum to 1.
    """
    if matrix is None:
        matrix = transition_matrix(spec, g.grid, nodes=nodes)
    new_masses = matrix.T @ g.masses
    out = GridDensity.__new__(GridDensity)
    new_masses = np.maximum(new_masses, 0.0)
    new_masses.flags.writeable = False
    object.__setattr__(out, "grid", g.grid)
    object.__setattr__(out, "masses", new_masses)
    return out


@dataclass(frozen=True)
class PowerIterationResult:
    """Outcome of iterating the push-forward to a fixed point.

    status is "converged", "degenerate" (mass concentrated at vertex cells:
    the invariant measure has atoms, no density exists), or "max_iter".
    """

    density: GridDensity
    iterations: int
    final_step: float
    status: str
    step_history: tuple[float, ...]

    @property
    def converged(self) -> bool:
        return self.status in ("converged", "degenerate")


def lift_density(g: GridDensity, factor: int) -> GridDensity:
    """Piecewise-constant lift onto the factor-subdivided grid."""
    fine = SimplexGrid(g.grid.dim, g.grid.resolution * factor)
    owner = g.grid.locate(fine.centers)
    counts = np.bincount(owner, minlength=g.grid.n_cells)
    out = GridDensity.__new__(GridDensity)
    masses = g.masses[owner] / counts[owner]
    masses.flags.writeable = False
    object.__setattr__(out, "grid", fine)
    object.__setattr__(out, "masses", masses)
    return out


def aggregate_density(g: GridDensity, coarse: SimplexGrid) -> GridDensity:
    """Sum fine-cell masses into the coarse cells containing their centers."""
    owner = coarse.locate(g.grid.centers)
    masses = np.zeros(coarse.n_cells)
    np.add.at(masses, owner, g.masses)
    out = GridDensity.__new__(GridDensity)
    masses.flags.writeable = False
    object.__setattr__(out, "grid", coarse)
    object.__setattr__(out, "masses", masses)
    return out


def power_iterate(g0: GridDensity, spec: WeightSpec, tol: float = 1e-8,
                  max_iter: int = 10_000,
                  matrix: scipy.sparse.csr_matrix | None = None,
                  nodes: int = 32, refine: int = 1) -> PowerIterationResult:
    """Iterate the push-forward from g0 until the L1 step falls below tol.

    With refine >= 2 the iteration runs on a factor-refined grid and the
    converged masses are aggregated back to the requested resolution, which
    sharpens boundary layers of singular invariant densities without
    changing the reporting grid.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if refine > 1:
        fine_result = power_iterate(lift_density(g0, refine), spec, tol=tol,
                                    max_iter=max_iter, nodes=nodes)
        density = aggregate_density(fine_result.density, g0.grid)
        return PowerIterationResult(density=density,
                                    iterations=fine_result.iterations,
                                    final_step=fine_result.final_step,
                                    status=fine_result.status,
                                    step_history=fine_result.step_history)
    if matrix is None:
        matrix = transition_matrix(spec, g0.grid, nodes=nodes)
    g = g0
    history = []
    step = math.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        g_next = push_density(g, spec, matrix=matrix)
        step = g.l1_distance(g_next)
        history.append(step)
        g = g_next
        if step < tol:
            break
    status = "converged" if step < tol else "max_iter"
    corner_mass = float(g.masses[g.grid.vertex_cells()].sum())
    if corner_mass >= 0.5:
        status = "degenerate"
    return PowerIterationResult(density=g, iterations=iterations, final_step=step,
                                status=status, step_history=tuple(history))


@dataclass(frozen=True)
class RateEstimate:
    """Least-squares geometric decay rate of the L1 distance to the limit."""

    rate: float
    fit_residual: float
    n_points: int
    distances: tuple[float, ...]


def estimate_convergence_rate(g0: GridDensity, spec: WeightSpec, iters: int = 30,
                              matrix: scipy.sparse.csr_matrix | None = None,
                              nodes: int = 32, tol: float = 1e-10) -> RateEstimate:
    """Fit log ||g_k - g_inf||_1 against k after converging to g_inf first.

    The geometric decay is an asymptotic property, so the first quarter of
    the usable iterates (the transient of the initial density) is excluded
    from the fit.  fit_residual is the RMS deviation of the log-distances
    around the linear fit (0.05 means points lie within about 5% of the
    fitted geometric decay).
    """
    if matrix is None:
        matrix = transition_matrix(spec, g0.grid, nodes=nodes)
    limit = power_iterate(g0, spec, tol=tol, max_iter=20_000, matrix=matrix)
    g_inf = limit.density
    g = g0
    dists = []
    for _ in range(iters):
        g = push_density(g, spec, matrix=matrix)
        dists.append(g.l1_distance(g_inf))
    dists = np.array(dists)
    floor = max(10.0 * limit.final_step, 1e-13)
    usable = np.nonzero(dists > floor)[0]
    skip = max(2, usable.size // 4)
    usable = usable[skip:]
    if usable.size < 3:
        raise ValueError("fewer than 3 usable iterates above the error floor")
    k = usable + 1.0
    logs = np.log(dists[usable])
    slope, intercept = np.polyfit(k, logs, 1)
    fit = slope * k + intercept
    residual = float(np.sqrt(np.mean((logs - fit) ** 2)))
    return RateEstimate(rate=float(np.exp(slope)), fit_residual=residual,
                        n_points=int(usable.size), distances=tuple(dists))


# ---------------------------------------------------------------------------
# Closed-form invariant density for d = 1
# ---------------------------------------------------------------------------

def _log_density_exponent_1d(spec: WeightSpec, nodes: int = 96) -> Callable[[float], float]:
    """The exponent A(y) = int_{1/2}^{y} [p1(t)/(1-t) - p0(t)/t] dt.

    Both terms are integrated after a logarithmic substitution, which turns
    the endpoint singularities into smooth bounded integrands.
    """
    gl_x, gl_w = _gauss_legendre_01(nodes)

    def p_at(values: np.ndarray) -> np.ndarray:
        return spec.evaluate_batch(values[:, None])

    def exponent(y: float) -> float:
        y = min(max(y, 1e-300), 1.0 - 1e-16)
        # int_{1/2}^{y} p0(t)/t dt  with t = e^u
        lo, hi = math.log(0.5), math.log(y)
        u = lo + (hi - lo) * gl_x
        term0 = (hi - lo) * float(p_at(np.exp(u))[:, 0] @ gl_w)
        # int_{1/2}^{y} p1(t)/(1-t) dt  with 1 - t = e^v
        lo2, hi2 = math.log(0.5), math.log(max(1.0 - y, 1e-300))
        v = lo2 + (hi2 - lo2) * gl_x
        term1 = -(hi2 - lo2) * float(p_at(1.0 - np.exp(v))[:, 1] @ gl_w)
        return term1 - term0

    return exponent


def closed_form_density_1d(spec: WeightSpec, grid: SimplexGrid) -> GridDensity:
    """Numerically integrated closed-form invariant density for d = 1.

    Valid when p_1(0) > 0 and p_0(1) > 0; otherwise no invariant density
    exists on the open interval and a ValueError explains the violation.
    """
    if spec.dim != 1 or grid.dim != 1:
        raise ValueError("closed-form density requires d = 1")
    p_at_0 = spec.evaluate(np.array([0.0]))
    p_at_1 = spec.evaluate(np.array([1.0]))
    if p_at_0[1] <= 0.0 or p_at_1[0] <= 0.0:
        raise ValueError(
            "closed-form density requires p_1(0) > 0 and p_0(1) > 0; "
            f"got p_1(0)={p_at_0[1]!r}, p_0(1)={p_at_1[0]!r}"
        )
    exponent = _log_density_exponent_1d(spec)

    def integrand(y: float) -> float:
        return math.exp(exponent(y))

    m = grid.resolution
    edges = np.arange(m + 1) / m
    masses = np.empty(m)
    with warnings.catch_warnings():
        # Integrable endpoint singularities make QUADPACK report roundoff
        # in its extrapolation; the returned values are still accurate.
        warnings.simplefilter("ignore", scipy.integrate.IntegrationWarning)
        for k in range(m):
            val, _ = scipy.integrate.quad(integrand, edges[k], edges[k + 1],
                                          epsabs=1e-12, epsrel=1e-10, limit=200)
            masses[k] = val
    return GridDensity.from_masses(grid, masses)


# ---------------------------------------------------------------------------
# Integral form of the push-forward (interior cross-check)
# ---------------------------------------------------------------------------

def pushforward_integral_form(g_fn: Callable[[np.ndarray], np.ndarray],
                              spec: WeightSpec, y, form: str = "s",
                              nodes: int = 128) -> float:
    """Evaluate the pushed-forward density at an interior point directly.

    Two equivalent quadrature forms are provided: "t" integrates over the
    contraction parameter, "s" over its reciprocal.  Used as a cross-check
    of the adjoint-matrix route at interior points; g_fn maps (n, d)
    coordinates to density values.
    """
    from .geometry import SimplexPoint

    if isinstance(y, SimplexPoint):
        coords = y.coords
    else:
        coords = np.asarray(y, dtype=float)
    d = spec.dim
    bary = np.empty(d + 1)
    bary[0] = 1.0 - coords.sum()
    bary[1:] = coords
    if bary.min() <= 1e-12:
        raise ValueError("integral form needs an interior point")
    gl_x, gl_w = _gauss_legendre_01(nodes)
    total = 0.0
    for i in range(d + 1):
        e = vertex_coords(i, d)
        yi = bary[i]
        if form == "t":
            lo, hi = 1.0 - yi, 1.0
            t = lo + (hi - lo) * gl_x
            z = coords[None, :] / t[:, None] + (1.0 - 1.0 / t[:, None]) * e
            np.clip(z, 0.0, 1.0, out=z)
            gi = g_fn(z) * spec.evaluate_batch(z)[:, i]
            total += (hi - lo) * float((t ** (-d) * gi) @ gl_w)
        elif form == "s":
            lo, hi = 1.0, 1.0 / (1.0 - yi)
            s = lo + (hi - lo) * gl_x
            z = s[:, None] * coords[None, :] + (1.0 - s[:, None]) * e
            np.clip(z, 0.0, 1.0, out=z)
            gi = g_fn(z) * spec.evaluate_batch(z)[:, i]
            total += (hi - lo) * float((s ** (d - 2) * gi) @ gl_w)
        else:
            raise ValueError(f"unknown form {form!r}")
    return total

"""Weight functions p_0..p_d on the simplex and their structural profiles.

Four families are supported: constant vectors, affine weights
``p_i(y) = theta_i + (1 - |theta|) * y_i`` in the barycentric coordinates,
tabulated values on a simplicial mesh with barycentric-linear interpolation,
and arbitrary user callbacks.  All evaluation is vectorized; scalar
evaluation goes through the batch path so both produce identical floats.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import EPS_GEOM, SimplexPoint, vertex_coords
from .rng import stream

#: Positivity threshold for edge-support sets: values at or below are
#: treated as zero so floating noise cannot create spurious support.
EPS_POS = 1e-9

#: Tolerance on the simplex constraint of an evaluated weight vector.
EPS_SUM = 1e-10


class WeightValidationError(ValueError):
    """An evaluated weight vector is not a probability vector."""


def uniform_simplex_sample(dim: int, rng: np.random.Generator, n: int) -> np.ndarray:
    """n points drawn uniformly from the d-simplex, as (n, d) coordinates."""
    expo = rng.standard_exponential((n, dim + 1))
    bary = expo / expo.sum(axis=1, keepdims=True)
    return bary[:, 1:]


def _as_coords(x, dim: int) -> np.ndarray:
    if isinstance(x, SimplexPoint):
        coords = x.coords
    else:
        coords = np.asarray(x, dtype=float)
    if coords.shape != (dim,):
        raise WeightValidationError(f"expected a point of dimension {dim}, got shape {coords.shape}")
    return coords


class WeightSpec:
    """Base class for weight functions on the d-simplex."""

    kind: str = "abstract"

    def __init__(self, dim: int):
        self.dim = int(dim)

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        """Weight vectors for an (n, d) array of points; shape (n, d+1)."""
        raise NotImplementedError

    def evaluate(self, x) -> np.ndarray:
        """Weight vector (p_0(x), ..., p_d(x)) for a single point."""
        coords = _as_coords(x, self.dim)
        return self.evaluate_batch(coords[None, :])[0]

    def __call__(self, x) -> np.ndarray:
        return self.evaluate(x)

    def to_dict(self) -> dict:
        raise NotImplementedError

    def _barycentric_batch(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        bary = np.empty((points.shape[0], self.dim + 1))
        bary[:, 0] = np.maximum(1.0 - points.sum(axis=1), 0.0)
        bary[:, 1:] = points
        return bary


class ConstantWeights(WeightSpec):
    """Fixed probability vector, independent of position."""

    kind = "constant"

    def __init__(self, p: Sequence[float]):
        p = np.asarray(p, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise WeightValidationError("constant weights need a vector of length d+1 >= 2")
        if p.min() < -EPS_SUM:
            raise WeightValidationError(f"negative weight {p.min()!r}")
        total = p.sum()
        if abs(total - 1.0) > EPS_SUM:
            raise WeightValidationError(f"weights sum to {total!r}, not 1")
        super().__init__(p.size - 1)
        self.p = np.maximum(p, 0.0) / np.maximum(p, 0.0).sum()
        self.p.flags.writeable = False

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return np.broadcast_to(self.p, (points.shape[0], self.dim + 1)).copy()

    def to_dict(self) -> dict:
        return {"kind": "constant", "p": self.p.tolist()}


class AffineWeights(WeightSpec):
    """Affine weights p_i(y) = theta_i + (1 - |theta|) * y_i in barycentric y.

    Entries of theta must be nonnegative with |theta| <= 1; |theta| = 1
    reduces to constant weights.
    """

    kind = "affine"

    def __init__(self, theta: Sequence[float]):
        theta = np.asarray(theta, dtype=float)
        if theta.ndim != 1 or theta.size < 2:
            raise WeightValidationError("affine weights need a vector of length d+1 >= 2")
        if theta.min() < 0.0:
            raise WeightValidationError(f"negative entry {theta.min()!r} in theta")
        if theta.sum() > 1.0 + EPS_SUM:
            raise WeightValidationError(f"|theta| = {theta.sum()!r} exceeds 1")
        super().__init__(theta.size - 1)
        self.theta = theta.copy()
        self.theta.flags.writeable = False
        self.slope = 1.0 - float(theta.sum())

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        return self.theta + self.slope * self._barycentric_batch(points)

    def to_dict(self) -> dict:
        return {"kind": "affine", "theta": self.theta.tolist()}


def _mesh_point_count(dim: int, resolution: int) -> int:
    if dim == 1:
        return resolution + 1
    return (resolution + 1) * (resolution + 2) // 2


def _mesh_index_2d(resolution: int) -> np.ndarray:
    """Lookup table idx[j, k] for lattice points (j, k)/R with j + k <= R."""
    table = -np.ones((resolution + 1, resolution + 1), dtype=int)
    n = 0
    for j in range(resolution + 1):
        for k in range(resolution + 1 - j):
            table[j, k] = n
            n += 1
    return table


def mesh_points(dim: int, resolution: int) -> np.ndarray:
    """Lattice points of the simplicial mesh, as (n, d) coordinates."""
    if dim == 1:
        return (np.arange(resolution + 1) / resolution)[:, None]
    pts = []
    for j in range(resolution + 1):
        for k in range(resolution + 1 - j):
            pts.append((j / resolution, k / resolution))
    return np.array(pts)


class TabulatedWeights(WeightSpec):
    """Weights given at simplicial-mesh vertices, barycentric-linear in between.

    Interpolated vectors are renormalized, which preserves continuity and
    the probability constraint.
    """

    kind = "tabulated"

    def __init__(self, dim: int, resolution: int, values: np.ndarray):
        if dim not in (1, 2):
            raise WeightValidationError("tabulated weights support d = 1 or 2")
        if resolution < 1:
            raise WeightValidationError("mesh resolution must be >= 1")
        values = np.asarray(values, dtype=float)
        expected = _mesh_point_count(dim, resolution)
        if values.shape != (expected, dim + 1):
            raise WeightValidationError(
                f"need {expected} x {dim + 1} mesh values, got shape {values.shape}"
            )
        if values.min() < -EPS_SUM:
            raise WeightValidationError(f"negative mesh value {values.min()!r}")
        sums = values.sum(axis=1)
        if np.max(np.abs(sums - 1.0)) > EPS_SUM:
            raise WeightValidationError("mesh rows must sum to 1 within 1e-10")
        super().__init__(dim)
        self.resolution = int(resolution)
        self.values = np.maximum(values, 0.0)
        self.values /= self.values.sum(axis=1, keepdims=True)
        self.values.flags.writeable = False
        self._index2d = _mesh_index_2d(resolution) if dim == 2 else None

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        r = self.resolution
        if self.dim == 1:
            u = np.clip(points[:, 0] * r, 0.0, float(r))
            a = np.minimum(u.astype(int), r - 1)
            f = u - a
            out = (1.0 - f)[:, None] * self.values[a] + f[:, None] * self.values[a + 1]
        else:
            a, b, f1, f2 = _locate_lattice(points, r)
            idx = self._index2d
            lower = f1 + f2 <= 1.0
            out = np.empty((points.shape[0], 3))
            la, lb = a[lower], b[lower]
            out[lower] = (
                (1.0 - f1[lower] - f2[lower])[:, None] * self.values[idx[la, lb]]
                + f1[lower, None] * self.values[idx[la + 1, lb]]
                + f2[lower, None] * self.values[idx[la, lb + 1]]
            )
            up = ~lower
            ua, ub = a[up], b[up]
            out[up] = (
                (1.0 - f2[up])[:, None] * self.values[idx[ua + 1, ub]]
                + (1.0 - f1[up])[:, None] * self.values[idx[ua, ub + 1]]
                + (f1[up] + f2[up] - 1.0)[:, None] * self.values[idx[ua + 1, ub + 1]]
            )
        np.maximum(out, 0.0, out=out)
        return out / out.sum(axis=1, keepdims=True)

    def to_dict(self) -> dict:
        return {
            "kind": "tabulated",
            "dim": self.dim,
            "grid": {"resolution": self.resolution, "values": self.values.tolist()},
        }


def _locate_lattice(points: np.ndarray, r: int):
    """Map (n, 2) points to lattice cell (a, b) and local fractions (f1, f2).

    Guarantees a >= 0, b >= 0, a + b <= r - 1; points on the diagonal
    lattice lines are pulled into an adjacent valid cell deterministically.
    """
    u = points[:, 0] * r
    v = points[:, 1] * r
    a = np.clip(u.astype(int), 0, r - 1)
    b = np.clip(v.astype(int), 0, r - 1)
    for _ in range(2):
        over = a + b > r - 1
        if not np.any(over):
            break
        f1 = u - a
        f2 = v - b
        shrink_a = over & ((f1 <= f2) | (b == 0)) & (a > 0)
        shrink_b = over & ~shrink_a
        a[shrink_a] -= 1
        b[shrink_b & (b > 0)] -= 1
    f1 = u - a
    f2 = v - b
    return a, b, f1, f2


class ProgrammaticWeights(WeightSpec):
    """Weights from a user callback mapping (n, d) coordinates to (n, d+1).

    Output is validated on every call; with ``strict=True`` the callback is
    additionally pre-validated on a coarse grid at construction.
    """

    kind = "programmatic"

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], dim: int,
                 name: str = "programmatic", strict: bool = False):
        super().__init__(dim)
        self.fn = fn
        self.name = name
        if strict:
            grid = uniform_simplex_sample(dim, stream(0, 0), 256)
            self.evaluate_batch(grid)

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        out = np.asarray(self.fn(points), dtype=float)
        if out.shape != (points.shape[0], self.dim + 1):
            raise WeightValidationError(
                f"callback {self.name!r} returned shape {out.shape}, "
                f"expected {(points.shape[0], self.dim + 1)}"
            )
        bad = ~np.isfinite(out).all(axis=1)
        bad |= out.min(axis=1) < -EPS_SUM
        bad |= np.abs(out.sum(axis=1) - 1.0) > EPS_SUM
        if np.any(bad):
            x = points[np.argmax(bad)]
            raise WeightValidationError(
                f"callback {self.name!r} returned an invalid weight vector at x={x.tolist()}"
            )
        out = np.maximum(out, 0.0)
        return out / out.sum(axis=1, keepdims=True)

    def to_dict(self) -> dict:
        return {"kind": "programmatic", "name": self.name, "dim": self.dim}


# ---------------------------------------------------------------------------
# Boundary profile: vertex values and edge supports
# ---------------------------------------------------------------------------

#: Edges opposite each vertex of the 2-simplex, as (start, end) vertex ids.
#: The support of p_i is sampled on the edge opposite vertex i.
OPPOSITE_EDGE = {0: (1, 2), 1: (0, 2), 2: (0, 1)}


def edge_point(edge: tuple[int, int], s, dim: int = 2) -> np.ndarray:
    """Coordinates of (1-s)*e_a + s*e_b for parameters s in [0, 1]."""
    a = vertex_coords(edge[0], dim)
    b = vertex_coords(edge[1], dim)
    s = np.asarray(s, dtype=float)
    return (1.0 - s)[..., None] * a + s[..., None] * b


@dataclass(frozen=True)
class BoundaryProfile:
    """Weight values at the vertices and supports along the edges.

    ``vertex_values[i, j] = p_j(e_i)``.  For d=2, ``edge_supports[i]`` lists
    the closed parameter intervals of the edge opposite vertex i on which
    p_i is positive, outer-rounded by half a sample spacing.
    """

    vertex_values: np.ndarray
    edge_supports: dict[int, list[tuple[float, float]]] | None
    resolution: int

    def support_empty(self, i: int) -> bool:
        return not self.edge_supports[i]

    def to_dict(self) -> dict:
        supports = None
        if self.edge_supports is not None:
            supports = {str(i): [list(iv) for iv in ivs] for i, ivs in self.edge_supports.items()}
        return {
            "vertex_values": self.vertex_values.tolist(),
            "edge_supports": supports,
            "resolution": self.resolution,
        }


def _positive_runs_to_intervals(s: np.ndarray, positive: np.ndarray) -> list[tuple[float, float]]:
    spacing = s[1] - s[0]
    intervals: list[tuple[float, float]] = []
    start = None
    for k, flag in enumerate(positive):
        if flag and start is None:
            start = s[k]
        elif not flag and start is not None:
            intervals.append((start, s[k - 1]))
            start = None
    if start is not None:
        intervals.append((start, s[-1]))
    # Outer-round by half a spacing; merge anything that then touches.
    rounded = [(max(0.0, lo - spacing / 2), min(1.0, hi + spacing / 2)) for lo, hi in intervals]
    merged: list[tuple[float, float]] = []
    for lo, hi in rounded:
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def boundary_profile(spec: WeightSpec, resolution: int = 64) -> BoundaryProfile:
    """Evaluate weights at the vertices and sample edge supports.

    Only d <= 2 is supported; edge supports are computed for d = 2 by
    sampling `resolution` points per edge against the positivity threshold
    EPS_POS.
    """
    if spec.dim > 2:
        raise WeightValidationError("boundary profiles are only defined for d <= 2")
    if resolution < 16:
        raise WeightValidationError("resolution must be at least 16")
    d = spec.dim
    verts = np.array([vertex_coords(i, d) for i in range(d + 1)])
    vertex_values = spec.evaluate_batch(verts)
    supports = None
    if d == 2:
        s = np.arange(resolution) / (resolution - 1)
        supports = {}
        for i, edge in OPPOSITE_EDGE.items():
            values = spec.evaluate_batch(edge_point(edge, s))[:, i]
            supports[i] = _positive_runs_to_intervals(s, values > EPS_POS)
    return BoundaryProfile(vertex_values=vertex_values, edge_supports=supports,
                           resolution=resolution)


# ---------------------------------------------------------------------------
# Empirical Hoelder estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HolderEstimate:
    """Empirical lower bound on the largest Hoelder seminorm of the weights.

    Distances are measured in the l1 norm on the d coordinates.  The
    ``history`` records the running maximum at quarter, half and full sample
    counts; steady growth across checkpoints sets ``possibly_not_holder``.
    """

    value: float
    alpha: float
    samples: int
    possibly_not_holder: bool
    history: tuple[tuple[int, float], ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "alpha": self.alpha,
            "samples": self.samples,
            "possibly_not_holder": self.possibly_not_holder,
            "history": [list(h) for h in self.history],
        }


def holder_constant(spec: WeightSpec, alpha: float = 1.0, samples: int = 1000,
                    seed: int = 0) -> HolderEstimate:
    """Estimate max_j sup |p_j(x) - p_j(y)| / |x - y|_1^alpha by sampling.

    Half the pairs are independent uniform points, half are local
    perturbations with log-uniform separations, which probe fine-scale
    behavior; the result is a lower bound on the true constant.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    if samples < 100:
        raise ValueError("need at least 100 sample pairs")
    rng = stream(seed, 0)
    d = spec.dim
    n_global = samples // 2
    n_local = samples - n_global

    x_g = uniform_simplex_sample(d, rng, n_global)
    y_g = uniform_simplex_sample(d, rng, n_global)

    x_l = uniform_simplex_sample(d, rng, n_local)
    direction = rng.standard_normal((n_local, d))
    direction /= np.maximum(np.linalg.norm(direction, axis=1, keepdims=True), 1e-300)
    delta = np.exp(rng.uniform(np.log(1e-6), np.log(0.5), size=n_local))
    y_l = x_l + delta[:, None] * direction
    np.maximum(y_l, 0.0, out=y_l)
    over = y_l.sum(axis=1) > 1.0
    y_l[over] /= y_l[over].sum(axis=1, keepdims=True)

    xs = np.vstack([x_g, x_l])
    ys = np.vstack([y_g, y_l])
    order = rng.permutation(samples)
    xs, ys = xs[order], ys[order]

    dist = np.abs(xs - ys).sum(axis=1)
    keep = dist > 1e-12
    px = spec.evaluate_batch(xs[keep])
    py = spec.evaluate_batch(ys[keep])
    ratios = np.max(np.abs(px - py), axis=1) / dist[keep] ** alpha

    n = ratios.size
    history = []
    for cut in (n // 4, n // 2, n):
        history.append((cut, float(ratios[:cut].max(initial=0.0))))
    est = history[-1][1]
    growing = (
        history[2][1] > 1.25 * history[1][1] > 0.0
        and history[1][1] > 1.25 * history[0][1] > 0.0
    )
    return HolderEstimate(value=est, alpha=alpha, samples=samples,
                          possibly_not_holder=bool(growing), history=tuple(history))


# ---------------------------------------------------------------------------
# JSON loading
# ---------------------------------------------------------------------------

def weights_from_dict(data: dict) -> WeightSpec:
    """Build a weight spec from its JSON document form."""
    try:
        kind = data["kind"]
    except (TypeError, KeyError):
        raise WeightValidationError("weight document must have a 'kind' field") from None
    if kind == "constant":
        return ConstantWeights(data["p"])
    if kind == "affine":
        return AffineWeights(data["theta"])
    if kind == "tabulated":
        grid = data["grid"]
        dim = int(data.get("dim", 2))
        return TabulatedWeights(dim, int(grid["resolution"]), np.asarray(grid["values"]))
    raise WeightValidationError(f"unknown weight kind {kind!r}")


def load_weights(path) -> WeightSpec:
    """Load a weight spec from a JSON file."""
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise WeightValidationError(
                f"malformed weight file {path}: line {exc.lineno} column {exc.colno}: {exc.msg}"
            ) from exc
    missing = {"constant": "p", "affine": "theta", "tabulated": "grid"}.get(data.get("kind"))
    if missing is not None and missing not in data:
        raise WeightValidationError(f"weight file {path} is missing field {missing!r}")
    return weights_from_dict(data)

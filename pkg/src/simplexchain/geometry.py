"""Geometry of the closed d-simplex and the vertex-contraction segment maps.

Points are stored by their d coordinates ``(x_1, ..., x_d)``; the weight of
the origin vertex, ``x_0 = 1 - sum(x)``, is always derived rather than
stored.  The chain's one-step maps are the affine contractions
``t*x + (1-t)*e_i`` toward the d+1 vertices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Tolerance for simplex membership and segment tests.  Violations within
#: this bound are clamped, anything beyond is rejected.
EPS_GEOM = 1e-12


class SimplexError(ValueError):
    """A point or segment violates simplex geometry beyond tolerance."""


def _clamped(coords: np.ndarray) -> np.ndarray:
    low = float(coords.min(initial=0.0))
    if low < -EPS_GEOM:
        raise SimplexError(f"coordinate {low!r} negative beyond tolerance")
    coords = np.maximum(coords, 0.0)
    total = float(coords.sum())
    if total > 1.0 + EPS_GEOM:
        raise SimplexError(f"coordinate sum {total!r} exceeds 1 beyond tolerance")
    if total > 1.0:
        coords = coords / total
    return coords


def clamp_coords_inplace(coords: np.ndarray) -> None:
    """Clamp an (n, d) array of near-feasible points onto the closed simplex.

    Same arithmetic as SimplexPoint construction, applied row-wise without
    validation; used by bulk simulation loops on trusted intermediate values.
    """
    np.maximum(coords, 0.0, out=coords)
    totals = coords.sum(axis=1)
    over = totals > 1.0
    if np.any(over):
        coords[over] /= totals[over, None]


@dataclass(frozen=True, eq=False)
class SimplexPoint:
    """A point of the closed d-simplex, stored as its d coordinates."""

    coords: np.ndarray

    def __init__(self, coords) -> None:
        arr = np.asarray(coords, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise SimplexError("coordinates must be a non-empty 1-d vector")
        arr = _clamped(arr.copy())
        arr.flags.writeable = False
        object.__setattr__(self, "coords", arr)

    @property
    def dim(self) -> int:
        return self.coords.size

    @property
    def barycentric(self) -> np.ndarray:
        """Full weight vector (x_0, x_1, ..., x_d); renormalized to sum to 1."""
        full = np.empty(self.dim + 1)
        full[0] = max(1.0 - float(self.coords.sum()), 0.0)
        full[1:] = self.coords
        return full / full.sum()

    def __eq__(self, other) -> bool:
        return isinstance(other, SimplexPoint) and np.array_equal(self.coords, other.coords)

    def __repr__(self) -> str:
        return f"SimplexPoint({self.coords.tolist()})"


def vertex(i: int, dim: int) -> SimplexPoint:
    """The i-th vertex of the d-simplex: the origin for i=0, else a basis point."""
    if not 0 <= i <= dim:
        raise SimplexError(f"vertex index {i} out of range for dimension {dim}")
    coords = np.zeros(dim)
    if i > 0:
        coords[i - 1] = 1.0
    return SimplexPoint(coords)


def vertex_coords(i: int, dim: int) -> np.ndarray:
    if not 0 <= i <= dim:
        raise SimplexError(f"vertex index {i} out of range for dimension {dim}")
    coords = np.zeros(dim)
    if i > 0:
        coords[i - 1] = 1.0
    return coords


def apply_segment_map(i: int, t: float, coords: np.ndarray) -> np.ndarray:
    """Raw map t*x + (1-t)*e_i on a coordinate vector, without clamping.

    Kept separate so the simulation loop and segment_map share the exact
    floating-point operations.
    """
    out = t * coords
    if i > 0:
        out[i - 1] += 1.0 - t
    return out


def segment_map(i: int, t: float, x: SimplexPoint) -> SimplexPoint:
    """Contract x toward vertex e_i: returns t*x + (1-t)*e_i."""
    if not 0 <= i <= x.dim:
        raise SimplexError(f"vertex index {i} out of range for dimension {x.dim}")
    if not -EPS_GEOM <= t <= 1.0 + EPS_GEOM:
        raise SimplexError(f"segment parameter {t!r} outside [0, 1]")
    t = min(max(t, 0.0), 1.0)
    return SimplexPoint(apply_segment_map(i, t, x.coords.copy()))


def segment_param(x: SimplexPoint, y: SimplexPoint, i: int) -> float:
    """Parameter t solving y = t*x + (1-t)*e_i, if y lies on that segment.

    Uses the best-conditioned coordinate for the solve and checks the
    residual in every coordinate.
    """
    if x.dim != y.dim:
        raise SimplexError("points have different dimensions")
    e = vertex_coords(i, x.dim)
    denom = x.coords - e
    j = int(np.argmax(np.abs(denom)))
    if abs(denom[j]) <= EPS_GEOM:
        raise SimplexError(f"degenerate segment: x coincides with vertex {i}")
    t = float((y.coords[j] - e[j]) / denom[j])
    if not -EPS_GEOM <= t <= 1.0 + EPS_GEOM:
        raise SimplexError(f"point is not between x and vertex {i} (t={t!r})")
    t = min(max(t, 0.0), 1.0)
    residual = float(np.max(np.abs(t * x.coords + (1.0 - t) * e - y.coords)))
    if residual > 10.0 * EPS_GEOM:
        raise SimplexError(
            f"point is off the segment toward vertex {i}: residual {residual:.3e}"
        )
    return t


def point_segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Euclidean distance from each row of `points` to the segment [a, b]."""
    points = np.atleast_2d(points)
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(points - a, axis=1)
    s = np.clip((points - a) @ ab / denom, 0.0, 1.0)
    proj = a + s[:, None] * ab
    return np.linalg.norm(points - proj, axis=1)

"""Constructed weight specifications with known absorbing-set structure.

One constructor per classification outcome on the 2-simplex, plus endpoint
variants for d = 1.  The interior-compact case uses weights that vanish on
the visibility shadows of a central hexagonal hole, so the reachable
region is stationary at its first iterate and strictly smaller than the
simplex.
"""

from __future__ import annotations

import numpy as np
import shapely
from shapely import affinity
from shapely.geometry import MultiPoint, Polygon

from .weights import (AffineWeights, ConstantWeights, ProgrammaticWeights,
                      WeightSpec)


def _bary(points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    y1 = points[:, 0]
    y2 = points[:, 1]
    y0 = np.maximum(1.0 - y1 - y2, 0.0)
    return y0, y1, y2


def three_vertex_spec() -> WeightSpec:
    """Every vertex sticky: p_i equals the matching barycentric coordinate."""
    return AffineWeights([0.0, 0.0, 0.0])


def two_vertex_spec() -> WeightSpec:
    """Vertices 0 and 1 sticky, vertex 2 never chosen."""
    def fn(points):
        y0, y1, y2 = _bary(points)
        return np.stack([y0 + y2 / 2, y1 + y2 / 2, np.zeros_like(y0)], axis=1)
    return ProgrammaticWeights(fn, dim=2, name="two_sticky_vertices")


def one_vertex_spec() -> WeightSpec:
    """Only vertex 0 sticky, with weight 0 positive on the opposite edge."""
    def fn(points):
        y0, y1, y2 = _bary(points)
        p1 = y1 * (1.0 - y1)
        p2 = y2 * (1.0 - y2)
        return np.stack([1.0 - p1 - p2, p1, p2], axis=1)
    return ProgrammaticWeights(fn, dim=2, name="one_sticky_vertex")


def vertex_edge_spec() -> WeightSpec:
    """Vertex 0 sticky and weight 0 vanishing on the opposite edge."""
    def fn(points):
        y0, y1, y2 = _bary(points)
        rest = (y1 + y2) / 2
        return np.stack([y0, rest, rest], axis=1)
    return ProgrammaticWeights(fn, dim=2, name="vertex_plus_edge")


def one_edge_spec() -> WeightSpec:
    """No sticky vertex; weight 0 vanishes on the edge between 1 and 2."""
    def fn(points):
        y0, y1, y2 = _bary(points)
        rest = (y1 + y2) / 2 + y0 / 4
        return np.stack([y0 / 2, rest, rest], axis=1)
    return ProgrammaticWeights(fn, dim=2, name="one_edge")


def full_simplex_spec() -> WeightSpec:
    """Uniform constant weights: the whole simplex is the only absorbing set."""
    return ConstantWeights([1 / 3, 1 / 3, 1 / 3])


# ---------------------------------------------------------------------------
# Interior-compact fixture: a hexagonal hole and its visibility shadows
# ---------------------------------------------------------------------------

#: Margin subtracted from the shadow distances; keeps supported segments
#: well clear of the hole so sampled regions certify absorption exactly.
SHADOW_MARGIN = 0.08


def _convex_region(constraints: list[tuple[float, float, float]]) -> Polygon:
    """Convex polygon {a*x + b*y >= c for all constraints} via vertex enumeration."""
    lines = constraints
    pts = []
    for i in range(len(lines)):
        for j in range(i + 1, len(lines)):
            a1, b1, c1 = lines[i]
            a2, b2, c2 = lines[j]
            det = a1 * b2 - a2 * b1
            if abs(det) < 1e-12:
                continue
            x = (c1 * b2 - c2 * b1) / det
            y = (a1 * c2 - a2 * c1) / det
            if all(a * x + b * y >= c - 1e-9 for a, b, c in lines):
                pts.append((x, y))
    return MultiPoint(pts).convex_hull


_SIMPLEX_CONSTRAINTS = [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (-1.0, -1.0, -1.0)]

#: Points whose segment toward vertex 0 can meet the central hole: inside
#: the tangent cone from the origin and beyond both near lines.
_BLOCKED_0 = _convex_region(_SIMPLEX_CONSTRAINTS + [
    (-1.0, 2.0, 0.0),   # 2y - x >= 0
    (2.0, -1.0, 0.0),   # 2x - y >= 0
    (1.0, 3.0, 1.0),    # x + 3y >= 1
    (3.0, 1.0, 1.0),    # 3x + y >= 1
])

#: Rotation of the simplex taking vertex 0 to 1, 1 to 2, 2 to 0.
_ROTATE = [-1.0, -1.0, 1.0, 0.0, 1.0, 0.0]


def _rotated(geom, times: int):
    for _ in range(times):
        geom = affinity.affine_transform(geom, _ROTATE)
    return geom


_BLOCKED = [_BLOCKED_0, _rotated(_BLOCKED_0, 1), _rotated(_BLOCKED_0, 2)]

#: The central hole: points blocked from every vertex.
HEXAGON_HOLE = _BLOCKED[0].intersection(_BLOCKED[1]).intersection(_BLOCKED[2])


def _opened(geom, eps: float = 1e-9):
    """Morphological opening: drops hairline slivers left by differences."""
    return geom.buffer(-eps).buffer(eps)


#: Shadow of the hole from each vertex: blocked points strictly beyond it.
SHADOWS = [_opened(b.difference(HEXAGON_HOLE)) for b in _BLOCKED]


def hexagon_barrier_spec(margin: float = SHADOW_MARGIN) -> WeightSpec:
    """Weights vanishing on each vertex's visibility shadow of the hole.

    p_i is proportional to the distance from the shadow of vertex i minus
    a safety margin, so every supported segment toward vertex i stays away
    from the hole.  The reachable region equals the simplex minus the hole
    and is stationary under the region iteration.
    """
    def fn(points):
        geoms = shapely.points(points)
        f = np.stack(
            [np.maximum(shapely.distance(geoms, SHADOWS[i]) - margin, 0.0)
             for i in range(3)],
            axis=1,
        )
        return f / f.sum(axis=1, keepdims=True)
    return ProgrammaticWeights(fn, dim=2, name="hexagon_barrier")


# ---------------------------------------------------------------------------
# d = 1 endpoint fixtures
# ---------------------------------------------------------------------------

def d1_no_sticky_spec() -> WeightSpec:
    return ConstantWeights([0.5, 0.5])


def d1_sticky_left_spec() -> WeightSpec:
    return AffineWeights([0.5, 0.0])


def d1_sticky_right_spec() -> WeightSpec:
    return AffineWeights([0.0, 0.5])


def d1_both_sticky_spec() -> WeightSpec:
    return AffineWeights([0.0, 0.0])

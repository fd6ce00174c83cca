"""Classification of minimal absorbing compact sets for d = 1 and d = 2.

The d=1 case is decided by the endpoint weights alone.  For d=2 the
decision tree runs on the boundary profile: sticky vertices first, then
empty edge supports, and otherwise an iteration that grows the region
reachable along vertex segments until it is stationary or covers the
simplex.  Regions live on a rasterized membership grid: cells are marked
by exact segment tracing from supported cell centers, the fixed point is
detected by mask equality, and polygons are extracted from the mask
boundary, so every reported region carries its sampling resolution.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np
from shapely.geometry import MultiPolygon, Polygon

from .geometry import vertex_coords
from .operators import SimplexGrid, trace_segments
from .weights import (EPS_POS, OPPOSITE_EDGE, BoundaryProfile, WeightSpec,
                      boundary_profile, edge_point)

#: Equality threshold for the sticky-vertex tests p_i(e_i) = 1.
EPS_ONE = 1e-9

#: Vertex weights within this distance of 1 (but not sticky) trigger a
#: borderline warning: the classification is discontinuous there.
BORDERLINE_MARGIN = 1e-6

#: Relative symmetric-difference area below which the region iteration is
#: declared stationary.
AREA_TOL = 1e-4

#: Escape probabilities above this fail the absorption check.
EPS_ESCAPE = 1e-6


class AbsorbingClass(str, Enum):
    # d = 1
    FULL_INTERVAL = "full_interval"
    LEFT_ENDPOINT = "left_endpoint"
    RIGHT_ENDPOINT = "right_endpoint"
    BOTH_ENDPOINTS = "both_endpoints"
    # d = 2
    THREE_VERTICES = "three_vertices"
    TWO_VERTICES = "two_vertices"
    ONE_VERTEX = "one_vertex"
    ONE_EDGE = "one_edge"
    VERTEX_PLUS_OPPOSITE_EDGE = "vertex_plus_opposite_edge"
    INTERIOR_COMPACT = "interior_compact"


@dataclass(frozen=True)
class Region2D:
    """A compact region of the 2-simplex as a cell mask on a SimplexGrid."""

    grid: SimplexGrid
    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != (self.grid.n_cells,):
            raise ValueError("mask does not match the grid")
        if not mask.any():
            raise ValueError("region is empty")
        mask = mask.copy()
        mask.flags.writeable = False
        object.__setattr__(self, "mask", mask)

    @property
    def resolution(self) -> int:
        return self.grid.resolution

    @property
    def area(self) -> float:
        return float(self.mask.sum()) * self.grid.cell_volume

    @property
    def is_full(self) -> bool:
        return bool(self.mask.all())

    def symmetric_difference_area(self, other: "Region2D") -> float:
        return float(np.logical_xor(self.mask, other.mask).sum()) * self.grid.cell_volume

    def covers_points(self, points: np.ndarray) -> np.ndarray:
        return self.mask[self.grid.locate(points)]

    @cached_property
    def geometry(self):
        """Shapely polygon extracted from the mask boundary."""
        return _mask_polygon(self.grid, self.mask)

    def rings(self) -> list[list[tuple[float, float]]]:
        geom = self.geometry
        polys = list(geom.geoms) if isinstance(geom, MultiPolygon) else [geom]
        out = []
        for p in polys:
            out.append([(float(x), float(y)) for x, y in p.exterior.coords])
            for hole in p.interiors:
                out.append([(float(x), float(y)) for x, y in hole.coords])
        return out


def full_simplex_region(resolution: int) -> Region2D:
    grid = SimplexGrid(2, resolution)
    return Region2D(grid, np.ones(grid.n_cells, dtype=bool))


def _mask_polygon(grid: SimplexGrid, mask: np.ndarray):
    """Exact polygon of a cell mask via boundary-edge walking.

    Interior edges appear twice with opposite orientation and cancel;
    the remaining directed edges chain into rings (shells counterclockwise,
    holes clockwise).
    """
    m = grid.resolution
    kinds = grid._kinds
    ab = grid._ab
    edges: dict[tuple, tuple] = {}
    for cid in np.nonzero(mask)[0]:
        a, b = int(ab[cid, 0]), int(ab[cid, 1])
        if kinds[cid] == 0:
            corners = ((a, b), (a + 1, b), (a, b + 1))
        else:
            corners = ((a + 1, b), (a + 1, b + 1), (a, b + 1))
        for k in range(3):
            u, v = corners[k], corners[(k + 1) % 3]
            if (v, u) in edges:
                del edges[(v, u)]
            else:
                edges[(u, v)] = (u, v)
    outgoing: dict[tuple, list] = {}
    for u, v in edges:
        outgoing.setdefault(u, []).append(v)
    rings = []
    while outgoing:
        start = next(iter(outgoing))
        ring = [start]
        current = start
        while True:
            nxts = outgoing[current]
            nxt = nxts.pop()
            if not nxts:
                del outgoing[current]
            ring.append(nxt)
            current = nxt
            if current == start:
                break
        rings.append(np.array(ring, dtype=float) / m)
    shells, holes = [], []
    for ring in rings:
        x, y = ring[:-1, 0], ring[:-1, 1]
        signed = 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
        (shells if signed > 0 else holes).append(ring)
    polys = []
    for shell in sorted(shells, key=lambda r: Polygon(r).area):
        poly = Polygon(shell)
        mine = [h for h in holes if poly.contains(Polygon(h).representative_point())]
        for h in mine:
            holes.remove(h)
        polys.append(Polygon(shell, [h for h in mine]))
    if len(polys) == 1:
        return polys[0]
    return MultiPolygon(polys)


@dataclass(frozen=True)
class AbsorbingSet:
    """One member of the classification: a vertex, an edge, or a region."""

    kind: str
    vertex: int | None = None
    edge: tuple[int, int] | None = None
    region: Region2D | None = None

    def label(self) -> str:
        if self.kind == "vertex":
            return f"vertex_{self.vertex}"
        if self.kind == "edge":
            return f"edge_{self.edge[0]}_{self.edge[1]}"
        return "region"

    def to_dict(self) -> dict:
        if self.kind == "vertex":
            return {"kind": "vertex", "vertex": self.vertex}
        if self.kind == "edge":
            return {"kind": "edge", "endpoints": list(self.edge)}
        return {
            "kind": "region",
            "rings": [[list(pt) for pt in ring] for ring in self.region.rings()],
            "area": self.region.area,
            "resolution": self.region.resolution,
        }


def vertex_member(i: int) -> AbsorbingSet:
    return AbsorbingSet(kind="vertex", vertex=i)


def edge_member(i: int, j: int) -> AbsorbingSet:
    return AbsorbingSet(kind="edge", edge=(i, j))


def region_member(region: Region2D) -> AbsorbingSet:
    return AbsorbingSet(kind="region", region=region)


@dataclass(frozen=True)
class AbsorbingClassification:
    """Class tag plus member sets and the rule applications behind them."""

    dim: int
    class_name: AbsorbingClass
    members: tuple[AbsorbingSet, ...]
    rule_trace: tuple[str, ...]
    profile: BoundaryProfile | None
    resolution: int
    converged: bool = True
    reached_full_simplex: bool = False
    iterations: int = 0
    borderline_warnings: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "class": self.class_name.value,
            "members": [m.to_dict() for m in self.members],
            "rule_trace": list(self.rule_trace),
            "profile": self.profile.to_dict() if self.profile else None,
            "resolution": self.resolution,
            "converged": self.converged,
            "reached_full_simplex": self.reached_full_simplex,
            "iterations": self.iterations,
            "borderline_warnings": list(self.borderline_warnings),
            "thresholds": {"sticky_equality": EPS_ONE, "positivity": EPS_POS,
                           "area_tol": AREA_TOL},
            "note": "Hoelder regularity of the weights is assumed, not certified.",
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


# ---------------------------------------------------------------------------
# d = 1
# ---------------------------------------------------------------------------

def classify_1d(spec: WeightSpec) -> AbsorbingClassification:
    """Four-way endpoint classification for the chain on [0, 1].

    A sticky endpoint (weight 1 toward itself) is absorbing on its own;
    with no sticky endpoint the whole interval is the only absorbing set.
    """
    if spec.dim != 1:
        raise ValueError("classify_1d requires d = 1")
    p_at_0 = spec.evaluate(np.array([0.0]))
    p_at_1 = spec.evaluate(np.array([1.0]))
    sticky0 = p_at_0[0] >= 1.0 - EPS_ONE
    sticky1 = p_at_1[1] >= 1.0 - EPS_ONE
    trace = [f"p_0(0) = {p_at_0[0]!r}, p_1(1) = {p_at_1[1]!r}"]
    warnings = []
    for name, value, sticky in (("p_0(0)", p_at_0[0], sticky0),
                                ("p_1(1)", p_at_1[1], sticky1)):
        if not sticky and abs(value - 1.0) < BORDERLINE_MARGIN:
            warnings.append(f"{name} = {value!r} is within 1e-6 of 1 but not sticky")
    if sticky0 and sticky1:
        cls = AbsorbingClass.BOTH_ENDPOINTS
        members = (vertex_member(0), vertex_member(1))
        trace.append("both endpoints sticky: {0} and {1} absorb (sticky-vertex rule)")
    elif sticky0:
        cls = AbsorbingClass.LEFT_ENDPOINT
        members = (vertex_member(0),)
        trace.append("0 sticky, 1 not: {0} is the unique absorbing set (sticky-vertex rule)")
    elif sticky1:
        cls = AbsorbingClass.RIGHT_ENDPOINT
        members = (vertex_member(1),)
        trace.append("1 sticky, 0 not: {1} is the unique absorbing set (sticky-vertex rule)")
    else:
        cls = AbsorbingClass.FULL_INTERVAL
        members = (edge_member(0, 1),)
        trace.append("no sticky endpoint: the whole interval is minimal")
    profile = boundary_profile(spec, resolution=16)
    return AbsorbingClassification(dim=1, class_name=cls, members=members,
                                   rule_trace=tuple(trace), profile=profile,
                                   resolution=16,
                                   borderline_warnings=tuple(warnings))


# ---------------------------------------------------------------------------
# Region construction for d = 2
# ---------------------------------------------------------------------------

def initial_region(profile: BoundaryProfile, resolution: int) -> Region2D:
    """Cells whose centers lie in a triangle spanned by a vertex and one of
    its edge-support intervals.

    A support made of several intervals contributes one triangle per
    interval: the reachable set from a vertex over an interval union is the
    union of the per-interval triangles, not their joint hull.
    """
    grid = SimplexGrid(2, resolution)
    centers = grid.centers
    mask = np.zeros(grid.n_cells, dtype=bool)
    any_interval = False
    for i, intervals in profile.edge_supports.items():
        e = vertex_coords(i, 2)
        edge = OPPOSITE_EDGE[i]
        for lo, hi in intervals:
            any_interval = True
            a = edge_point(edge, np.array([lo]))[0]
            b = edge_point(edge, np.array([hi]))[0]
            mask |= _points_in_triangle(centers, e, a, b)
    if not any_interval:
        raise ValueError("no edge support: the initial region is undefined")
    return Region2D(grid, mask)


def _points_in_triangle(points: np.ndarray, a, b, c, tol: float = 1e-12) -> np.ndarray:
    """Inclusive point-in-triangle test, orientation independent."""
    def half(p, q):
        return ((q[0] - p[0]) * (points[:, 1] - p[1])
                - (q[1] - p[1]) * (points[:, 0] - p[0]))

    d1, d2, d3 = half(a, b), half(b, c), half(c, a)
    neg = (d1 < -tol) | (d2 < -tol) | (d3 < -tol)
    pos = (d1 > tol) | (d2 > tol) | (d3 > tol)
    return ~(neg & pos)


def grow_region(spec: WeightSpec, region: Region2D) -> Region2D:
    """One sweep of the reachable-region iteration.

    For every cell of the region and every vertex whose weight is positive
    at the cell center, all cells crossed by the segment from the center to
    that vertex are added.  The result always contains the input, and a
    repeated sweep with an unchanged mask reproduces it exactly.
    """
    grid = region.grid
    centers = grid.centers[region.mask]
    weights = spec.evaluate_batch(centers)
    mask = region.mask.copy()
    for i in range(3):
        sel = weights[:, i] > EPS_POS
        if not np.any(sel):
            continue
        _, cells, _ = trace_segments(grid, centers[sel], i)
        mask[cells] = True
    return Region2D(grid, mask)


# ---------------------------------------------------------------------------
# d = 2 classification
# ---------------------------------------------------------------------------

def classify_2d(spec: WeightSpec, resolution: int = 64,
                max_region_iters: int = 64) -> AbsorbingClassification:
    """Full decision tree on the 2-simplex.

    Cases are checked in order: all/two/one sticky vertices, then empty
    edge supports, then the reachable-region iteration.  Ties on the case
    boundaries resolve to the first matching case, with a borderline
    warning when a vertex weight sits within 1e-6 of 1.
    """
    if spec.dim != 2:
        raise ValueError("classify_2d requires d = 2")
    if resolution < 16:
        raise ValueError("resolution must be at least 16")
    profile = boundary_profile(spec, resolution=resolution)
    self_weights = np.diag(profile.vertex_values)
    sticky = self_weights >= 1.0 - EPS_ONE
    warnings = tuple(
        f"p_{i}(e_{i}) = {self_weights[i]!r} is within 1e-6 of 1 but not sticky"
        for i in range(3)
        if not sticky[i] and abs(self_weights[i] - 1.0) < BORDERLINE_MARGIN
    )
    trace = [f"self weights at vertices: {self_weights.tolist()}"]
    common = dict(dim=2, profile=profile, resolution=resolution,
                  borderline_warnings=warnings)

    sticky_ids = [i for i in range(3) if sticky[i]]
    if len(sticky_ids) == 3:
        trace.append("all three vertices sticky: each is absorbing (sticky-vertex rule)")
        return AbsorbingClassification(
            class_name=AbsorbingClass.THREE_VERTICES,
            members=tuple(vertex_member(i) for i in range(3)),
            rule_trace=tuple(trace), **common)
    if len(sticky_ids) == 2:
        trace.append(
            f"vertices {sticky_ids} sticky, the third is not: two singleton members "
            "(sticky-vertex rule; the non-sticky vertex leads into an edge)")
        return AbsorbingClassification(
            class_name=AbsorbingClass.TWO_VERTICES,
            members=tuple(vertex_member(i) for i in sticky_ids),
            rule_trace=tuple(trace), **common)
    if len(sticky_ids) == 1:
        k = sticky_ids[0]
        if profile.support_empty(k):
            edge = OPPOSITE_EDGE[k]
            trace.append(
                f"vertex {k} sticky and its weight vanishes on the opposite edge: "
                "singleton plus opposite edge (empty-support rule)")
            return AbsorbingClassification(
                class_name=AbsorbingClass.VERTEX_PLUS_OPPOSITE_EDGE,
                members=(vertex_member(k), edge_member(*edge)),
                rule_trace=tuple(trace), **common)
        trace.append(
            f"vertex {k} sticky and its weight is positive somewhere on the "
            "opposite edge: the singleton is the unique member")
        return AbsorbingClassification(
            class_name=AbsorbingClass.ONE_VERTEX,
            members=(vertex_member(k),),
            rule_trace=tuple(trace), **common)

    empty_ids = [i for i in range(3) if profile.support_empty(i)]
    if empty_ids:
        i = empty_ids[0]
        edge = OPPOSITE_EDGE[i]
        trace.append(
            f"no sticky vertex and weight {i} vanishes on edge {edge}: "
            "that edge is the unique member (empty-support rule)")
        extra = warnings
        if len(empty_ids) > 1:
            extra = warnings + (
                f"multiple empty edge supports {empty_ids}; reporting the first",)
        return AbsorbingClassification(
            class_name=AbsorbingClass.ONE_EDGE,
            members=(edge_member(*edge),),
            rule_trace=tuple(trace),
            dim=2, profile=profile, resolution=resolution,
            borderline_warnings=extra)

    trace.append("no sticky vertex, all edge supports nonempty: region iteration")
    region = initial_region(profile, resolution)
    trace.append(f"initial region area {region.area!r}")
    simplex_area = 0.5
    cover_tol = max(AREA_TOL, 2.0 / resolution) * simplex_area
    converged = False
    reached_full = simplex_area - region.area <= cover_tol
    iterations = 0
    while not reached_full and iterations < max_region_iters:
        grown = grow_region(spec, region)
        iterations += 1
        growth = grown.symmetric_difference_area(region)
        trace.append(f"iteration {iterations}: area {grown.area!r}, growth {growth!r}")
        region = grown
        if simplex_area - region.area <= cover_tol:
            reached_full = True
            converged = True
            break
        if growth <= AREA_TOL * simplex_area:
            converged = True
            break
    if reached_full:
        region = full_simplex_region(resolution)
        converged = True
        trace.append("region covers the simplex")
    return AbsorbingClassification(
        class_name=AbsorbingClass.INTERIOR_COMPACT,
        members=(region_member(region),),
        rule_trace=tuple(trace),
        converged=converged,
        reached_full_simplex=reached_full,
        iterations=iterations,
        **common)


# ---------------------------------------------------------------------------
# Absorption verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EscapeReport:
    """Sampled upper estimate of the one-step escape probability."""

    max_escape: float
    n_samples: int
    witnesses: tuple[tuple[float, ...], ...]

    def to_dict(self) -> dict:
        return {"max_escape": self.max_escape, "n_samples": self.n_samples,
                "witnesses": [list(w) for w in self.witnesses]}


def verify_absorbing(spec: WeightSpec, member: AbsorbingSet | Region2D,
                     samples: int = 400) -> EscapeReport:
    """Estimate max over sampled x in the set of the one-step escape mass.

    For each sampled point the escape mass is the weight of each vertex
    times the measure of the segment toward it lying outside the set.
    Region members are sampled at their own cell centers and the segment
    measure is computed by the same exact tracing that built the region.
    """
    if isinstance(member, Region2D):
        member = region_member(member)
    d = spec.dim
    if member.kind == "vertex":
        i = member.vertex
        p = spec.evaluate(vertex_coords(i, d))
        escape = float(p.sum() - p[i])
        witnesses = ((tuple(vertex_coords(i, d)),) if escape > 1e-12 else ())
        return EscapeReport(max_escape=escape, n_samples=1, witnesses=witnesses)
    if member.kind == "edge":
        a, b = member.edge
        s = np.linspace(0.0, 1.0, samples)
        pts = edge_point((a, b), s, dim=d)
        weights = spec.evaluate_batch(pts)
        off = [k for k in range(d + 1) if k not in (a, b)]
        escape = weights[:, off].sum(axis=1)
        worst = np.argsort(escape)[::-1][:8]
        witnesses = tuple(tuple(pts[w]) for w in worst if escape[w] > 1e-12)
        return EscapeReport(max_escape=float(escape.max()), n_samples=samples,
                            witnesses=witnesses)

    region = member.region
    grid = region.grid
    centers = grid.centers[region.mask]
    weights = spec.evaluate_batch(centers)
    escapes = np.zeros(centers.shape[0])
    for i in range(d + 1):
        idx, cells, dt = trace_segments(grid, centers, i)
        outside = ~region.mask[cells]
        if np.any(outside):
            frac = np.zeros(centers.shape[0])
            np.add.at(frac, idx[outside], dt[outside])
            escapes += weights[:, i] * frac
    worst = np.argsort(escapes)[::-1][:8]
    witnesses = tuple(tuple(centers[w]) for w in worst if escapes[w] > 1e-12)
    return EscapeReport(max_escape=float(escapes.max()), n_samples=centers.shape[0],
                        witnesses=witnesses)

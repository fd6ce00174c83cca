"""Exact sampling of the vertex-contraction chain on the d-simplex.

One step from x: draw a vertex index i from the weight vector p(x), draw t
uniformly on [0, 1], and move to t*x + (1-t)*e_i.  Trajectories are
bit-reproducible given (seed, config); replica batches derive stream r from
(seed, r).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .geometry import (SimplexPoint, apply_segment_map, clamp_coords_inplace,
                       point_segment_distance, vertex_coords)
from .rng import categorical_index_batch, stream
from .weights import AffineWeights, ConstantWeights, WeightSpec


@dataclass(frozen=True)
class ChainConfig:
    """Inputs of a single simulation run."""

    spec: WeightSpec
    start: SimplexPoint
    steps: int
    seed: int
    burn_in: int = 0

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")
        if self.start.dim != self.spec.dim:
            raise ValueError("start point and weight spec dimensions differ")
        if self.steps > 0 and not 0 <= self.burn_in < self.steps:
            raise ValueError("burn_in must satisfy 0 <= burn_in < steps")
        if self.steps == 0 and self.burn_in != 0:
            raise ValueError("burn_in must be 0 when steps is 0")

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "start": self.start.coords.tolist(),
            "steps": self.steps,
            "seed": self.seed,
            "burn_in": self.burn_in,
        }


@dataclass(frozen=True)
class Trajectory:
    """A realized path with the (vertex, parameter) choice at every step.

    `origin_weight` carries the barycentric weight of the origin vertex,
    propagated multiplicatively alongside the coordinates; unlike the
    derived value 1 - sum(coords) it underflows gracefully near the
    opposite face instead of being floored by cancellation.
    """

    points: np.ndarray
    vertex_indices: np.ndarray
    params: np.ndarray
    config: ChainConfig
    origin_weight: np.ndarray | None = None

    def __len__(self) -> int:
        return self.points.shape[0]

    def point(self, k: int) -> SimplexPoint:
        return SimplexPoint(self.points[k])

    def post_burn_in(self) -> np.ndarray:
        """States visited after the burn-in transitions, excluding the start."""
        return self.points[self.config.burn_in + 1:]

    def post_burn_in_barycentric(self) -> np.ndarray:
        """Post-burn-in states as full (d+1)-column barycentric vectors."""
        coords = self.post_burn_in()
        bary = np.empty((coords.shape[0], coords.shape[1] + 1))
        if self.origin_weight is not None:
            bary[:, 0] = self.origin_weight[self.config.burn_in + 1:]
        else:
            bary[:, 0] = np.maximum(1.0 - coords.sum(axis=1), 0.0)
        bary[:, 1:] = coords
        return bary

    def to_csv(self, path, sidecar: bool = True) -> None:
        """Write `step,x1,...,xd,i,t` rows plus a JSON config sidecar."""
        d = self.points.shape[1]
        header = "step," + ",".join(f"x{j + 1}" for j in range(d)) + ",i,t"
        lines = [header]
        n_steps = self.vertex_indices.size
        for k in range(self.points.shape[0]):
            coords = ",".join(repr(float(v)) for v in self.points[k])
            if k < n_steps:
                lines.append(f"{k},{coords},{int(self.vertex_indices[k])},{self.params[k]!r}")
            else:
                lines.append(f"{k},{coords},,")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        if sidecar:
            with open(str(path) + ".json", "w") as fh:
                json.dump(self.config.to_dict(), fh, indent=2, sort_keys=True)
                fh.write("\n")


def step(x: SimplexPoint, spec: WeightSpec, rng: np.random.Generator):
    """One transition from x; returns (next point, vertex index, parameter)."""
    p = spec.evaluate(x)
    cum = np.cumsum(p)
    u = rng.random()
    i = min(int(np.searchsorted(cum, u, side="right")), spec.dim)
    t = rng.random()
    y = t * x.coords
    if i > 0:
        y[i - 1] += 1.0 - t
    np.maximum(y, 0.0, out=y)
    total = y.sum()
    if total > 1.0:
        y = y / total
    return SimplexPoint(y), i, t


def _simulate_generic(spec: WeightSpec, start: np.ndarray, draws: np.ndarray):
    steps = draws.shape[0]
    d = start.size
    pts = np.empty((steps + 1, d))
    pts[0] = start
    idx = np.empty(steps, dtype=np.int64)
    ts = np.empty(steps)
    w0 = np.empty(steps + 1)
    w0[0] = max(1.0 - start.sum(), 0.0)
    x = start.copy()
    b0 = w0[0]
    for k in range(steps):
        p = spec.evaluate_batch(x[None, :])[0]
        cum = np.cumsum(p)
        u = draws[k, 0]
        i = min(int(np.searchsorted(cum, u, side="right")), d)
        t = draws[k, 1]
        x = apply_segment_map(i, t, x.copy())
        np.maximum(x, 0.0, out=x)
        total = x.sum()
        if total > 1.0:
            x /= total
        b0 = t * b0 + (1.0 - t) if i == 0 else t * b0
        pts[k + 1] = x
        w0[k + 1] = b0
        idx[k] = i
        ts[k] = t
    return pts, idx, ts, w0


def _simulate_scalar_2d(spec: WeightSpec, start: np.ndarray, draws: np.ndarray):
    """Tight scalar loop for constant/affine weights in d=2.

    Replicates the generic path's floating-point operations exactly.
    """
    steps = draws.shape[0]
    pts = np.empty((steps + 1, 2))
    pts[0] = start
    idx = np.empty(steps, dtype=np.int64)
    ts = np.empty(steps)
    w0 = np.empty(steps + 1)
    us = draws[:, 0].tolist()
    tts = draws[:, 1].tolist()
    x1 = float(start[0])
    x2 = float(start[1])
    track0 = max(1.0 - (x1 + x2), 0.0)
    w0[0] = track0
    if isinstance(spec, ConstantWeights):
        c0 = float(spec.p[0])
        c1 = c0 + float(spec.p[1])
        c2 = c1 + float(spec.p[2])
        constant = True
        th0 = th1 = th2 = slope = 0.0
    else:
        th0, th1, th2 = (float(v) for v in spec.theta)
        slope = float(spec.slope)
        constant = False
        c0 = c1 = c2 = 0.0
    for k in range(steps):
        if not constant:
            b0 = 1.0 - (x1 + x2)
            if b0 < 0.0:
                b0 = 0.0
            p0 = th0 + slope * b0
            p1 = th1 + slope * x1
            p2 = th2 + slope * x2
            c0 = p0
            c1 = p0 + p1
            c2 = c1 + p2
        u = us[k]
        i = (1 if u >= c0 else 0) + (1 if u >= c1 else 0) + (1 if u >= c2 else 0)
        if i > 2:
            i = 2
        t = tts[k]
        y1 = t * x1
        y2 = t * x2
        if i == 1:
            y1 += 1.0 - t
        elif i == 2:
            y2 += 1.0 - t
        if y1 < 0.0:
            y1 = 0.0
        if y2 < 0.0:
            y2 = 0.0
        total = y1 + y2
        if total > 1.0:
            y1 /= total
            y2 /= total
        track0 = t * track0 + (1.0 - t) if i == 0 else t * track0
        pts[k + 1, 0] = y1
        pts[k + 1, 1] = y2
        w0[k + 1] = track0
        idx[k] = i
        ts[k] = t
        x1 = y1
        x2 = y2
    return pts, idx, ts, w0


def simulate(config: ChainConfig, scalar_fast_path: bool = True) -> Trajectory:
    """Generate a full trajectory with recorded choices.

    The draw order is fixed: at each step the vertex uniform is consumed
    before the segment parameter, from stream (seed, 0).
    """
    rng = stream(config.seed, 0)
    draws = rng.random((config.steps, 2))
    start = config.start.coords.astype(float)
    use_scalar = (
        scalar_fast_path
        and config.spec.dim == 2
        and isinstance(config.spec, (ConstantWeights, AffineWeights))
    )
    if use_scalar:
        pts, idx, ts, w0 = _simulate_scalar_2d(config.spec, start, draws)
    else:
        pts, idx, ts, w0 = _simulate_generic(config.spec, start, draws)
    for arr in (pts, idx, ts, w0):
        arr.flags.writeable = False
    return Trajectory(points=pts, vertex_indices=idx, params=ts, config=config,
                      origin_weight=w0)


# ---------------------------------------------------------------------------
# Observables and ergodic averages
# ---------------------------------------------------------------------------

def coordinate(i: int) -> Callable[[np.ndarray], np.ndarray]:
    """Barycentric coordinate observable y_i (i = 0 is the derived weight)."""
    def fn(points: np.ndarray) -> np.ndarray:
        if i == 0:
            return np.maximum(1.0 - points.sum(axis=1), 0.0)
        return points[:, i - 1]
    fn.__name__ = f"coordinate_{i}"
    return fn


def coordinate_product(i: int, j: int) -> Callable[[np.ndarray], np.ndarray]:
    def fn(points: np.ndarray) -> np.ndarray:
        return coordinate(i)(points) * coordinate(j)(points)
    fn.__name__ = f"coordinate_product_{i}_{j}"
    return fn


def cell_indicator(grid, cell_id: int) -> Callable[[np.ndarray], np.ndarray]:
    def fn(points: np.ndarray) -> np.ndarray:
        return (grid.locate(points) == cell_id).astype(float)
    fn.__name__ = f"cell_indicator_{cell_id}"
    return fn


@dataclass(frozen=True)
class ErgodicAverage:
    estimate: float
    stderr: float
    batches: int
    n_samples: int


def ergodic_average(config: ChainConfig, f) -> ErgodicAverage:
    """Time average of an observable with a batch-means standard error.

    `f` maps an (n, d) array of states to n values; use the observable
    factories in this module or any callable with that signature.
    """
    traj = simulate(config)
    values = np.asarray(f(traj.post_burn_in()), dtype=float)
    n = values.size
    if n == 0:
        raise ValueError("no post-burn-in samples")
    n_batches = max(2, min(1000, int(math.isqrt(n))))
    batch_size = n // n_batches
    if batch_size == 0:
        n_batches, batch_size = 1, n
    trimmed = values[: n_batches * batch_size].reshape(n_batches, batch_size)
    means = trimmed.mean(axis=1)
    estimate = float(means.mean())
    stderr = float(means.std(ddof=1) / math.sqrt(n_batches)) if n_batches > 1 else 0.0
    return ErgodicAverage(estimate=estimate, stderr=stderr, batches=n_batches,
                          n_samples=n)


# ---------------------------------------------------------------------------
# Absorption experiments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AbsorptionResult:
    """Fractions of replicas ending within `radius` of each target set."""

    target_labels: tuple[str, ...]
    frequencies: tuple[float, ...]
    unresolved: float
    replicas: int
    radius: float
    steps: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "targets": list(self.target_labels),
            "frequencies": list(self.frequencies),
            "unresolved": self.unresolved,
            "replicas": self.replicas,
            "radius": self.radius,
            "steps": self.steps,
            "seed": self.seed,
        }


def _target_distances(points: np.ndarray, target) -> np.ndarray:
    """Distance from final states to one absorbing member set."""
    if target.kind == "vertex":
        v = vertex_coords(target.vertex, points.shape[1])
        return np.linalg.norm(points - v, axis=1)
    if target.kind == "edge":
        a = vertex_coords(target.edge[0], points.shape[1])
        b = vertex_coords(target.edge[1], points.shape[1])
        return point_segment_distance(points, a, b)
    import shapely

    geoms = shapely.points(points)
    return shapely.distance(geoms, target.region.geometry)


def run_replicas(config: ChainConfig, replicas: int, chunk: int = 2048) -> np.ndarray:
    """Final states of independent replicas started at config.start.

    Replica r consumes stream (seed, r); all replicas run config.steps
    transitions.  Returns an (replicas, d) array.
    """
    spec = config.spec
    d = spec.dim
    steps = config.steps
    finals = np.empty((replicas, d))
    start = config.start.coords.astype(float)
    for lo in range(0, replicas, chunk):
        hi = min(lo + chunk, replicas)
        m = hi - lo
        draws = np.empty((m, steps, 2))
        for r in range(lo, hi):
            draws[r - lo] = stream(config.seed, r).random((steps, 2))
        x = np.tile(start, (m, 1))
        for n in range(steps):
            p = spec.evaluate_batch(x)
            cum = np.cumsum(p, axis=1)
            i = categorical_index_batch(cum, draws[:, n, 0])
            t = draws[:, n, 1]
            x *= t[:, None]
            for j in range(1, d + 1):
                rows = i == j
                if np.any(rows):
                    x[rows, j - 1] += 1.0 - t[rows]
            clamp_coords_inplace(x)
        finals[lo:hi] = x
    return finals


def absorption_experiment(config: ChainConfig, radius: float, replicas: int,
                          targets: Sequence | None = None,
                          resolution: int = 64) -> AbsorptionResult:
    """Estimate absorption frequencies toward classified member sets.

    Targets default to the member sets reported by the absorbing-set
    classifier for config.spec.  Each replica is assigned to the nearest
    target whose distance is at most `radius`, otherwise it counts as
    unresolved; frequencies plus the unresolved fraction sum to 1 exactly.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if targets is None:
        from .absorbing import classify_1d, classify_2d

        if config.spec.dim == 1:
            targets = classify_1d(config.spec).members
        elif config.spec.dim == 2:
            targets = classify_2d(config.spec, resolution=resolution).members
        else:
            raise ValueError("automatic targets require d <= 2")
    targets = list(targets)
    if not targets:
        raise ValueError("no absorption targets")
    finals = run_replicas(config, replicas)
    dists = np.stack([_target_distances(finals, tgt) for tgt in targets], axis=1)
    nearest = np.argmin(dists, axis=1)
    within = dists[np.arange(replicas), nearest] <= radius
    counts = np.bincount(nearest[within], minlength=len(targets))
    labels = tuple(t.label() for t in targets)
    freqs = tuple(float(c) / replicas for c in counts)
    unresolved = float(replicas - counts.sum()) / replicas
    return AbsorptionResult(target_labels=labels, frequencies=freqs,
                            unresolved=unresolved, replicas=replicas,
                            radius=radius, steps=config.steps, seed=config.seed)

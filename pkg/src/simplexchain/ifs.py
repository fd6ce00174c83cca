"""Uniqueness evidence for the chain viewed as random iterated maps.

The one-step maps contract by the segment parameter, so the mean
alpha-power contraction ratio is exactly 1/(1+alpha) regardless of the
weights.  Uniqueness of the invariant measure then follows either from
constant weights alone, or from weight regularity plus a uniformly
positive weight; this module computes the checkable evidence and reports a
three-valued verdict that never upgrades empirical evidence to a
certificate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .rng import stream
from .weights import (AffineWeights, ConstantWeights, HolderEstimate,
                      ProgrammaticWeights, TabulatedWeights, WeightSpec,
                      holder_constant, uniform_simplex_sample)

#: Weight minima at or below this are treated as zero.
DELTA_FLOOR = 1e-6


class Verdict(str, Enum):
    UNIQUE_CONSTANT_WEIGHTS = "unique_constant_weights"
    UNIQUE_BY_CRITERIA = "unique_by_criteria"
    INCONCLUSIVE = "inconclusive"


def contraction_coefficient(alpha: float) -> float:
    """Mean alpha-power contraction ratio of the one-step maps: 1/(1+alpha).

    The ratio of a map with parameter t is t; averaging t^alpha over the
    uniform parameter gives the closed form, strictly below 1.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    return 1.0 / (1.0 + alpha)


@dataclass(frozen=True)
class UniquenessReport:
    """Evidence for uniqueness of the invariant probability measure.

    contraction is the exact mean contraction ratio; holder_bound is the
    empirical regularity estimate of the weights (the total-variation
    modulus of the step distribution is bounded by the sum of the weight
    seminorms); minorization reports an index i with inf p_i > 0 when one
    is found, with `certified` True only when the minimum is computed
    exactly (constant, affine or tabulated weights).
    """

    alpha: float
    contraction: float
    holder_bound: HolderEstimate
    minorization_index: int | None
    minorization_value: float | None
    minorization_certified: bool
    verdict: Verdict

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "contraction": self.contraction,
            "holder_bound": self.holder_bound.to_dict(),
            "minorization_index": self.minorization_index,
            "minorization_value": self.minorization_value,
            "minorization_certified": self.minorization_certified,
            "verdict": self.verdict.value,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _weight_minima(spec: WeightSpec, samples: int, seed: int) -> tuple[np.ndarray, bool]:
    """Per-weight minimum over the simplex, exact where the family allows."""
    if isinstance(spec, ConstantWeights):
        return spec.p.copy(), True
    if isinstance(spec, AffineWeights):
        # p_i(y) = theta_i + slope * y_i is minimized on the face y_i = 0.
        return spec.theta.copy(), True
    if isinstance(spec, TabulatedWeights):
        # Barycentric-linear interpolation attains its extremes at mesh points.
        return spec.values.min(axis=0), True
    pts = uniform_simplex_sample(spec.dim, stream(seed, 1), samples)
    from .weights import mesh_points

    lattice = mesh_points(spec.dim, 32) if spec.dim <= 2 else pts[:1]
    values = spec.evaluate_batch(np.vstack([pts, lattice]))
    return values.min(axis=0), False


def check_uniqueness(spec: WeightSpec, alpha: float = 1.0,
                     samples: int = 2000, seed: int = 0) -> UniquenessReport:
    """Assemble the uniqueness evidence and a three-valued verdict.

    Constant weights are unique unconditionally.  Otherwise uniqueness is
    reported when some weight has a certified positive minimum (exact for
    constant/affine/tabulated families) or an empirical minimum well above
    the floor for programmatic ones; anything weaker is inconclusive.
    """
    r = contraction_coefficient(alpha)
    bound = holder_constant(spec, alpha=alpha, samples=max(samples, 100), seed=seed)
    minima, certified = _weight_minima(spec, samples, seed)
    positive = np.nonzero(minima > DELTA_FLOOR)[0]
    index = int(positive[0]) if positive.size else None
    value = float(minima[positive[0]]) if positive.size else None

    if isinstance(spec, ConstantWeights):
        verdict = Verdict.UNIQUE_CONSTANT_WEIGHTS
    elif index is not None and certified:
        verdict = Verdict.UNIQUE_BY_CRITERIA
    elif index is not None and value is not None and value > 100 * DELTA_FLOOR \
            and not bound.possibly_not_holder:
        verdict = Verdict.UNIQUE_BY_CRITERIA
    else:
        verdict = Verdict.INCONCLUSIVE
    return UniquenessReport(
        alpha=alpha,
        contraction=r,
        holder_bound=bound,
        minorization_index=index,
        minorization_value=value,
        minorization_certified=certified and index is not None,
        verdict=verdict,
    )

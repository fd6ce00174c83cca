"""Dirichlet reference measures: densities, moments, samples, cell masses,
and goodness-of-fit of empirical samples against them.

Densities are evaluated in log space so parameter values below 1, whose
densities blow up at the faces, stay representable; faces are reported as
+inf or 0 depending on the exponent sign.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.special
import scipy.stats

from .geometry import SimplexPoint
from .operators import GridDensity, SimplexGrid


@dataclass(frozen=True)
class DirichletParams:
    """Concentration parameters (theta_0, ..., theta_d), all positive."""

    theta: np.ndarray

    def __init__(self, theta):
        arr = np.asarray(theta, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise ValueError("need a vector of at least 2 concentration parameters")
        if arr.min() <= 0.0:
            raise ValueError(f"concentration parameters must be positive, got {arr.min()!r}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "theta", arr)

    @property
    def dim(self) -> int:
        return self.theta.size - 1

    @property
    def total(self) -> float:
        return float(self.theta.sum())


def log_density(params: DirichletParams, y: SimplexPoint) -> float:
    """Log density at y; -inf on a face with exponent > 1, +inf with < 1."""
    bary = y.barycentric
    theta = params.theta
    log_norm = float(scipy.special.gammaln(params.total)
                     - scipy.special.gammaln(theta).sum())
    on_face = bary <= 0.0
    if np.any(on_face):
        exps = theta[on_face] - 1.0
        if np.any(exps > 0.0):
            return -math.inf
        if np.any(exps < 0.0):
            return math.inf
        bary = bary[~on_face]
        theta = theta[~on_face]
    return log_norm + float(((theta - 1.0) * np.log(bary)).sum())


def density(params: DirichletParams, y: SimplexPoint) -> float:
    """Density at y; may return 0.0 or math.inf on the faces."""
    value = log_density(params, y)
    if value == -math.inf:
        return 0.0
    if value == math.inf:
        return math.inf
    return math.exp(value)


def density_batch(params: DirichletParams, points: np.ndarray) -> np.ndarray:
    """Densities for an (n, d) coordinate array of interior points."""
    points = np.asarray(points, dtype=float)
    bary = np.empty((points.shape[0], params.dim + 1))
    bary[:, 0] = 1.0 - points.sum(axis=1)
    bary[:, 1:] = points
    log_norm = float(scipy.special.gammaln(params.total)
                     - scipy.special.gammaln(params.theta).sum())
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = log_norm + ((params.theta - 1.0) * np.log(bary)).sum(axis=1)
    return np.exp(logs)


def moments(params: DirichletParams) -> tuple[np.ndarray, np.ndarray]:
    """Mean vector and covariance matrix over the full barycentric vector."""
    theta = params.theta
    total = params.total
    mean = theta / total
    cov = (np.diag(theta) * total - np.outer(theta, theta)) / (total ** 2 * (total + 1.0))
    return mean, cov


def sample(params: DirichletParams, rng: np.random.Generator) -> SimplexPoint:
    """One exact draw via independent Gamma normalization."""
    g = rng.standard_gamma(params.theta)
    bary = g / g.sum()
    return SimplexPoint(bary[1:])


def sample_batch(params: DirichletParams, rng: np.random.Generator, n: int) -> np.ndarray:
    """n draws as an (n, d) coordinate array."""
    g = rng.standard_gamma(params.theta, size=(n, params.theta.size))
    bary = g / g.sum(axis=1, keepdims=True)
    return bary[:, 1:]


# ---------------------------------------------------------------------------
# Cell masses by adaptive integration
# ---------------------------------------------------------------------------

_MASS_CACHE: dict = {}


def cell_integrals(params: DirichletParams, grid: SimplexGrid) -> np.ndarray:
    """Exact-normalization integrals of the density over every grid cell.

    d=1 uses the regularized incomplete beta function directly.  d=2
    reduces each cell to a 1-d integral whose inner part is an incomplete
    beta difference, then integrates adaptively; boundary singularities for
    parameters below 1 are handled by the adaptive subdivision.
    """
    key = (tuple(params.theta.tolist()), grid.dim, grid.resolution)
    cached = _MASS_CACHE.get(key)
    if cached is not None:
        return cached.copy()
    theta = params.theta
    m = grid.resolution
    if grid.dim != params.dim:
        raise ValueError("grid and parameter dimensions differ")
    if grid.dim == 1:
        edges = np.arange(m + 1) / m
        cdf = scipy.special.betainc(theta[1], theta[0], edges)
        masses = np.diff(cdf)
    else:
        t0, t1, t2 = float(theta[0]), float(theta[1]), float(theta[2])
        h = 1.0 / m
        log_beta_inner = (scipy.special.gammaln(t2) + scipy.special.gammaln(t0)
                          - scipy.special.gammaln(t2 + t0))
        log_norm = (scipy.special.gammaln(t0 + t1 + t2)
                    - scipy.special.gammaln(t0) - scipy.special.gammaln(t1)
                    - scipy.special.gammaln(t2))
        scale = math.exp(log_norm + log_beta_inner)

        def make_integrand(y2_lo, y2_hi):
            def integrand(y1: float) -> float:
                s = 1.0 - y1
                if s <= 0.0:
                    return 0.0
                lo = min(max(y2_lo(y1) / s, 0.0), 1.0)
                hi = min(max(y2_hi(y1) / s, 0.0), 1.0)
                if hi <= lo:
                    return 0.0
                inner = (scipy.special.betainc(t2, t0, hi)
                         - scipy.special.betainc(t2, t0, lo))
                return y1 ** (t1 - 1.0) * s ** (t2 + t0 - 1.0) * inner
            return integrand

        masses = np.empty(grid.n_cells)
        kinds = grid._kinds
        ab = grid._ab
        with warnings.catch_warnings():
            # Parameters below 1 give integrable boundary singularities;
            # QUADPACK's roundoff warnings there are expected and harmless.
            warnings.simplefilter("ignore", scipy.integrate.IntegrationWarning)
            for cid in range(grid.n_cells):
                a, b = ab[cid]
                x_lo, x_hi = a * h, (a + 1) * h
                diag = (a + b + 1) * h
                if kinds[cid] == 0:
                    integrand = make_integrand(lambda y1, b=b: b * h,
                                               lambda y1, diag=diag: diag - y1)
                else:
                    integrand = make_integrand(lambda y1, diag=diag: diag - y1,
                                               lambda y1, b=b: (b + 1) * h)
                val, _ = scipy.integrate.quad(integrand, x_lo, x_hi,
                                              epsabs=1e-13, epsrel=1e-9, limit=200)
                masses[cid] = val * scale
    _MASS_CACHE[key] = masses.copy()
    return masses


def cell_masses(params: DirichletParams, grid: SimplexGrid) -> GridDensity:
    """Cell-mass representation of the Dirichlet density on the grid."""
    return GridDensity.from_masses(grid, cell_integrals(params, grid))


# ---------------------------------------------------------------------------
# Goodness of fit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FitReport:
    """Chi-square, moment and marginal-KS tests of samples against a Dirichlet.

    Sub-tests run at Bonferroni-split levels so the overall false-rejection
    rate stays at `alpha`.  Valid for (approximately) independent samples;
    thin correlated chain output before testing.
    """

    n_samples: int
    chi2_stat: float
    chi2_dof: int
    chi2_pvalue: float
    moment_z: tuple[float, ...]
    ks_pvalues: tuple[float, ...]
    alpha: float
    chi2_pass: bool
    moments_pass: bool
    ks_pass: bool

    @property
    def passed(self) -> bool:
        return self.chi2_pass and self.moments_pass and self.ks_pass

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "chi2": {"stat": self.chi2_stat, "dof": self.chi2_dof,
                     "pvalue": self.chi2_pvalue, "pass": self.chi2_pass},
            "moment_z": list(self.moment_z),
            "moments_pass": self.moments_pass,
            "ks_pvalues": list(self.ks_pvalues),
            "ks_pass": self.ks_pass,
            "alpha": self.alpha,
            "passed": self.passed,
        }


def goodness_of_fit(samples, params: DirichletParams, cells: int = 16,
                    alpha: float = 0.01) -> FitReport:
    """Test samples against Dir[theta] on a cells-resolution grid.

    `samples` is an (n, d) coordinate array, an (n, d+1) barycentric array
    (preferred near the face opposite the origin, where the derived weight
    loses precision), or a sequence of points.  At least 10^4 samples are
    required for the chi-square asymptotics.
    """
    if not isinstance(samples, np.ndarray):
        samples = np.array([s.coords if isinstance(s, SimplexPoint) else s
                            for s in samples])
    bary = None
    if samples.shape[1] == params.dim + 1:
        bary = samples
        coords = samples[:, 1:]
    else:
        coords = samples
    n = coords.shape[0]
    if n < 10_000:
        raise ValueError(f"need at least 10^4 samples, got {n}")
    grid = SimplexGrid(params.dim, cells)
    expected = cell_integrals(params, grid) * n
    observed = np.bincount(grid.locate(coords), minlength=grid.n_cells).astype(float)

    # Merge low-expectation cells into one pooled bucket.
    low = expected < 5.0
    obs_list = list(observed[~low])
    exp_list = list(expected[~low])
    if np.any(low):
        obs_list.append(observed[low].sum())
        exp_list.append(expected[low].sum())
    obs = np.array(obs_list)
    exp = np.array(exp_list)
    exp = exp * obs.sum() / exp.sum()
    chi2 = float(((obs - exp) ** 2 / exp).sum())
    dof = max(obs.size - 1, 1)
    chi2_p = float(scipy.stats.chi2.sf(chi2, dof))

    mean, cov = moments(params)
    if bary is None:
        bary = np.empty((n, params.dim + 1))
        bary[:, 0] = np.maximum(1.0 - coords.sum(axis=1), 0.0)
        bary[:, 1:] = coords
    sample_mean = bary.mean(axis=0)
    z = (sample_mean - mean) / np.sqrt(np.diag(cov) / n)

    ks_p = []
    total = params.total
    for j in range(params.dim + 1):
        marg = scipy.stats.beta(params.theta[j], total - params.theta[j])
        ks = scipy.stats.kstest(bary[:, j], marg.cdf)
        ks_p.append(float(ks.pvalue))

    k = params.dim + 1
    z_crit = scipy.stats.norm.isf(alpha / (3 * k) / 2)
    report = FitReport(
        n_samples=n,
        chi2_stat=chi2,
        chi2_dof=dof,
        chi2_pvalue=chi2_p,
        moment_z=tuple(float(v) for v in z),
        ks_pvalues=tuple(ks_p),
        alpha=alpha,
        chi2_pass=chi2_p > alpha / 3,
        moments_pass=bool(np.all(np.abs(z) < z_crit)),
        ks_pass=bool(all(p > alpha / (3 * k) for p in ks_p)),
    )
    return report

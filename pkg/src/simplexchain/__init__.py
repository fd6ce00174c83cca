"""Simulation and numerical analysis of a vertex-contraction Markov chain
on the d-simplex: exact kernel sampling, discretized transition and
push-forward operators with invariant densities, Dirichlet references, and
classification of minimal absorbing sets.
"""

__version__ = "0.1.0"

from .absorbing import (AbsorbingClass, AbsorbingClassification, AbsorbingSet,
                        Region2D, classify_1d, classify_2d, grow_region,
                        verify_absorbing)
from .chain import (AbsorptionResult, ChainConfig, ErgodicAverage, Trajectory,
                    absorption_experiment, cell_indicator, coordinate,
                    coordinate_product, ergodic_average, simulate, step)
from .dirichlet import (DirichletParams, FitReport, cell_masses, density,
                        goodness_of_fit, log_density, moments, sample,
                        sample_batch)
from .geometry import (EPS_GEOM, SimplexError, SimplexPoint, segment_map,
                       segment_param, vertex)
from .ifs import (UniquenessReport, Verdict, check_uniqueness,
                  contraction_coefficient)
from .operators import (GridDensity, GridFunction, PowerIterationResult,
                        RateEstimate, SimplexGrid, apply_transition,
                        closed_form_density_1d, estimate_convergence_rate,
                        power_iterate, push_density, pushforward_integral_form,
                        transition_matrix)
from .rng import stream
from .weights import (AffineWeights, BoundaryProfile, ConstantWeights,
                      HolderEstimate, ProgrammaticWeights, TabulatedWeights,
                      WeightSpec, WeightValidationError, boundary_profile,
                      holder_constant, load_weights, weights_from_dict)

__all__ = [name for name in dir() if not name.startswith("_")]

"""Constrained maximum likelihood for finite mixtures of uniform densities.

Estimation over parameter spaces whose component half-widths are bounded
below by a sample-size-dependent schedule, plus a seeded experiment CLI
that reproduces the consistency and divergence behavior of the estimator
at desk scale.
"""

__version__ = "0.1.0"

from .model import (ConstraintSpace, MixtureParams, PiecewiseDensity,
                    SupportBounds, UniformComponent, density_at, density_many,
                    in_constraint_space, low_height_count, project_to_bounds,
                    small_component_count, small_support, support_bounds,
                    to_piecewise)
from .sampling import SampleSet, derive_rng, draw_sample
from .likelihood import (LogLikelihood, SurfaceGrid, count_elevated_plateaus,
                         count_in, default_surface_axes, expected_log_density,
                         log_density_many, log_likelihood,
                         spike_competitor_loglik, surface_grid)
from .estimator import (CandidateInterval, FitResult, InstanceTooLargeError,
                        UncoveredPointError, UnsupportedModelError,
                        candidate_intervals, closed_support_loglik,
                        density_l1_distance, density_l1_mixtures, mle_exact,
                        mle_multistart, mle_profile_single, optimize_weights,
                        param_distance)
from .theory import (Covering, OccupancyReport, Schedule,
                     SuperExponentialSchedule, binomial_tail_exact,
                     binomial_tail_log_exact, cover_support,
                     log_cutoff_half_width, okamoto_bound,
                     small_support_occupancy)

__all__ = [name for name in dir() if not name.startswith("_")]

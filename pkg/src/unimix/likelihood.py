"""Numerically stable log-likelihood evaluation and likelihood surfaces.

Evaluation runs in the log domain end to end.  Components whose height
1/(2b) stays inside the double range are summed linearly per point (the
fast path); as soon as any height exceeds ``STABLE_HEIGHT`` the per-point
density switches to a log-sum-exp over the covering components, which
keeps spike components with log b of order -n**d finite for arbitrarily
large n.

An uncovered sample point makes the log-likelihood -inf.  That is a
value, not an error: constrained searches must rank uncovered
configurations below every covered one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import MixtureParams, PiecewiseDensity, UniformComponent, density_many
from .sampling import SampleSet

STABLE_HEIGHT = 1e300  # switch to log-sum-exp beyond this component height

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class LogLikelihood:
    """Sum of log densities over a sample; -inf iff some point is uncovered."""

    value: float
    n: int


@dataclass(frozen=True)
class SurfaceGrid:
    """Log-likelihood values over a (center, half-width) grid."""

    center_axis: np.ndarray
    half_width_axis: np.ndarray
    values: np.ndarray  # shape (len(center_axis), len(half_width_axis))

    def __post_init__(self):
        if self.values.shape != (len(self.center_axis), len(self.half_width_axis)):
            raise ValueError("values shape must match the axes")

    def to_csv(self, path) -> None:
        """Header row: half-width axis; first column: center axis.

        Floats are written with repr so reruns are byte-identical;
        -inf cells come out as "-inf".
        """
        with open(path, "w") as f:
            f.write("," + ",".join(repr(float(b)) for b in self.half_width_axis) + "\n")
            for a, row in zip(self.center_axis, self.values):
                f.write(repr(float(a)) + "," + ",".join(repr(float(v)) for v in row) + "\n")


def log_density_many(params: MixtureParams, xs: np.ndarray) -> np.ndarray:
    """log f(x) for an array of points, stable for extreme heights."""
    xs = np.asarray(xs, dtype=float)
    log_heights = [math.log(w) - LOG2 - c.log_hw if w > 0.0 else -math.inf
                   for w, c in zip(params.weights, params.components)]
    if max(log_heights) <= math.log(STABLE_HEIGHT):
        with np.errstate(divide="ignore"):  # log(0) -> -inf for uncovered points
            return np.log(density_many(params, xs))
    terms = np.full((xs.size, params.n_components), -np.inf)
    for m, (w, comp) in enumerate(zip(params.weights, params.components)):
        if w <= 0.0:
            continue
        cover = ((comp.lower <= xs) & (xs < comp.upper)) | (xs == comp.center)
        terms[cover, m] = log_heights[m]
    peak = terms.max(axis=1)
    out = np.full(xs.size, -np.inf)
    covered = np.isfinite(peak)
    if np.any(covered):
        t = terms[covered]
        p = peak[covered]
        out[covered] = p + np.log(np.exp(t - p[:, None]).sum(axis=1))
    return out


def log_likelihood(params: MixtureParams, sample: SampleSet) -> LogLikelihood:
    """Sum of log mixture densities over the sample."""
    vals = log_density_many(params, sample.values)
    return LogLikelihood(float(np.sum(vals)), sample.n)


def count_in(intervals: Sequence[tuple[float, float]], sample: SampleSet) -> int:
    """Number of sample points in a union of disjoint sorted half-open
    intervals, by binary search on the sorted sample."""
    v = sample.values
    total = 0
    for lo, hi in intervals:
        total += int(np.searchsorted(v, hi, side="left")
                     - np.searchsorted(v, lo, side="left"))
    return total


def spike_competitor_loglik(background_height: float, spike_weight: float,
                            n: float, *, c: float | None = None,
                            log_c: float | None = None) -> float:
    """Best log-likelihood of a boundary model whose minimal-width spike
    contains exactly one sample point.

    That point sees density (1-w)*h + w/(2c); the other n-1 points see
    only the background (1-w)*h.  Pass the spike half-width either
    linearly (`c`) or as `log_c`; the log form is required once c drops
    below the double floor.
    """
    if (c is None) == (log_c is None):
        raise ValueError("pass exactly one of c or log_c")
    if c is not None:
        if not c > 0.0:
            raise ValueError(f"spike half-width must be positive, got {c}")
        log_c = math.log(c)
    if not 0.0 < spike_weight < 1.0:
        raise ValueError("spike_weight must be in (0, 1)")
    if not background_height > 0.0:
        raise ValueError("background_height must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    log_bg = math.log((1.0 - spike_weight) * background_height)
    log_spike = math.log(spike_weight) - LOG2 - log_c
    return float(np.logaddexp(log_bg, log_spike) + (n - 1) * log_bg)


def expected_log_density(density: PiecewiseDensity) -> float:
    """E[log f(X)] when X ~ f, exact for a step density: sum of
    h * log(h) * interval_length over the steps."""
    return math.fsum(h * math.log(h) * (b2 - b1)
                     for h, b1, b2 in zip(density.heights, density.breakpoints,
                                          density.breakpoints[1:])
                     if h > 0.0)


def surface_grid(fixed_weight: float, background: UniformComponent,
                 sample: SampleSet, center_axis: np.ndarray,
                 half_width_axis: np.ndarray) -> SurfaceGrid:
    """Log-likelihood of (1-fixed_weight)*background + fixed_weight*U(a, b)
    over all grid cells (a, b)."""
    centers = np.asarray(center_axis, dtype=float)
    widths = np.asarray(half_width_axis, dtype=float)
    if centers.size == 0 or widths.size == 0:
        raise ValueError("grid axes must be nonempty")
    x = sample.values
    bg_cov = ((background.lower <= x) & (x < background.upper)) | (x == background.center)
    log_bg_pt = np.where(bg_cov,
                         math.log1p(-fixed_weight) - LOG2 - background.log_hw,
                         -np.inf)
    values = np.empty((centers.size, widths.size))
    dx = x[None, :] - centers[:, None]
    for j, b in enumerate(widths):
        cover = (centers[:, None] - b <= x[None, :]) \
            & ((x[None, :] < centers[:, None] + b) | (dx == 0.0))
        s = math.log(fixed_weight) - LOG2 - math.log(b)
        spike_pt = np.where(cover, s, -np.inf)
        values[:, j] = np.logaddexp(log_bg_pt[None, :], spike_pt).sum(axis=1)
    return SurfaceGrid(centers, widths, values)


def default_surface_axes(sample: SampleSet, background: UniformComponent,
                         log_b_min: float, n_centers: int = 200,
                         n_widths: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """Default grid: centers are a uniform sweep of the background support
    augmented with the sample points and their midpoints (so each spike
    plateau is resolved and separated); half-widths are log-spaced from
    the width bound up to the support length."""
    lo, hi = background.lower, background.upper
    x = sample.values
    mids = 0.5 * (x[:-1] + x[1:])
    centers = np.unique(np.concatenate([np.linspace(lo, hi, n_centers), x, mids]))
    log_b_min = max(log_b_min, math.log(5e-324) + 40.0)  # keep the axis linear
    log_b_max = math.log(hi - lo)
    widths = np.exp(np.linspace(log_b_min, log_b_max, n_widths))
    return centers, widths


def count_elevated_plateaus(row: np.ndarray, tol: float = 1e-6) -> int:
    """Number of maximal runs of cells lying above the row's finite floor.

    A cell is elevated when it exceeds the smallest finite value by more
    than `tol`; -inf cells never count."""
    row = np.asarray(row, dtype=float)
    finite = row[np.isfinite(row)]
    if finite.size == 0:
        return 0
    elevated = row > (finite.min() + tol)
    return int(np.sum(elevated[1:] & ~elevated[:-1]) + (1 if elevated[0] else 0))

"""Half-width schedules, binomial tail machinery and covering checks.

Schedules return log-scale values: the width bound c0*exp(-n**d) drops
below the smallest positive double already for moderate n, so every
consumer works with log c_n and converts to linear only when safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import MixtureParams, support_bounds, to_piecewise
from .sampling import derive_rng, draw_sample

LOG_DOUBLE_FLOOR = -745.0  # below this, exp() underflows to 0.0


@dataclass(frozen=True)
class Schedule:
    """Sample-size-dependent lower bound c_n = c0 * exp(-n**d), 0 < d < 1."""

    c0: float
    d: float

    def __post_init__(self):
        if not self.c0 > 0.0:
            raise ValueError("c0 must be positive")
        if not 0.0 < self.d < 1.0:
            raise ValueError("d must be in (0, 1)")

    def log_value(self, n: float) -> float:
        """log c_n = log c0 - n**d."""
        if n < 1:
            raise ValueError("n must be >= 1")
        return math.log(self.c0) - float(n) ** self.d

    def value(self, n: float) -> tuple[float, bool]:
        """Linear c_n and an underflow flag; 0.0 when below the double floor."""
        lv = self.log_value(n)
        if lv <= LOG_DOUBLE_FLOOR:
            return 0.0, True
        return math.exp(lv), False

    def to_dict(self) -> dict:
        return {"c0": self.c0, "d": self.d}


@dataclass(frozen=True)
class SuperExponentialSchedule:
    """Width bound decaying faster than exp(-n): log c_n = -n * log(n).

    This violates the consistency regime on purpose; it is the default
    schedule of the divergence experiment."""

    def log_value(self, n: float) -> float:
        if n < 1:
            raise ValueError("n must be >= 1")
        return -float(n) * math.log(float(n))

    def value(self, n: float) -> tuple[float, bool]:
        lv = self.log_value(n)
        if lv <= LOG_DOUBLE_FLOOR:
            return 0.0, True
        return math.exp(lv), False

    def to_dict(self) -> dict:
        return {"kind": "n_log_n"}


def schedule_from_dict(d: dict) -> Schedule | SuperExponentialSchedule:
    if d.get("kind") == "n_log_n":
        return SuperExponentialSchedule()
    return Schedule(float(d.get("c0", 1.0)), float(d.get("d", 0.93)))


def log_cutoff_half_width(c0: float, n: int) -> float:
    """log of the auxiliary width c0 * exp(-n**(1/4)) used as a height
    cutoff when classifying step intervals."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not c0 > 0.0:
        raise ValueError("c0 must be positive")
    return math.log(c0) - float(n) ** 0.25


def okamoto_bound(n: int, delta: float) -> float:
    """Exponential upper bound exp(-2*n*delta**2) for the binomial
    upper-tail deviation P(Z/n - p >= delta)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not delta > 0.0:
        raise ValueError("delta must be positive")
    return math.exp(-2.0 * n * delta * delta)


def binomial_tail_exact(n: int, p: float, delta: float) -> float:
    """P(Z/n - p >= delta) for Z ~ Bin(n, p), summed exactly.

    Terms use log-domain binomial coefficients and are accumulated from
    the upper end with compensated summation.  The cut index ceil(n*(p+delta))
    is computed with a small relative slack so float fuzz in n*(p+delta)
    cannot shift an integer threshold by one.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    t = n * (p + delta)
    kmin = math.ceil(t - 1e-9 * max(1.0, abs(t)))
    kmin = max(kmin, 0)
    if kmin > n:
        return 0.0
    if p == 0.0:
        return 1.0 if kmin == 0 else 0.0
    if p == 1.0:
        return 1.0
    lp, lq = math.log(p), math.log1p(-p)
    lgn = math.lgamma(n + 1)
    terms = [math.exp(lgn - math.lgamma(k + 1) - math.lgamma(n - k + 1)
                      + k * lp + (n - k) * lq)
             for k in range(n, kmin - 1, -1)]
    return min(1.0, math.fsum(terms))


def binomial_tail_log_exact(n: int, p: float, delta: float) -> float:
    """log of the exact upper tail; finite even when the tail underflows
    the double range (-inf only when the tail is exactly zero).

    Needed to check the strict inequality against -2*n*delta**2 at grid
    points where both sides are far below the double floor."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    t = n * (p + delta)
    kmin = max(math.ceil(t - 1e-9 * max(1.0, abs(t))), 0)
    if kmin > n or p == 0.0 and kmin > 0:
        return -math.inf
    if p in (0.0, 1.0):
        return 0.0
    lp, lq = math.log(p), math.log1p(-p)
    lgn = math.lgamma(n + 1)
    logs = [lgn - math.lgamma(k + 1) - math.lgamma(n - k + 1)
            + k * lp + (n - k) * lq
            for k in range(kmin, n + 1)]
    peak = max(logs)
    return peak + math.log(math.fsum(math.exp(v - peak) for v in logs))


@dataclass(frozen=True)
class Covering:
    """Division of a union of intervals into pieces of common length 2c.

    Within each source interval the pieces abut from the left end; the
    final piece is right-aligned with the interval's right end, which
    allows a single overlap there.  A piece longer than its source
    interval overhangs to the left (possibly into a neighboring source's
    territory), so any window of length <= 2c inside ONE source interval
    is covered by at most 3 pieces of that source; pieces of other
    sources can only add coverage."""

    pieces: tuple[tuple[float, float], ...]
    source: tuple[tuple[float, float], ...]
    source_of: tuple[int, ...]  # piece index -> source-interval index
    c: float

    def count(self) -> int:
        return len(self.pieces)


def cover_support(j0: Sequence[tuple[float, float]], c: float) -> Covering:
    """Cover each source interval with length-2c pieces laid left to right,
    the last piece right-aligned.  Piece count is at most
    span/(2c) + (number of source intervals)."""
    if not c > 0.0:
        raise ValueError("c must be positive")
    src = tuple((float(lo), float(hi)) for lo, hi in j0)
    if any(lo >= hi for lo, hi in src):
        raise ValueError("source intervals must have positive length")
    if any(a[1] > b[0] for a, b in zip(src, src[1:])):
        raise ValueError("source intervals must be disjoint and sorted")
    width = 2.0 * c
    pieces: list[tuple[float, float]] = []
    source_of: list[int] = []
    for s, (lo, hi) in enumerate(src):
        k = max(1, math.ceil((hi - lo) / width - 1e-12))
        for i in range(k - 1):
            pieces.append((lo + i * width, lo + (i + 1) * width))
        pieces.append((hi - width, hi))  # right-aligned closer
        source_of.extend([s] * k)
    return Covering(tuple(pieces), src, tuple(source_of), c)


@dataclass(frozen=True)
class OccupancyReport:
    """Measured supremum of the sample fraction captured by small-component
    supports, against the bound 3*M*u*2*c0."""

    bound: float
    empirical_sup: float
    n: int
    c0: float
    trials: int
    seed: int

    def to_dict(self) -> dict:
        return {"bound": self.bound, "empirical_sup": self.empirical_sup,
                "n": self.n, "c0": self.c0, "trials": self.trials,
                "seed": self.seed}


def _max_window_count(values: np.ndarray, width: float, blocked: np.ndarray) -> tuple[int, int, int]:
    """Best (count, i, j) over windows [x_i, x_i + width] of unblocked points."""
    best = (0, 0, -1)
    j = 0
    n = values.size
    for i in range(n):
        if blocked[i]:
            continue
        j = max(j, i)
        while j + 1 < n and values[j + 1] <= values[i] + width:
            j += 1
        cnt = int(np.sum(~blocked[i:j + 1]))
        if cnt > best[0]:
            best = (cnt, i, j)
    return best


def small_support_occupancy(truth: MixtureParams, c0: float, n: int,
                            theta_trials: int, seed: int) -> OccupancyReport:
    """Empirically maximize the fraction of one size-n sample that a union
    of at-most-M small supports (each of length <= 2*c0) can capture.

    The search combines randomized parameter draws having at least one
    small component with a greedy adversarial scan that drops length-2*c0
    windows on the densest remaining sample regions.  The report records
    the measured supremum next to the bound 3*M*u*2*c0; it measures, it
    does not assert.
    """
    m = truth.n_components
    u = to_piecewise(truth).max_height()
    bound = 3.0 * m * u * 2.0 * c0
    sample = draw_sample(truth, n, (seed, 0))
    x = sample.values
    bounds = support_bounds(truth)

    # greedy adversarial placement: M windows of length 2*c0
    blocked = np.zeros(n, dtype=bool)
    greedy_total = 0
    for _ in range(m):
        cnt, i, j = _max_window_count(x, 2.0 * c0, blocked)
        if cnt == 0:
            break
        greedy_total += cnt
        blocked[i:j + 1] = True
    best = greedy_total / n

    # randomized draws: only the small components matter (their union is
    # the region being counted), so draw K <= M of them directly
    rng = derive_rng(seed, 1)
    for _ in range(theta_trials):
        k = int(rng.integers(1, m + 1))
        small = []
        for _ in range(k):
            center = float(rng.uniform(bounds.l_min, bounds.l_max))
            hw = max(float(rng.uniform(0.0, c0)), c0 * 1e-6)
            small.append((center - hw, center + hw))
        merged: list[tuple[float, float]] = []
        for lo, hi in sorted(small):
            if merged and lo <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
            else:
                merged.append((lo, hi))
        cnt = 0
        for lo, hi in merged:
            cnt += int(np.searchsorted(x, hi, side="left")
                       - np.searchsorted(x, lo, side="left"))
        best = max(best, cnt / n)
    return OccupancyReport(bound, best, n, c0, theta_trials, seed)

"""Constrained maximum-likelihood estimation over uniform mixtures.

The search space is reduced to a finite candidate family by a
monotonicity argument: for a fixed set of covered sample points the
likelihood is strictly decreasing in a component's width, so an optimal
component either spans its covered run tightly or sits at the width
bound.  Candidates are therefore contiguous runs of the sorted sample;
a run's interval is the tight span when that is wide enough, otherwise
the interval has the bound width and is centered on the run (shifted
minimally when the centered position would capture a neighbor, dropped
when no capture-free position exists, in which case the enclosing run
dominates it anyway).

Optimization is over the closures of the half-open supports: the
supremum of the likelihood in the position parameters is attained only
with closed intervals, so candidate containment is closed-interval
containment and the reported value is that supremum.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .model import ConstraintSpace, MixtureParams, PiecewiseDensity, UniformComponent
from .likelihood import LOG2
from .sampling import SampleSet, derive_rng


class UncoveredPointError(ValueError):
    """Some sample point is covered by no component support."""


class UnsupportedModelError(ValueError):
    """Requested component count outside the supported exact-search range."""


class InstanceTooLargeError(ValueError):
    """Sample too large for exhaustive search; use mle_multistart."""


EXACT_N_CAP = 200  # default exhaustive-search cap for two components


@dataclass(frozen=True)
class CandidateInterval:
    """One candidate component: the run of sorted sample indices it covers
    (inclusive) plus its interval.  The closed interval
    [center - half_width, center + half_width] contains exactly the run's
    points.  half_width is max(run_span/2, width_bound), up to float-level
    adjustment needed to keep the containment exact."""

    run_start: int
    run_end: int
    center: float
    half_width: float
    log_half_width: float

    def component(self) -> UniformComponent:
        if self.half_width > 0.0:
            return UniformComponent(self.center, self.half_width)
        return UniformComponent(self.center, 0.0, self.log_half_width)


@dataclass(frozen=True)
class FitResult:
    """A fitted mixture, its log-likelihood, and search bookkeeping."""

    params: MixtureParams
    loglik: float
    mode: str  # "exact" | "multistart"
    evaluations: int
    space: ConstraintSpace

    def to_dict(self) -> dict:
        return {"params": self.params.to_dict(), "loglik": self.loglik,
                "mode": self.mode, "evaluations": self.evaluations,
                "constraint_space": self.space.to_dict()}


# ---------------------------------------------------------------------------
# closed-support likelihood
#
# The likelihood supremum in the position parameters is attained only in
# the closure of the half-open supports, so the search scores and reports
# values over closed intervals.  The half-open evaluation of a fitted
# parameter can differ when a sample point sits exactly on a closed right
# endpoint; the reported loglik is always the supremum value.


def _closed_cover(comp: UniformComponent, x: np.ndarray) -> np.ndarray:
    return (comp.lower <= x) & (x <= comp.upper)


def closed_support_loglik(params: MixtureParams, sample: SampleSet) -> float:
    """Log-likelihood with every component support taken as closed."""
    x = sample.values
    terms = np.full((x.size, params.n_components), -np.inf)
    for m, (w, comp) in enumerate(zip(params.weights, params.components)):
        if w <= 0.0:
            continue
        terms[_closed_cover(comp, x), m] = math.log(w) - LOG2 - comp.log_hw
    peak = terms.max(axis=1)
    if not np.all(np.isfinite(peak)):
        return -math.inf
    return float((peak + np.log(np.exp(terms - peak[:, None]).sum(axis=1))).sum())


# ---------------------------------------------------------------------------
# candidate geometry


def _geometry_pass(x: np.ndarray, ell: int, c_lin: float, log_c: float,
                   box_lo: float, box_hi: float, cap: float):
    """Geometry for every run of length `ell`.

    Returns (center, b, log_b, valid); entry k describes the run
    x[k] .. x[k+ell-1].  Width-bound runs are centered then shifted
    minimally; tight runs are widened by ulps when float rounding would
    otherwise exclude a run endpoint.  `valid` is False where no interval
    contains exactly the run within the center box and width cap.
    """
    n = x.size
    i = np.arange(n - ell + 1)
    j = i + ell - 1
    xi = x[: n - ell + 1]
    xj = x[ell - 1:]
    span = xj - xi
    if c_lin > 0.0:
        forced = span < 2.0 * c_lin
    else:
        forced = span == 0.0  # bound below the double floor: only exact ties
    b = np.where(forced, c_lin, 0.5 * span)
    log_b = np.where(forced, log_c, np.log(np.where(forced, 1.0, 0.5 * span)))
    center = 0.5 * (xi + xj)

    has_left = i > 0
    has_right = j < n - 1
    left_nb = np.where(has_left, x[np.maximum(i - 1, 0)], -np.inf)
    right_nb = np.where(has_right, x[np.minimum(j + 1, n - 1)], np.inf)

    # admissible center window for width-bound runs
    wlo = np.maximum(xj - b, box_lo)
    whi = np.minimum(xi + b, box_hi)
    wlo = np.maximum(wlo, np.where(has_left, np.nextafter(left_nb + b, np.inf), -np.inf))
    whi = np.minimum(whi, np.where(has_right, np.nextafter(right_nb - b, -np.inf), np.inf))
    window_ok = wlo <= whi
    center = np.where(forced, np.clip(center, wlo, whi), center)

    lo = center - b
    hi = center + b
    for _ in range(4):
        widen = ~forced & ((lo > xi) | (hi < xj))
        nudge_dn = forced & (lo > xi)
        nudge_up = forced & (hi < xj)
        if not (widen.any() or nudge_dn.any() or nudge_up.any()):
            break
        b = np.where(widen, np.nextafter(b, np.inf), b)
        center = np.where(nudge_dn, np.nextafter(center, -np.inf), center)
        center = np.where(nudge_up, np.nextafter(center, np.inf), center)
        lo = center - b
        hi = center + b
    log_b = np.where(forced, log_c, np.log(np.where(forced, 1.0, b)))

    contains = (lo <= xi) & (hi >= xj)
    excludes = (~has_left | (left_nb < lo)) & (~has_right | (right_nb > hi))
    in_box = (box_lo <= center) & (center <= box_hi)
    valid = contains & excludes & in_box & (b <= cap) & (~forced | window_ok)
    return center, b, log_b, valid


def candidate_intervals(sample: SampleSet, c_lower: float, *,
                        log_c_lower: float | None = None,
                        center_box: tuple[float, float] = (-math.inf, math.inf),
                        half_width_cap: float = math.inf) -> list[CandidateInterval]:
    """Enumerate every run of consecutive sample points that some interval
    of width max(run_span, 2*c_lower) can contain exactly.  At most
    n*(n+1)/2 candidates."""
    if log_c_lower is None:
        if not c_lower > 0.0:
            raise ValueError("c_lower must be positive")
        log_c_lower = math.log(c_lower)
    x = sample.values
    out: list[CandidateInterval] = []
    for ell in range(1, sample.n + 1):
        center, b, log_b, valid = _geometry_pass(
            x, ell, c_lower, log_c_lower, center_box[0], center_box[1],
            half_width_cap)
        for k in np.flatnonzero(valid):
            out.append(CandidateInterval(int(k), int(k) + ell - 1,
                                         float(center[k]), float(b[k]),
                                         float(log_b[k])))
    return out


# ---------------------------------------------------------------------------
# mixing-weight optimization (components fixed)


def optimize_weights(sample: SampleSet, supports: list[UniformComponent],
                     tol: float = 1e-10,
                     max_iter: int = 10000) -> tuple[tuple[float, ...], float]:
    """Maximize the log-likelihood over the mixing weights with the
    component supports fixed.

    The objective is concave on the simplex, so the classical fixed-point
    iteration  w_m <- mean_i( w_m f_m(x_i) / sum_k w_k f_k(x_i) )
    from the uniform start converges to the global optimum.  Stops when
    the log-likelihood improves by less than `tol`.  Supports are taken
    as closed intervals (supremum semantics, see module docstring).
    """
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    x = sample.values
    m = len(supports)
    log_f = np.full((x.size, m), -np.inf)
    for k, comp in enumerate(supports):
        log_f[_closed_cover(comp, x), k] = -LOG2 - comp.log_hw
    if np.any(~np.isfinite(log_f.max(axis=1))):
        idx = int(np.flatnonzero(~np.isfinite(log_f.max(axis=1)))[0])
        raise UncoveredPointError(
            f"sample point x[{idx}]={x[idx]!r} is covered by no support")
    weights = np.full(m, 1.0 / m)
    prev = -math.inf
    for _ in range(max_iter):
        with np.errstate(divide="ignore"):
            terms = log_f + np.log(weights)[None, :]
        peak = terms.max(axis=1)
        if not np.all(np.isfinite(peak)):
            break  # a weight underflowed to 0 on a point it alone covers
        lse = peak + np.log(np.exp(terms - peak[:, None]).sum(axis=1))
        ll = float(lse.sum())
        if ll - prev < tol:
            prev = max(prev, ll)
            break
        prev = ll
        weights = np.exp(terms - lse[:, None]).mean(axis=0)
    return tuple(float(w) for w in weights), prev


# ---------------------------------------------------------------------------
# profile fit: background and weights fixed, one free component


def _better(key_a: tuple, key_b: tuple | None) -> bool:
    """True if key_a wins: higher loglik, then smaller width, then smaller
    center, then lower run index."""
    if key_b is None:
        return True
    if key_a[0] != key_b[0]:
        return key_a[0] > key_b[0]
    return key_a[1:] < key_b[1:]


def mle_profile_single(sample: SampleSet, background: UniformComponent,
                       weights: tuple[float, float],
                       space: ConstraintSpace) -> FitResult:
    """Exact best free component for the model
    weights[0]*background + weights[1]*U(a, b) over the candidate family.

    The background and the weights stay fixed.  The scan is O(1) per
    candidate because the background contributes the same log density to
    every point it covers.
    """
    w_bg, w_free = float(weights[0]), float(weights[1])
    if abs((w_bg + w_free) - 1.0) > 1e-12 or w_bg < 0.0 or not w_free > 0.0:
        raise ValueError("weights must be nonnegative and sum to 1, with a "
                         "positive free weight")
    x = sample.values
    n = x.size
    box_lo, box_hi = space.center_box
    bg_cov = ((background.lower <= x) & (x < background.upper)) | (x == background.center)
    log_bg = (math.log(w_bg) - LOG2 - background.log_hw) if w_bg > 0.0 else -math.inf
    cum = np.concatenate([[0], np.cumsum(bg_cov)])
    total_cov = int(cum[-1])
    total_uncov = n - total_cov
    log_wf = math.log(w_free)

    best_key = None  # (ll, log_b, center, run_start, run_end)
    best_b = 0.0
    evaluations = 0
    for ell in range(1, n + 1):
        center, b, log_b, valid = _geometry_pass(
            x, ell, space.c_lower, space.log_c_lower, box_lo, box_hi,
            space.half_width_cap)
        m1 = cum[ell:] - cum[:n - ell + 1]   # run points covered by background
        m0 = ell - m1                        # run points seen only by the spike
        s = log_wf - LOG2 - log_b
        if w_bg > 0.0:
            ll = (total_cov - m1) * log_bg + m1 * np.logaddexp(log_bg, s) + m0 * s
        else:
            ll = np.where(ell == n, ell * s, -np.inf)
        ll = np.where(valid & (total_uncov - m0 == 0), ll, -np.inf)
        evaluations += int(valid.sum())
        top = float(ll.max())
        if top == -math.inf:
            continue
        tied = np.flatnonzero(ll == top)
        k = tied[np.lexsort((center[tied], log_b[tied]))[0]]
        key = (top, float(log_b[k]), float(center[k]), int(k), int(k) + ell - 1)
        if _better(key, best_key):
            best_key = key
            best_b = float(b[k])
    if best_key is None:
        raise RuntimeError("no placeable candidate interval")
    _, log_b, center, i, j = best_key
    free = (UniformComponent(center, best_b) if best_b > 0.0
            else UniformComponent(center, 0.0, log_b))
    params = MixtureParams((w_bg, w_free), (background, free))
    ll = closed_support_loglik(params, sample)
    return FitResult(params, ll, "exact", evaluations, space)


# ---------------------------------------------------------------------------
# exact and multistart fits over M free components


def _run_union_covers_all(runs: list[tuple[int, int]], n: int) -> bool:
    spans = sorted(runs)
    reach = -1
    for i, j in spans:
        if i > reach + 1:
            return False
        reach = max(reach, j)
    return reach == n - 1


def _candidate_sort_key(c: CandidateInterval) -> tuple:
    return (c.log_half_width, c.center, c.run_start, c.run_end)


def mle_exact(sample: SampleSet, n_components: int, space: ConstraintSpace,
              weight_tol: float = 1e-10, n_cap: int = EXACT_N_CAP) -> FitResult:
    """Global constrained MLE by exhaustive search over candidate tuples,
    optimizing the mixing weights for each tuple.

    Supported for one or two components; the two-component search scores
    O(n^4) tuples, hence the sample-size cap.
    """
    if n_components not in (1, 2):
        raise UnsupportedModelError(
            f"exact search supports 1 or 2 components, got {n_components}")
    if n_components == 2 and sample.n > n_cap:
        raise InstanceTooLargeError(
            f"n={sample.n} exceeds the exhaustive-search cap {n_cap}; "
            "use mle_multistart")
    cands = candidate_intervals(sample, space.c_lower,
                                log_c_lower=space.log_c_lower,
                                center_box=space.center_box,
                                half_width_cap=space.half_width_cap)
    n = sample.n
    best = None  # (ll_for_ranking, tie_key, params)
    evaluations = 0
    if n_components == 1:
        for c in cands:
            evaluations += 1
            if not (c.run_start == 0 and c.run_end == n - 1):
                continue
            ll = n * (-LOG2 - c.log_half_width)
            key = (_candidate_sort_key(c),)
            params = MixtureParams((1.0,), (c.component(),))
            if best is None or _better((ll,) + key, (best[0],) + best[1]):
                best = (ll, key, params)
    else:
        for a, bcand in itertools.combinations_with_replacement(cands, 2):
            evaluations += 1
            if not _run_union_covers_all(
                    [(a.run_start, a.run_end), (bcand.run_start, bcand.run_end)], n):
                continue
            supports = [a.component(), bcand.component()]
            try:
                w, ll = optimize_weights(sample, supports, tol=weight_tol)
            except UncoveredPointError:
                continue
            key = tuple(sorted([_candidate_sort_key(a), _candidate_sort_key(bcand)]))
            params = MixtureParams(w, tuple(supports))
            if best is None or _better((ll,) + key, (best[0],) + best[1]):
                best = (ll, key, params)
    if best is None:
        # nothing covers every point: report the widest candidate at -inf
        fallback = max(cands, key=lambda c: c.run_end - c.run_start)
        comps = (fallback.component(),) * n_components
        w = tuple([1.0 / n_components] * n_components)
        return FitResult(MixtureParams(w, comps), -math.inf, "exact",
                         evaluations, space)
    params = best[2]
    ll = closed_support_loglik(params, sample)
    return FitResult(params, ll, "exact", evaluations, space)


def _score_runs(sample: SampleSet, runs: list[tuple[int, int]],
                space: ConstraintSpace, weight_tol: float,
                geometry_cache: dict) -> tuple[float, MixtureParams | None]:
    """Log-likelihood of a run assignment (weights optimized), or -inf when
    some run is not placeable or some point is uncovered."""
    x = sample.values
    supports = []
    for i, j in runs:
        ell = j - i + 1
        if ell not in geometry_cache:
            geometry_cache[ell] = _geometry_pass(
                x, ell, space.c_lower, space.log_c_lower,
                space.center_box[0], space.center_box[1], space.half_width_cap)
        center, b, log_b, valid = geometry_cache[ell]
        if not valid[i]:
            return -math.inf, None
        bf = float(b[i])
        supports.append(UniformComponent(float(center[i]), bf) if bf > 0.0
                        else UniformComponent(float(center[i]), 0.0, float(log_b[i])))
    if not _run_union_covers_all(runs, sample.n):
        return -math.inf, None
    try:
        w, ll = optimize_weights(sample, supports, tol=weight_tol)
    except UncoveredPointError:
        return -math.inf, None
    return ll, MixtureParams(w, tuple(supports))


def mle_multistart(sample: SampleSet, n_components: int, space: ConstraintSpace,
                   restarts: int, seed: int, weight_tol: float = 1e-10,
                   init_runs: list[tuple[int, int]] | None = None) -> FitResult:
    """Best-of-restarts local search over run assignments.

    Moves grow or shrink one component's run by one point on either side,
    or relocate it to a singleton run.  Each accepted move strictly
    improves the weight-optimized log-likelihood, so a start at the exact
    optimum is returned unchanged.  Restart r draws its start from a
    stream derived from (seed, r); raising `restarts` only adds starts.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    n = sample.n
    cache: dict = {}
    best_ll = -math.inf
    best_params: MixtureParams | None = None
    evaluations = 0

    def climb(runs: list[tuple[int, int]]) -> tuple[float, MixtureParams | None]:
        nonlocal evaluations
        ll, params = _score_runs(sample, runs, space, weight_tol, cache)
        evaluations += 1
        for _ in range(1000):
            move_best = None
            for m in range(n_components):
                i, j = runs[m]
                options = []
                if i - 1 >= 0:
                    options.append((i - 1, j))
                if i + 1 <= j:
                    options.append((i + 1, j))
                if j + 1 <= n - 1:
                    options.append((i, j + 1))
                if j - 1 >= i:
                    options.append((i, j - 1))
                options.extend((k, k) for k in range(n))
                for opt in options:
                    trial = list(runs)
                    trial[m] = opt
                    t_ll, t_params = _score_runs(sample, trial, space,
                                                 weight_tol, cache)
                    evaluations += 1
                    if t_ll > ll and (move_best is None or t_ll > move_best[0]):
                        move_best = (t_ll, trial, t_params)
            if move_best is None:
                return ll, params
            ll, runs, params = move_best
        return ll, params

    for r in range(restarts):
        if r == 0 and init_runs is not None:
            runs = [tuple(run) for run in init_runs]
        else:
            rng = derive_rng(seed, r)
            if n_components > 1 and rng.random() < 0.5:
                # full-range run plus short runs: the shape of spike-and-slab
                # optima that contiguous partitions rarely reach by local moves
                runs = [(0, n - 1)]
                for _ in range(n_components - 1):
                    w = int(rng.integers(0, min(4, n)))
                    k = int(rng.integers(0, n - w))
                    runs.append((k, k + w))
            else:
                cuts = (np.sort(rng.choice(np.arange(1, n), size=n_components - 1,
                                           replace=False))
                        if n_components > 1 else np.array([], int))
                edges = [0, *cuts.tolist(), n]
                runs = [(edges[k], edges[k + 1] - 1) for k in range(n_components)]
        ll, params = climb(runs)
        if ll > best_ll or best_params is None:
            best_ll, best_params = ll, params
    if best_params is None:
        raise RuntimeError("all restarts failed to place components")
    ll = closed_support_loglik(best_params, sample)
    return FitResult(best_params, ll, "multistart", evaluations, space)


# ---------------------------------------------------------------------------
# distances


def density_l1_distance(p: PiecewiseDensity, q: PiecewiseDensity) -> float:
    """Exact integral of |p - q| over the merged breakpoint partition.

    Zero iff the two step functions are identical; never exceeds 2."""
    cuts = sorted(set(p.breakpoints) | set(q.breakpoints))
    return math.fsum(abs(p.at(lo) - q.at(lo)) * (hi - lo)
                     for lo, hi in zip(cuts, cuts[1:]))


def density_l1_mixtures(p: MixtureParams, q: MixtureParams) -> float:
    """L1 distance between two mixture densities, tolerating components
    whose width is below float resolution.

    Such a component is an atom at this precision: its support has zero
    representable length, so it contributes its full weight to the
    integral (two atoms at identical positions still count separately;
    fitted spikes never coincide with a true component here).  For fully
    regular mixtures this equals density_l1_distance of the step forms.
    """

    def split(params):
        regular, atom_weight = [], 0.0
        for w, comp in zip(params.weights, params.components):
            if w == 0.0:
                continue
            if comp.lower < comp.upper:
                regular.append((w, comp))
            else:
                atom_weight += w
        return regular, atom_weight

    reg_p, atoms_p = split(p)
    reg_q, atoms_q = split(q)
    cuts = sorted({e for _, c in reg_p + reg_q for e in (c.lower, c.upper)})

    def height(regular, lo, hi):
        return math.fsum(w / (2.0 * c.half_width) for w, c in regular
                         if c.lower <= lo and c.upper >= hi)

    body = math.fsum(abs(height(reg_p, lo, hi) - height(reg_q, lo, hi)) * (hi - lo)
                     for lo, hi in zip(cuts, cuts[1:]))
    return body + atoms_p + atoms_q


def param_distance(est: MixtureParams, truth: MixtureParams) -> float:
    """Smallest Euclidean distance between the stacked (weight, center,
    half_width) vectors over all relabelings of the components."""
    if est.n_components != truth.n_components:
        raise ValueError("component counts differ")
    m = est.n_components
    ev = [(est.weights[k], est.components[k].center, est.components[k].half_width)
          for k in range(m)]
    tv = [(truth.weights[k], truth.components[k].center, truth.components[k].half_width)
          for k in range(m)]
    best = math.inf
    for perm in itertools.permutations(range(m)):
        d = math.fsum((a - b) ** 2
                      for k in range(m)
                      for a, b in zip(ev[k], tv[perm[k]]))
        best = min(best, d)
    return math.sqrt(best)

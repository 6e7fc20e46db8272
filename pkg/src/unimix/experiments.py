"""Seeded batch experiments: reproducing the likelihood-surface picture,
the true-vs-boundary table, and the consistency / divergence behavior of
the width-constrained estimator.

Every experiment is driven by a JSON-able config dict and a master seed;
each (n, replication) cell derives its own RNG stream from
(seed, n, replication), so reports are reproducible row by row and
independent of execution order.  Reports serialize deterministically:
the only volatile fields (wall-clock timestamp and per-row runtimes) are
excluded from the canonical form used for byte-identity checks.
"""

from __future__ import annotations

import hashlib
import json
import math
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .model import (ConstraintSpace, MixtureParams, UniformComponent,
                    support_bounds, to_piecewise)
from .sampling import draw_sample
from .likelihood import (count_elevated_plateaus, default_surface_axes,
                         expected_log_density, log_likelihood,
                         spike_competitor_loglik, surface_grid)
from .estimator import (FitResult, density_l1_mixtures, mle_exact,
                        mle_multistart, mle_profile_single, param_distance)
from .theory import (Schedule, SuperExponentialSchedule, binomial_tail_exact,
                     binomial_tail_log_exact, cover_support, okamoto_bound,
                     schedule_from_dict, small_support_occupancy)

VOLATILE_KEYS = ("timestamp", "runtime")

DEFAULT_TRUTH = {
    "weights": [0.6, 0.4],
    "components": [{"center": 0.5, "half_width": 0.5},
                   {"center": 0.6, "half_width": 0.2}],
}
DEFAULT_SCHEDULE = {"c0": 1.0, "d": 0.93}


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class ExperimentReport:
    """Rows plus summary of one experiment run, with full provenance."""

    name: str
    config: dict
    rows: list[dict]
    summary: list[dict] = field(default_factory=list)
    version: str = __version__
    timestamp: str = ""
    config_sha256: str = ""

    def __post_init__(self):
        if not self.timestamp:
            self.timestamp = datetime.now(timezone.utc).isoformat()
        if not self.config_sha256:
            self.config_sha256 = config_hash(self.config)

    def to_dict(self) -> dict:
        return {"name": self.name, "version": self.version,
                "timestamp": self.timestamp,
                "config": self.config, "config_sha256": self.config_sha256,
                "rows": self.rows, "summary": self.summary}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def canonical_json(self) -> str:
        """Deterministic form: volatile fields removed."""

        def strip(obj):
            if isinstance(obj, dict):
                return {k: strip(v) for k, v in obj.items()
                        if k not in VOLATILE_KEYS}
            if isinstance(obj, list):
                return [strip(v) for v in obj]
            return obj

        return json.dumps(strip(self.to_dict()), sort_keys=True, indent=2)

    def failed_rows(self) -> list[dict]:
        return [r for r in self.rows if r.get("pass") is False
                or r.get("failed") is True]

    def write(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.to_json() + "\n")


def _parse_common(config: dict | None, defaults: dict) -> dict:
    cfg = dict(defaults)
    cfg.update(config or {})
    cfg.setdefault("truth", DEFAULT_TRUTH)
    cfg.setdefault("schedule", DEFAULT_SCHEDULE)
    cfg.setdefault("seed", 0)
    return cfg


def _truth(cfg: dict) -> MixtureParams:
    return MixtureParams.from_dict(cfg["truth"])


def _constraint_space(truth: MixtureParams, log_c_n: float) -> ConstraintSpace:
    bounds = support_bounds(truth)
    return ConstraintSpace.from_log(min(log_c_n, math.log(bounds.length)),
                                    (bounds.l_min, bounds.l_max),
                                    bounds.length)


def _map_cells(fn, cells: list, threads: int) -> list:
    """Apply fn to all cells, in parallel when asked; output order is the
    cell order regardless of scheduling."""
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, cells))
    return [fn(c) for c in cells]


def true_log_density_rate(truth: MixtureParams) -> float:
    """Expected per-point log density under the true model (exact for a
    step density)."""
    return expected_log_density(to_piecewise(truth))


def boundary_competitor_value(truth: MixtureParams, log_c_n: float,
                              n: float) -> float:
    """Closed-form best log-likelihood of the boundary model: the first
    true component as fixed background plus a width-floor spike holding a
    single observation."""
    bg = truth.components[0]
    h = 1.0 / (2.0 * bg.half_width)
    spike_w = 1.0 - truth.weights[0]
    return spike_competitor_loglik(h, spike_w, n, log_c=log_c_n)


def crossover_sample_size(truth: MixtureParams | None = None,
                          d: float = 0.93, c0: float = 1.0,
                          lo: float = 500.0, hi: float = 1000.0,
                          iters: int = 200) -> float:
    """Sample size where the expected true-model log-likelihood overtakes
    the deterministic boundary-competitor curve, located by bisection on
    [lo, hi].  Raises if the bracket does not straddle the crossing."""
    truth = truth if truth is not None else MixtureParams.from_dict(DEFAULT_TRUTH)
    rate = true_log_density_rate(truth)
    sched = Schedule(c0, d)

    def gap(n: float) -> float:
        return boundary_competitor_value(truth, sched.log_value(n), n) - rate * n

    if not (gap(lo) > 0.0 and gap(hi) < 0.0):
        raise ValueError("bracket does not straddle the crossover")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if gap(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# commands


def cmd_surface(config: dict | None = None) -> tuple:
    """Likelihood surface of the two-component model with the first
    component and the weights fixed; returns (SurfaceGrid, report)."""
    cfg = _parse_common(config, {
        "n": 40, "n_centers": 200, "n_widths": 200})
    truth = _truth(cfg)
    sched = schedule_from_dict(cfg["schedule"])
    n = int(cfg["n"])
    sample = draw_sample(truth, n, (int(cfg["seed"]), n, 0))
    background = truth.components[0]
    fixed_weight = 1.0 - truth.weights[0]
    centers, widths = default_surface_axes(
        sample, background, sched.log_value(n),
        n_centers=int(cfg["n_centers"]), n_widths=int(cfg["n_widths"]))
    grid = surface_grid(fixed_weight, background, sample, centers, widths)
    plateaus = count_elevated_plateaus(grid.values[:, 0])
    report = ExperimentReport("surface", cfg, rows=[{
        "n": n, "plateaus_at_smallest_half_width": plateaus,
        "smallest_half_width": float(widths[0]),
        "grid_shape": [int(centers.size), int(widths.size)],
    }])
    return grid, report


def cmd_table1(config: dict | None = None, threads: int = 1) -> ExperimentReport:
    """Monte Carlo log-likelihood at the true parameters against the
    deterministic boundary-competitor value, per sample size."""
    cfg = _parse_common(config, {
        "n_grid": [10, 50, 100, 500, 1000, 5000], "replications": 10})
    truth = _truth(cfg)
    sched = schedule_from_dict(cfg["schedule"])
    reps = int(cfg["replications"])
    seed = int(cfg["seed"])

    def run_cell(cell):
        n, rep = cell
        t0 = time.perf_counter()
        sample = draw_sample(truth, n, (seed, n, rep))
        ll = log_likelihood(truth, sample).value
        return {"n": n, "replication": rep, "loglik_true": ll,
                "runtime": time.perf_counter() - t0}

    cells = [(int(n), r) for n in cfg["n_grid"] for r in range(reps)]
    rows = _map_cells(run_cell, cells, threads)
    summary = []
    for n in (int(v) for v in cfg["n_grid"]):
        vals = [r["loglik_true"] for r in rows if r["n"] == n]
        summary.append({
            "n": n,
            "loglik_boundary": boundary_competitor_value(
                truth, sched.log_value(n), n),
            "loglik_true_mean": statistics.fmean(vals),
            "loglik_true_sd": statistics.stdev(vals) if len(vals) > 1 else 0.0,
            "log_c_n": sched.log_value(n),
        })
    return ExperimentReport("table1", cfg, rows, summary)


def _fit_one(truth: MixtureParams, sample, space: ConstraintSpace,
             cfg: dict) -> FitResult:
    mode = cfg.get("mode", "profile")
    if mode == "profile":
        background = truth.components[0]
        weights = (truth.weights[0], 1.0 - truth.weights[0])
        return mle_profile_single(sample, background, weights, space)
    if mode == "exact":
        return mle_exact(sample, int(cfg.get("m", truth.n_components)), space)
    if mode == "multistart":
        return mle_multistart(sample, int(cfg.get("m", truth.n_components)),
                              space, restarts=int(cfg.get("restarts", 10)),
                              seed=int(cfg["seed"]))
    raise ValueError(f"unknown estimator mode {mode!r}")


def cmd_consistency(config: dict | None = None, threads: int = 1) -> ExperimentReport:
    """Fit on the width-constrained space per (n, seed) and record the
    distances to the true model; per-n medians in the summary."""
    cfg = _parse_common(config, {
        "n_grid": [50, 200, 500, 1000, 2000], "replications": 20,
        "mode": "profile"})
    truth = _truth(cfg)
    sched = schedule_from_dict(cfg["schedule"])
    reps = int(cfg["replications"])
    seed = int(cfg["seed"])

    def run_cell(cell):
        n, rep = cell
        t0 = time.perf_counter()
        sample = draw_sample(truth, n, (seed, n, rep))
        space = _constraint_space(truth, sched.log_value(n))
        try:
            fit = _fit_one(truth, sample, space, cfg)
        except Exception as exc:  # row fails, run continues
            return {"n": n, "replication": rep, "failed": True,
                    "error": f"{type(exc).__name__}: {exc}",
                    "runtime": time.perf_counter() - t0}
        row = {"n": n, "replication": rep, "failed": False,
               "loglik_fit": fit.loglik,
               "l1_distance": density_l1_mixtures(fit.params, truth),
               "evaluations": fit.evaluations,
               "runtime": time.perf_counter() - t0}
        if fit.params.n_components == truth.n_components:
            row["param_distance"] = param_distance(fit.params, truth)
        return row

    cells = [(int(n), r) for n in cfg["n_grid"] for r in range(reps)]
    rows = _map_cells(run_cell, cells, threads)
    summary = []
    for n in (int(v) for v in cfg["n_grid"]):
        ok = [r for r in rows if r["n"] == n and not r["failed"]]
        entry = {"n": n, "rows_failed": sum(1 for r in rows
                                            if r["n"] == n and r["failed"])}
        if ok:
            entry["median_l1_distance"] = statistics.median(
                r["l1_distance"] for r in ok)
            if all("param_distance" in r for r in ok):
                entry["median_param_distance"] = statistics.median(
                    r["param_distance"] for r in ok)
        summary.append(entry)
    return ExperimentReport("consistency", cfg, rows, summary)


def cmd_divergence(config: dict | None = None, threads: int = 1) -> ExperimentReport:
    """Spike construction against the true model under a schedule that
    decays faster than exp(-n); also checks that the constrained MLE puts
    the free width at the bound."""
    cfg = _parse_common(config, {
        "n_grid": [10, 100, 1000, 5000], "replications": 20,
        "schedule": {"kind": "n_log_n"}})
    truth = _truth(cfg)
    sched = schedule_from_dict(cfg["schedule"])
    expect_win = bool(cfg.get("expect_spike_wins",
                              isinstance(sched, SuperExponentialSchedule)))
    reps = int(cfg["replications"])
    seed = int(cfg["seed"])
    background = truth.components[0]
    weights = (truth.weights[0], 1.0 - truth.weights[0])

    def run_cell(cell):
        n, rep = cell
        t0 = time.perf_counter()
        sample = draw_sample(truth, n, (seed, n, rep))
        log_cn = sched.log_value(n)
        spike = UniformComponent.from_log(float(sample.values[0]), log_cn)
        spike_params = MixtureParams(weights, (background, spike))
        ll_spike = log_likelihood(spike_params, sample).value
        ll_true = log_likelihood(truth, sample).value
        space = _constraint_space(truth, log_cn)
        fit = mle_profile_single(sample, background, weights, space)
        fitted = fit.params.components[1]
        at_boundary = fitted.log_hw == space.log_c_lower
        row = {"n": n, "replication": rep,
               "loglik_spike": ll_spike, "loglik_true": ll_true,
               "spike_wins": bool(ll_spike > ll_true),
               "loglik_mle": fit.loglik,
               "mle_log_half_width": fitted.log_hw,
               "log_c_n": log_cn,
               "mle_at_boundary": bool(at_boundary),
               "runtime": time.perf_counter() - t0}
        if expect_win:
            row["pass"] = bool(row["spike_wins"] and at_boundary)
        return row

    cells = [(int(n), r) for n in cfg["n_grid"] for r in range(reps)]
    rows = _map_cells(run_cell, cells, threads)
    summary = [{"n": n,
                "spike_win_rate": statistics.fmean(
                    1.0 if r["spike_wins"] else 0.0
                    for r in rows if r["n"] == n),
                "boundary_rate": statistics.fmean(
                    1.0 if r["mle_at_boundary"] else 0.0
                    for r in rows if r["n"] == n)}
               for n in (int(v) for v in cfg["n_grid"])]
    return ExperimentReport("divergence", cfg, rows, summary)


OKAMOTO_GRID = {
    "n": (10, 100, 1000, 10000),
    "p": (0.1, 0.3, 0.5, 0.7, 0.9),
    "delta": (0.01, 0.05, 0.1, 0.2),
}


def _verify_okamoto() -> list[dict]:
    # strictness is compared on the log scale: at the largest (n, delta)
    # both sides are far below the double floor
    rows = []
    for n in OKAMOTO_GRID["n"]:
        for p in OKAMOTO_GRID["p"]:
            for delta in OKAMOTO_GRID["delta"]:
                if n * delta < 1.0:
                    continue
                tail = binomial_tail_exact(n, p, delta)
                log_tail = binomial_tail_log_exact(n, p, delta)
                bound = okamoto_bound(n, delta)
                log_bound = -2.0 * n * delta * delta
                rows.append({"check": "okamoto", "n": n, "p": p,
                             "delta": delta, "tail": tail, "bound": bound,
                             "log_tail": log_tail, "log_bound": log_bound,
                             "pass": bool(log_tail < log_bound)})
    return rows


def _verify_covering(seed: int, cases: int = 100) -> list[dict]:
    rng = np.random.default_rng((seed, 314159))
    rows = []
    for case in range(cases):
        m = int(rng.integers(1, 4))
        edges = np.sort(rng.uniform(0.0, 1.0, size=2 * m))
        j0 = [(float(edges[2 * k]), float(edges[2 * k + 1])) for k in range(m)
              if edges[2 * k + 1] - edges[2 * k] > 1e-6]
        if not j0:
            continue
        c = float(rng.uniform(0.005, 0.3))
        cov = cover_support(j0, c)
        hull = j0[-1][1] - j0[0][0]
        count_ok = cov.count() <= hull / (2.0 * c) + len(j0)
        # coverage: dense probe of every source interval
        probes = np.concatenate([np.linspace(lo, hi, 50, endpoint=False)
                                 for lo, hi in j0])
        covered = np.zeros(probes.size, dtype=bool)
        for lo, hi in cov.pieces:
            covered |= (lo <= probes) & (probes < hi)
        # a window of length 2c inside one source interval is covered by
        # at most 3 of that source's own pieces
        hits_ok = True
        for s, (lo, hi) in enumerate(j0):
            if hi - lo <= 2.0 * c:
                continue
            own = [piece for piece, ps in zip(cov.pieces, cov.source_of)
                   if ps == s]
            for start in rng.uniform(lo, hi - 2.0 * c, size=20):
                touching = [(plo, phi) for plo, phi in own
                            if plo < start + 2.0 * c and phi > start]
                covers = all(any(plo <= t < phi for plo, phi in touching)
                             for t in np.linspace(start, start + 2.0 * c, 25,
                                                  endpoint=False))
                if len(touching) > 3 or not covers:
                    hits_ok = False
        rows.append({"check": "covering", "case": case, "pieces": cov.count(),
                     "source_intervals": len(j0), "c": c,
                     "pass": bool(count_ok and bool(covered.all()) and hits_ok)})
    return rows


def _verify_bounded_rj(truth: MixtureParams, cfg: dict, seed: int) -> list[dict]:
    n = int(cfg.get("occupancy_n", 10000))
    c0 = float(cfg.get("occupancy_c0", 0.01))
    trials = int(cfg.get("occupancy_trials", 200))
    report = small_support_occupancy(truth, c0, n, trials, seed)
    row = {"check": "bounded_rj", **report.to_dict(),
           "pass": bool(report.empirical_sup < report.bound)}
    return [row]


def cmd_verify(config: dict | None = None) -> ExperimentReport:
    """Run the selected structural verifiers: the binomial-tail bound, the
    covering construction, and the small-support occupancy bound."""
    cfg = _parse_common(config, {
        "checks": ["okamoto", "covering", "bounded_rj"]})
    truth = _truth(cfg)
    seed = int(cfg["seed"])
    rows: list[dict] = []
    for check in cfg["checks"]:
        if check == "okamoto":
            rows.extend(_verify_okamoto())
        elif check == "covering":
            rows.extend(_verify_covering(seed))
        elif check == "bounded_rj":
            rows.extend(_verify_bounded_rj(truth, cfg, seed))
        else:
            raise ValueError(f"unknown check {check!r}")
    summary = [{"check": c,
                "rows": sum(1 for r in rows if r["check"] == c),
                "failures": sum(1 for r in rows
                                if r["check"] == c and not r["pass"])}
               for c in cfg["checks"]]
    return ExperimentReport("verify", cfg, rows, summary)


def cmd_sample(config: dict | None = None) -> tuple:
    """Draw one seeded sample; returns (SampleSet, csv_text)."""
    cfg = _parse_common(config, {"n": 1000})
    truth = _truth(cfg)
    n = int(cfg["n"])
    seed = int(cfg["seed"])
    sample = draw_sample(truth, n, seed)
    lines = [f"# seed={seed} n={n} truth={truth.to_json()}", "value"]
    lines.extend(repr(float(v)) for v in sample.values)
    return sample, "\n".join(lines) + "\n"


def load_sample_csv(path) -> tuple:
    """Read a sample CSV written by cmd_sample; returns (values, seed)."""
    values, seed = [], None
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line == "value":
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if tok.startswith("seed="):
                        seed = int(tok[5:])
                continue
            values.append(float(line))
    return np.array(sorted(values)), seed


def cmd_fit(config: dict | None = None, sample_values=None) -> FitResult:
    """Fit one model: draws the configured sample unless raw values are
    passed in."""
    cfg = _parse_common(config, {"n": 200, "mode": "profile"})
    truth = _truth(cfg)
    sched = schedule_from_dict(cfg["schedule"])
    if sample_values is None:
        sample = draw_sample(truth, int(cfg["n"]), int(cfg["seed"]))
    else:
        from .sampling import SampleSet
        sample = SampleSet(np.sort(np.asarray(sample_values, dtype=float)),
                           int(cfg["seed"]), truth)
    space = _constraint_space(truth, sched.log_value(sample.n))
    return _fit_one(truth, sample, space, cfg)


# ---------------------------------------------------------------------------
# CSV writers


def write_report_csv(report: ExperimentReport, path) -> None:
    """Summary rows as CSV (deterministic float repr)."""
    rows = report.summary if report.summary else report.rows
    if not rows:
        raise ValueError("nothing to write")
    keys = sorted({k for r in rows for k in r})
    with open(path, "w") as f:
        f.write(",".join(keys) + "\n")
        for r in rows:
            f.write(",".join(_csv_cell(r.get(k)) for k in keys) + "\n")


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)

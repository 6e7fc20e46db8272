"""Domain types for finite mixtures of uniform densities.

A mixture component is uniform on the half-open interval
[center - half_width, center + half_width) with density height
1/(2*half_width) on its support.  The half-open convention makes the
density right-continuous and pins down a unique version, so pointwise
equality of densities is well defined.

Half-widths may be far below the smallest positive double (e.g. a lower
bound like exp(-n*log n) for n in the thousands).  Components therefore
carry an optional log-scale half-width: the linear `half_width` field is
then the underflowed value 0.0 and all height arithmetic goes through
`log_half_width`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

WEIGHT_TOL = 1e-12      # tolerance for the mixing-weight sum
INTEGRAL_TOL = 1e-12    # tolerance for the unit-integral check


@dataclass(frozen=True)
class UniformComponent:
    """One mixture component: uniform on [center - half_width, center + half_width)."""

    center: float
    half_width: float
    log_half_width: float | None = None

    def __post_init__(self):
        if self.log_half_width is None:
            if not self.half_width > 0.0:
                raise ValueError(f"half_width must be positive, got {self.half_width}")
        else:
            if not math.isfinite(self.log_half_width):
                raise ValueError("log_half_width must be finite")
            if self.half_width < 0.0:
                raise ValueError("half_width must be nonnegative")

    @classmethod
    def from_log(cls, center: float, log_half_width: float) -> "UniformComponent":
        """Build a component from a log-scale half-width (may underflow linearly)."""
        return cls(center, math.exp(log_half_width) if log_half_width > -745.0 else 0.0,
                   log_half_width)

    @property
    def log_hw(self) -> float:
        """Log of the half-width; exact even when the linear value underflows."""
        if self.log_half_width is not None:
            return self.log_half_width
        return math.log(self.half_width)

    @property
    def lower(self) -> float:
        return self.center - self.half_width

    @property
    def upper(self) -> float:
        return self.center + self.half_width

    @property
    def log_height(self) -> float:
        """log(1 / (2 * half_width))."""
        return -math.log(2.0) - self.log_hw

    def covers(self, x: float) -> bool:
        """Membership in [lower, upper); the center is always covered.

        The extra center clause only matters when the half-width is below
        the float resolution at `center`, where `center + half_width`
        rounds back onto `center` and the plain endpoint test would
        declare the interval empty.
        """
        return (self.lower <= x < self.upper) or (x == self.center)

    def to_dict(self) -> dict:
        d = {"center": self.center, "half_width": self.half_width}
        if self.log_half_width is not None:
            d["log_half_width"] = self.log_half_width
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "UniformComponent":
        return cls(float(d["center"]), float(d["half_width"]),
                   d.get("log_half_width"))


@dataclass(frozen=True)
class MixtureParams:
    """Full parameter point: mixing weights plus one uniform component each."""

    weights: tuple[float, ...]
    components: tuple[UniformComponent, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "components", tuple(self.components))
        if len(self.weights) != len(self.components) or len(self.weights) < 1:
            raise ValueError("weights and components must have equal length >= 1")
        if any(w < 0.0 for w in self.weights):
            raise ValueError("weights must be nonnegative")
        if abs(math.fsum(self.weights) - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights must sum to 1, got {math.fsum(self.weights)!r}")

    @property
    def n_components(self) -> int:
        return len(self.weights)

    def to_dict(self) -> dict:
        return {"weights": list(self.weights),
                "components": [c.to_dict() for c in self.components]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "MixtureParams":
        return cls(tuple(d["weights"]),
                   tuple(UniformComponent.from_dict(c) for c in d["components"]))

    @classmethod
    def from_json(cls, s: str) -> "MixtureParams":
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True)
class SupportBounds:
    """Hull of the mixture support: [l_min, l_max] with length = l_max - l_min."""

    l_min: float
    l_max: float
    length: float

    def __post_init__(self):
        if not self.l_min < self.l_max:
            raise ValueError("l_min must be < l_max")
        if not self.length > 0.0:
            raise ValueError("length must be positive")


@dataclass(frozen=True)
class ConstraintSpace:
    """A realized constrained parameter space.

    Half-widths are bounded below by `c_lower` and above by
    `half_width_cap`; centers must lie in `center_box`.  The lower bound
    may be below the double floor, in which case `c_lower` is the
    underflowed 0.0 and `log_c_lower` carries the exact value.
    """

    c_lower: float
    center_box: tuple[float, float]
    half_width_cap: float
    log_c_lower: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "center_box",
                           (float(self.center_box[0]), float(self.center_box[1])))
        if self.log_c_lower is None:
            if not self.c_lower > 0.0:
                raise ValueError("c_lower must be positive")
            object.__setattr__(self, "log_c_lower", math.log(self.c_lower))
        elif not math.isfinite(self.log_c_lower):
            raise ValueError("log_c_lower must be finite")
        if self.log_c_lower > math.log(self.half_width_cap):
            raise ValueError("c_lower must not exceed half_width_cap")
        if not self.center_box[0] <= self.center_box[1]:
            raise ValueError("center_box must be a nonempty interval")

    @classmethod
    def from_log(cls, log_c_lower: float, center_box: tuple[float, float],
                 half_width_cap: float) -> "ConstraintSpace":
        linear = math.exp(log_c_lower) if log_c_lower > -745.0 else 0.0
        return cls(linear, center_box, half_width_cap, log_c_lower)

    def to_dict(self) -> dict:
        return {"c_lower": self.c_lower, "log_c_lower": self.log_c_lower,
                "center_box": list(self.center_box),
                "half_width_cap": self.half_width_cap}

    @classmethod
    def from_dict(cls, d: dict) -> "ConstraintSpace":
        return cls(float(d["c_lower"]), tuple(d["center_box"]),
                   float(d["half_width_cap"]), d.get("log_c_lower"))


@dataclass(frozen=True)
class PiecewiseDensity:
    """Canonical step form of a mixture density.

    `heights[t]` is the density on [breakpoints[t], breakpoints[t+1]);
    the density is 0 outside [breakpoints[0], breakpoints[-1]).
    Canonical means: no adjacent intervals of equal height and no
    zero-height intervals at either end.
    """

    breakpoints: tuple[float, ...]
    heights: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "breakpoints", tuple(float(b) for b in self.breakpoints))
        object.__setattr__(self, "heights", tuple(float(h) for h in self.heights))
        if len(self.heights) != len(self.breakpoints) - 1:
            raise ValueError("need exactly one height per interval")
        if any(b1 >= b2 for b1, b2 in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if any(h < 0.0 for h in self.heights):
            raise ValueError("heights must be nonnegative")
        if any(h1 == h2 for h1, h2 in zip(self.heights, self.heights[1:])):
            raise ValueError("adjacent equal heights must be merged")
        if self.heights and (self.heights[0] == 0.0 or self.heights[-1] == 0.0):
            raise ValueError("leading/trailing zero-height intervals must be dropped")
        # 1e-12 at desk scale; the slack grows with height * |breakpoint|
        # because interval lengths of narrow components cancel catastrophically
        slack = max(INTEGRAL_TOL,
                    8.0 * 2.3e-16 * math.fsum(h * max(abs(b1), abs(b2), 1.0)
                                              for h, b1, b2 in
                                              zip(self.heights, self.breakpoints,
                                                  self.breakpoints[1:])))
        if abs(self.integral() - 1.0) > slack:
            raise ValueError(f"density must integrate to 1, got {self.integral()!r}")

    def integral(self) -> float:
        return math.fsum(h * (b2 - b1) for h, b1, b2 in
                         zip(self.heights, self.breakpoints, self.breakpoints[1:]))

    def positive_interval_count(self) -> int:
        return sum(1 for h in self.heights if h > 0.0)

    def at(self, x: float) -> float:
        """Evaluate the step function at x (half-open convention)."""
        bps = self.breakpoints
        if x < bps[0] or x >= bps[-1]:
            return 0.0
        # rightmost interval with breakpoints[t] <= x
        t = int(np.searchsorted(np.asarray(bps), x, side="right")) - 1
        return self.heights[t]

    def max_height(self) -> float:
        return max(self.heights)


# ---------------------------------------------------------------------------
# operations


def _linear_height(weight: float, comp: UniformComponent) -> float:
    """weight / (2 * half_width); inf when the width underflowed linearly."""
    if comp.half_width > 0.0:
        return weight / (2.0 * comp.half_width)
    return math.inf if weight > 0.0 else 0.0


def density_at(params: MixtureParams, x: float) -> float:
    """Mixture density at x under the half-open convention."""
    total = 0.0
    for w, comp in zip(params.weights, params.components):
        if comp.lower <= x < comp.upper or x == comp.center:
            total += _linear_height(w, comp)
    return total


def density_many(params: MixtureParams, xs: np.ndarray) -> np.ndarray:
    """Vectorized `density_at` over an array of points."""
    xs = np.asarray(xs, dtype=float)
    total = np.zeros_like(xs)
    for w, comp in zip(params.weights, params.components):
        cover = ((comp.lower <= xs) & (xs < comp.upper)) | (xs == comp.center)
        total += np.where(cover, _linear_height(w, comp), 0.0)
    return total


def to_piecewise(params: MixtureParams) -> PiecewiseDensity:
    """Canonical step-function form of the mixture density.

    Ignores zero-weight components.  Heights are accumulated in component
    order, the same order `density_at` uses, so evaluation of the result
    agrees with `density_at` exactly at every point.  The count of
    positive-height intervals never exceeds twice the component count,
    since the density changes value only at component endpoints.
    """
    active = [(w, c) for w, c in zip(params.weights, params.components) if w > 0.0]
    for _, comp in active:
        if not comp.lower < comp.upper:
            raise ValueError(
                "component width is below float resolution at its center; "
                "no step representation exists")
    cuts = sorted({e for _, c in active for e in (c.lower, c.upper)})
    breakpoints: list[float] = []
    heights: list[float] = []
    for lo, hi in zip(cuts, cuts[1:]):
        # component order fixed => bit-identical to density_at on [lo, hi)
        h = 0.0
        for w, comp in active:
            if comp.lower <= lo and comp.upper >= hi:
                h += w / (2.0 * comp.half_width)
        if heights and h == heights[-1]:
            breakpoints[-1] = hi  # merge equal-height neighbors
        else:
            if not breakpoints:
                breakpoints = [lo, hi]
            else:
                breakpoints.append(hi)
            heights.append(h)
    # strip zero-height ends (can appear when zero-weight gaps were merged)
    while heights and heights[0] == 0.0:
        heights.pop(0)
        breakpoints.pop(0)
    while heights and heights[-1] == 0.0:
        heights.pop()
        breakpoints.pop()
    return PiecewiseDensity(tuple(breakpoints), tuple(heights))


def support_bounds(params: MixtureParams) -> SupportBounds:
    """Hull [l_min, l_max] over all component supports (weights ignored)."""
    l_min = min(c.lower for c in params.components)
    l_max = max(c.upper for c in params.components)
    return SupportBounds(l_min, l_max, l_max - l_min)


def project_to_bounds(params: MixtureParams, bounds: SupportBounds) -> MixtureParams:
    """Replace components so every center is in [l_min, l_max] and every
    half-width is in (0, length], without decreasing the density anywhere
    on [l_min, l_max).

    Components already inside the box are returned unchanged.  A component
    overlapping the box is shrunk to the overlap (its height can only
    rise).  A component disjoint from the box contributes nothing on it,
    so it is relocated, width capped at `length`, to the admissible
    position nearest its original center.
    """
    new_comps = []
    for comp in params.components:
        lo, hi = comp.lower, comp.upper
        if lo >= bounds.l_min and hi <= bounds.l_max and comp.half_width <= bounds.length:
            new_comps.append(comp)
            continue
        clo, chi = max(lo, bounds.l_min), min(hi, bounds.l_max)
        if clo < chi:
            # shrink to the overlap: narrower support, higher height; nudge
            # by ulps so [lower, upper) really covers the whole overlap
            b = (chi - clo) / 2.0
            center = clo + b
            for _ in range(6):
                if center - b > clo:
                    center = math.nextafter(center, -math.inf)
                elif center + b < chi:
                    b = math.nextafter(b, math.inf)
                else:
                    break
            new_comps.append(UniformComponent(center, b))
            continue
        # disjoint (or degenerate overlap): relocate at capped width
        b = min(comp.half_width, bounds.length)
        inner_lo, inner_hi = bounds.l_min + b, bounds.l_max - b
        if inner_lo > inner_hi:
            # support wider than the box: any center between the crossover
            # points keeps the whole box covered
            inner_lo, inner_hi = inner_hi, inner_lo
        center = min(max(comp.center, inner_lo), inner_hi)
        new_comps.append(UniformComponent(center, b))
    return MixtureParams(params.weights, tuple(new_comps))


def in_constraint_space(params: MixtureParams, space: ConstraintSpace) -> bool:
    """True iff every half-width is in [c_lower, half_width_cap] and every
    center lies in the center box (all bounds inclusive)."""
    lo, hi = space.center_box
    for comp in params.components:
        if comp.half_width > 0.0 and space.c_lower > 0.0:
            if comp.half_width < space.c_lower:
                return False
        elif comp.log_hw < space.log_c_lower:
            return False
        if comp.half_width > space.half_width_cap:
            return False
        if not lo <= comp.center <= hi:
            return False
    return True


def small_component_count(params: MixtureParams, c0: float) -> int:
    """Number of components with half-width <= c0."""
    if not c0 > 0.0:
        raise ValueError("c0 must be positive")
    return sum(1 for c in params.components if c.half_width <= c0)


def small_support(params: MixtureParams, c0: float) -> list[tuple[float, float]]:
    """Union of the supports of positive-weight components with
    half-width <= c0, as disjoint sorted half-open intervals."""
    if not c0 > 0.0:
        raise ValueError("c0 must be positive")
    spans = sorted((c.lower, c.upper) for w, c in zip(params.weights, params.components)
                   if w > 0.0 and c.half_width <= c0)
    merged: list[tuple[float, float]] = []
    for lo, hi in spans:
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def interval_set_length(intervals: Sequence[tuple[float, float]]) -> float:
    return math.fsum(hi - lo for lo, hi in intervals)


def low_height_count(params: MixtureParams, n: int, c0: float) -> int:
    """Number of step intervals whose height stays at or below the cutoff
    M / (2 * c0 * exp(-n**(1/4))).

    With the positive heights sorted ascending this is the last index that
    still clears the cutoff (1-based), or 0 when even the lowest height
    exceeds it.  The comparison runs in log scale so the cutoff survives
    large n.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not c0 > 0.0:
        raise ValueError("c0 must be positive")
    heights = sorted(h for h in to_piecewise(params).heights if h > 0.0)
    m = params.n_components
    log_cutoff = math.log(m) - math.log(2.0) - (math.log(c0) - float(n) ** 0.25)
    return sum(1 for h in heights if math.log(h) <= log_cutoff)

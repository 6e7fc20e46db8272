"""Seeded i.i.d. sampling from uniform mixtures.

Sampling is inverse-transform on both stages (component choice, then the
position inside the component), driven by numpy's PCG64 generator, so a
fixed seed gives bit-identical output on every platform.  Parallel work
derives independent streams by seeding with an entropy tuple
(master_seed, *indices) instead of sharing generator state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import MixtureParams

Seed = int | tuple[int, ...]


@dataclass(frozen=True)
class SampleSet:
    """A sorted i.i.d. sample together with its provenance."""

    values: np.ndarray
    seed: Seed
    source: MixtureParams

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("values must be a nonempty 1-d array")
        if np.any(v[:-1] > v[1:]):
            raise ValueError("values must be sorted ascending")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return int(self.values.size)


def derive_rng(master_seed: int, *indices: int) -> np.random.Generator:
    """Independent stream for one task of a seeded parallel run."""
    return np.random.default_rng((int(master_seed),) + tuple(int(i) for i in indices))


def draw_sample(params: MixtureParams, n: int, seed: Seed) -> SampleSet:
    """Draw n i.i.d. points: pick a component by its weight, then a uniform
    position on that component's support.  Output is sorted."""
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    cum = np.cumsum(np.asarray(params.weights, dtype=float))
    cum[-1] = 1.0  # guard the last bin against rounding in the cumsum
    comp_idx = np.searchsorted(cum, rng.random(n), side="right")
    lows = np.array([c.lower for c in params.components])
    widths = np.array([c.upper - c.lower for c in params.components])
    x = lows[comp_idx] + rng.random(n) * widths[comp_idx]
    # rounding can land exactly on the open right endpoint; pull it inside
    hi = lows[comp_idx] + widths[comp_idx]
    on_edge = (x >= hi) & (widths[comp_idx] > 0.0)
    if np.any(on_edge):
        x[on_edge] = np.nextafter(hi[on_edge], lows[comp_idx][on_edge])
    x.sort()
    return SampleSet(x, seed, params)

import math

import numpy as np
import pytest

from unimix import (MixtureParams, SampleSet, UniformComponent,
                    count_elevated_plateaus, count_in, default_surface_axes,
                    density_at, expected_log_density, log_density_many,
                    log_likelihood, spike_competitor_loglik, surface_grid,
                    to_piecewise)

THETA = MixtureParams((0.6, 0.4), (UniformComponent(0.5, 0.5),
                                   UniformComponent(0.6, 0.2)))
UNIT = MixtureParams((1.0,), (UniformComponent(0.5, 0.5),))


def sample_of(values):
    return SampleSet(np.asarray(sorted(values), dtype=float), 0, THETA)


class TestLogLikelihood:
    def test_unit_uniform_is_zero(self):
        s = sample_of([0.1, 0.4, 0.9])
        assert log_likelihood(UNIT, s).value == 0.0

    def test_hand_value(self):
        s = sample_of([0.5, 0.9])
        assert log_likelihood(THETA, s).value == pytest.approx(-0.040822, abs=1e-6)

    def test_uncovered_point_gives_neg_inf(self):
        narrow = MixtureParams((1.0,), (UniformComponent(0.6, 0.2),))
        ll = log_likelihood(narrow, sample_of([0.9]))
        assert ll.value == -math.inf and ll.n == 1

    def test_matches_naive_summation(self):
        rng = np.random.default_rng(4)
        xs = rng.uniform(0.0, 1.0, 300)
        stable = float(np.sum(log_density_many(THETA, xs)))
        naive = math.fsum(math.log(density_at(THETA, x)) for x in xs)
        assert stable == pytest.approx(naive, abs=1e-9)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(5)
        xs = rng.uniform(0.0, 1.0, 500)
        a = float(np.sum(log_density_many(THETA, xs)))
        b = float(np.sum(log_density_many(THETA, np.sort(xs))))
        assert a == pytest.approx(b, abs=1e-9)

    def test_stable_path_matches_manual_logsumexp(self):
        # heights ~ e^705 force the log-sum-exp path
        spike = MixtureParams((0.4, 0.6), (UniformComponent.from_log(0.3, -705.0),
                                           UniformComponent(0.5, 0.5)))
        xs = np.array([0.3, 0.7])
        got = log_density_many(spike, xs)
        at_spike = np.logaddexp(math.log(0.4) - math.log(2.0) + 705.0,
                                math.log(0.6))
        assert got[0] == pytest.approx(at_spike, rel=1e-12)
        assert got[1] == pytest.approx(math.log(0.6), rel=1e-12)

    def test_sub_floor_spike_is_finite(self):
        n = 5000
        log_c = -n * math.log(n)
        xs = np.sort(np.random.default_rng(0).uniform(0, 1, n))
        spike = MixtureParams((0.4, 0.6),
                              (UniformComponent.from_log(xs[0], log_c),
                               UniformComponent(0.5, 0.5)))
        v = float(np.sum(log_density_many(spike, xs)))
        expect = (np.logaddexp(math.log(0.2) - log_c, math.log(0.6))
                  + (n - 1) * math.log(0.6))
        assert math.isfinite(v) and v == pytest.approx(expect, rel=1e-12)


class TestCountIn:
    S = sample_of([0.1, 0.2, 0.9])

    def test_examples(self):
        assert count_in([], self.S) == 0
        assert count_in([(0.15, 0.95)], self.S) == 2
        assert count_in([(0.0, 1.0)], self.S) == 3

    def test_half_open_convention(self):
        assert count_in([(0.1, 0.2)], self.S) == 1  # 0.2 excluded

    def test_additive_over_disjoint_sets(self):
        rng = np.random.default_rng(9)
        xs = np.sort(rng.uniform(0, 1, 200))
        s = SampleSet(xs, 0, THETA)
        v1 = [(0.0, 0.3), (0.4, 0.5)]
        v2 = [(0.3, 0.4), (0.7, 0.9)]
        assert count_in(v1 + v2, s) == count_in(v1, s) + count_in(v2, s)


class TestSpikeCompetitor:
    def test_reference_values(self):
        # closed form at d = 0.93, c0 = 1, unit background, spike weight 0.4
        expected = {10: 2.305, 50: 11.38, 100: 20.26, 500: 67.11, 1000: 104.7}
        for n, ref in expected.items():
            got = spike_competitor_loglik(1.0, 0.4, n, log_c=-(n ** 0.93))
            assert got == pytest.approx(ref, abs=5e-3 * max(1, ref))

    def test_linear_and_log_widths_agree(self):
        a = spike_competitor_loglik(1.0, 0.4, 10, c=1e-4)
        b = spike_competitor_loglik(1.0, 0.4, 10, log_c=math.log(1e-4))
        assert a == b

    def test_validation(self):
        with pytest.raises(ValueError):
            spike_competitor_loglik(1.0, 0.4, 10, c=-1.0)
        with pytest.raises(ValueError):
            spike_competitor_loglik(1.0, 0.4, 10)
        with pytest.raises(ValueError):
            spike_competitor_loglik(1.0, 1.4, 10, c=0.1)

    def test_matches_explicit_boundary_model(self):
        # one point inside the spike, the rest only under the background
        c = 1e-3
        xs = [0.05, 0.25, 0.65, 0.85]
        spike_center = 0.4
        model = MixtureParams((0.6, 0.4), (UniformComponent(0.5, 0.5),
                                           UniformComponent(spike_center, c)))
        s = sample_of(xs + [spike_center])
        direct = log_likelihood(model, s).value
        closed = spike_competitor_loglik(1.0, 0.4, 5, c=c)
        assert direct == pytest.approx(closed, abs=1e-9)


class TestExpectedLogDensity:
    def test_reference_rate(self):
        rate = expected_log_density(to_piecewise(THETA))
        assert rate == pytest.approx(0.11690, abs=1e-5)

    def test_uniform_zero(self):
        assert expected_log_density(to_piecewise(UNIT)) == 0.0


class TestSurface:
    def test_uncovered_cell_value(self):
        rng = np.random.default_rng(2)
        s = SampleSet(np.sort(rng.uniform(0.0, 0.5, 40)), 0, THETA)
        grid = surface_grid(0.4, UniformComponent(0.5, 0.5), s,
                            np.array([0.9]), np.array([0.01]))
        assert grid.values[0, 0] == pytest.approx(40 * math.log(0.6), rel=1e-12)

    def test_wide_component_constant_in_center(self):
        s = SampleSet(np.sort(np.random.default_rng(3).uniform(0, 1, 40)),
                      0, THETA)
        centers = np.linspace(0.45, 0.55, 7)
        grid = surface_grid(0.4, UniformComponent(0.5, 0.5), s, centers,
                            np.array([0.6, 0.8]))
        for j, b in enumerate((0.6, 0.8)):
            col = grid.values[:, j]
            covered = [abs(v - 40 * math.log(0.6 + 0.4 / (2 * b))) < 1e-9
                       for a, v in zip(centers, col)
                       if a - b <= 0.0 and a + b >= 1.0]
            assert covered and all(covered)

    def test_toy_plateau_count(self):
        s = sample_of([0.2, 0.5, 0.8])
        centers, widths = default_surface_axes(s, UniformComponent(0.5, 0.5),
                                               math.log(1e-6), n_centers=50,
                                               n_widths=5)
        grid = surface_grid(0.4, UniformComponent(0.5, 0.5), s, centers, widths)
        assert count_elevated_plateaus(grid.values[:, 0]) == 3

    def test_csv_format(self, tmp_path):
        s = sample_of([0.2, 0.8])
        grid = surface_grid(0.4, UniformComponent(0.6, 0.2), s,
                            np.array([0.1, 0.2]), np.array([0.05]))
        path = tmp_path / "surface.csv"
        grid.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == ",0.05"
        assert lines[1].startswith("0.1,") and "-inf" in lines[1]

    def test_plateau_counter_edges(self):
        assert count_elevated_plateaus(np.array([-math.inf, -math.inf])) == 0
        assert count_elevated_plateaus(np.array([1.0, 1.0])) == 0
        assert count_elevated_plateaus(np.array([1.0, 5.0, 1.0, 5.0])) == 2

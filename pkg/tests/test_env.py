"""Environment path generation, refinement and ladder times."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from corridorlab import (
    DeltaLadder,
    EnvironmentPath,
    delta_ladder,
    first_exit_density_two_sided,
    load_environment,
    refine_environment,
    sample_environment,
    save_environment,
)


class TestSampling:
    def test_grid_and_origin(self):
        path = sample_environment(7, 1.0, 0.5, 1.0)
        assert np.allclose(path.times, [0.0, 0.5, 1.0])
        assert path.values[0] == 0.0
        assert path.beta == 1.0

    def test_point_count(self):
        path = sample_environment(1, 1.0, 0.3, 0.0)
        assert path.values.size == math.ceil(1.0 / 0.3) + 1

    def test_deterministic(self):
        a = sample_environment(7, 2.0, 0.01, 1.0)
        b = sample_environment(7, 2.0, 0.01, 1.0)
        assert np.array_equal(a.values, b.values)

    def test_mirror_seed_convention(self):
        a = sample_environment(14, 2.0, 0.01, 0.5)
        b = sample_environment(15, 2.0, 0.01, 0.5)
        assert np.array_equal(a.values, -b.values)
        assert np.array_equal(a.mirror().values, b.values)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            sample_environment(1, -1.0, 0.1, 0.0)
        with pytest.raises(ValueError):
            sample_environment(1, 1.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            sample_environment(1, 1.0, 2.0, 0.0)

    def test_terminal_variance(self):
        """Var(W_1) = 1, sampled over 1e5 independent seeds (+-0.02)."""
        n = 100_000
        vals = np.fromiter(
            (sample_environment(2 * k, 1.0, 0.5, 0.0).values[-1] for k in range(n)),
            dtype=float,
            count=n,
        )
        assert abs(vals.var() - 1.0) < 0.02

    def test_diffusive_scaling(self):
        """Scaling times by c^2 and values by c matches direct generation in
        first/second moments (3 standard errors, matched ensemble sizes)."""
        c = 2.0
        n = 4000
        end_a = np.fromiter(
            (c * sample_environment(2 * k, 1.0, 0.01, 0.0).values[-1] for k in range(n)),
            dtype=float,
            count=n,
        )
        end_b = np.fromiter(
            (
                sample_environment(2 * (k + n), c * c * 1.0, c * c * 0.01, 0.0).values[-1]
                for k in range(n)
            ),
            dtype=float,
            count=n,
        )
        se_mean = math.sqrt(np.var(end_a) / n + np.var(end_b) / n)
        assert abs(end_a.mean() - end_b.mean()) < 3.0 * se_mean
        se_var = math.sqrt(2.0 * (c**4) / n) * math.sqrt(2.0)
        assert abs(end_a.var() - end_b.var()) < 3.0 * se_var

    def test_values_immutable(self):
        path = sample_environment(1, 1.0, 0.5, 0.0)
        with pytest.raises(ValueError):
            path.values[0] = 1.0


class TestRefinement:
    def test_factor_two_preserves_grid(self):
        path = sample_environment(5, 1.0, 0.5, 0.0)
        fine = refine_environment(path, 2)
        assert fine.values.size == 5
        assert np.array_equal(fine.values[::2], path.values)
        assert fine.dt == 0.25
        assert fine.dt_nominal == 0.5

    def test_factor_validation(self):
        path = sample_environment(5, 1.0, 0.5, 0.0)
        with pytest.raises(ValueError):
            refine_environment(path, 1)

    def test_dyadic_composition(self):
        """Two bisections equal one refinement by four, point for point."""
        path = sample_environment(11, 1.0, 0.25, 0.0)
        twice = refine_environment(refine_environment(path, 2), 2)
        once = refine_environment(path, 4)
        assert np.array_equal(twice.values, once.values)
        assert twice.dt == once.dt

    def test_oneshot_factor_three(self):
        path = sample_environment(3, 1.0, 0.5, 0.0)
        fine = refine_environment(path, 3)
        assert fine.values.size == 3 * 2 + 1
        assert np.array_equal(fine.values[::3], path.values)

    def test_refined_mirror_consistency(self):
        a = refine_environment(sample_environment(20, 1.0, 0.5, 0.0), 2)
        b = refine_environment(sample_environment(21, 1.0, 0.5, 0.0), 2)
        assert np.array_equal(a.values, -b.values)

    def test_substep_variance_sums_to_parent(self):
        """E[(v_mid - v_0)^2 + (v_1 - v_mid)^2] = dt over the bridge draw."""
        n = 10_000
        dt = 1.0
        acc = np.empty(n)
        for k in range(n):
            fine = refine_environment(sample_environment(2 * k, dt, dt, 0.0), 2)
            a = fine.values[1] - fine.values[0]
            b = fine.values[2] - fine.values[1]
            acc[k] = a * a + b * b
        se = acc.std(ddof=1) / math.sqrt(n)
        assert abs(acc.mean() - dt) < 3.0 * se


class TestDeltaLadder:
    def test_monotone_path_crossings(self):
        """Displacements 0.6 and 1.2 cross delta=0.5 at the first grid times;
        only times strictly below the horizon are counted."""
        path = EnvironmentPath(seed=0, beta=0.0, dt=0.5, dt_nominal=0.5,
                               values=np.array([0.0, 0.6, 1.2, 1.2]))
        lad = delta_ladder(path, 0.5, 1.5)
        assert np.allclose(lad.tau, [0.5, 1.0])
        assert lad.count_before == 2
        lad1 = delta_ladder(path, 0.5, 1.0)
        assert np.allclose(lad1.tau, [0.5])
        assert lad1.count_before == 1

    def test_rho_positive_increasing(self):
        path = sample_environment(2, 8.0, 1e-3, 0.0)
        lad = delta_ladder(path, 0.4, 8.0)
        assert np.all(np.diff(lad.tau) > 0)
        assert np.all(lad.rho > 0)
        assert lad.count_before == lad.tau.size

    def test_coarsening_in_delta(self):
        """Doubling delta can only reduce the crossing count."""
        for seed in range(0, 40, 2):
            path = sample_environment(seed, 4.0, 1e-3, 0.0)
            fine = delta_ladder(path, 0.3, 4.0)
            coarse = delta_ladder(path, 0.6, 4.0)
            assert coarse.count_before <= fine.count_before

    def test_unreliable_flag(self):
        path = sample_environment(3, 2.0, 0.05, 0.0)
        assert delta_ladder(path, 0.5, 2.0).unreliable
        assert not delta_ladder(path, 1.0, 2.0).unreliable

    def test_parameter_validation(self):
        path = sample_environment(3, 1.0, 0.1, 0.0)
        with pytest.raises(ValueError):
            delta_ladder(path, 0.0, 1.0)
        with pytest.raises(ValueError):
            delta_ladder(path, 0.5, 5.0)


class TestLadderStatistics:
    """Frozen-seed Monte Carlo: first-crossing times against the exact law.

    Grid crossing detection biases times upward by ~1.165 sqrt(dt)/delta
    relative, so dt is chosen to keep that bias inside the statistical
    window (see ladder design notes in the package docs).
    """

    N_PATHS = 4000
    DELTA = 1.0
    DT = 1e-4
    HORIZON = 8.0

    @pytest.fixture(scope="class")
    def first_crossings(self):
        taus = []
        for k in range(self.N_PATHS):
            path = sample_environment(2 * k, self.HORIZON, self.DT, 0.0)
            lad = delta_ladder(path, self.DELTA, self.HORIZON)
            if lad.tau.size:
                taus.append(lad.tau[0])
        return np.asarray(taus)

    def test_mean_matches_exit_expectation(self, first_crossings):
        """E tau = delta^2, within 2 standard errors."""
        assert first_crossings.size > 0.999 * self.N_PATHS
        mean = first_crossings.mean()
        se = first_crossings.std(ddof=1) / math.sqrt(first_crossings.size)
        assert abs(mean - self.DELTA**2) < 2.0 * se

    def test_distribution_matches_exit_density(self, first_crossings):
        """Kolmogorov-Smirnov against the exact two-sided exit density,
        below the 1% critical value."""
        ts = np.linspace(1e-4, self.HORIZON, 4001)
        pdf = first_exit_density_two_sided(self.DELTA, ts)
        cdf = np.concatenate([[0.0], np.cumsum((pdf[1:] + pdf[:-1]) / 2 * np.diff(ts))])
        cdf_at = np.interp(np.sort(first_crossings), ts, cdf)
        n = first_crossings.size
        emp_hi = np.arange(1, n + 1) / n
        emp_lo = np.arange(0, n) / n
        d_stat = max(np.max(np.abs(emp_hi - cdf_at)), np.max(np.abs(emp_lo - cdf_at)))
        critical_1pct = 1.63 / math.sqrt(n)
        assert d_stat < critical_1pct


class TestSerialization:
    def test_round_trip_bitwise(self, tmp_path):
        path = sample_environment(123, 2.0, 0.01, 0.7)
        file = tmp_path / "env.txt"
        save_environment(path, file)
        loaded = load_environment(file)
        assert loaded.seed == path.seed
        assert loaded.beta == path.beta
        assert loaded.dt == path.dt
        assert loaded.dt_nominal == path.dt_nominal
        assert np.array_equal(loaded.values, path.values)

    def test_header_required(self, tmp_path):
        file = tmp_path / "bad.txt"
        file.write_text("0 0\n1 1\n")
        with pytest.raises(ValueError):
            load_environment(file)

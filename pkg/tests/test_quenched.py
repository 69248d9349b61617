"""Quenched survival: transfer operator, start-point envelopes, splitting."""

import math

import numpy as np
import pytest
from scipy import stats

from corridorlab import (
    BandSpec,
    Corridor,
    SplittingConfig,
    band_survival_fixed,
    inf_start_survival,
    load_curve,
    log_band_survival_fixed,
    particle_splitting_survival,
    quenched_survival,
    refine_environment,
    sample_environment,
    save_curve,
    sup_start_survival,
)

UNIT = BandSpec(0.0, 1.0)


def unit_corridor(beta, start_window=(0.2, 0.8), terminal_window=None, band=UNIT):
    return Corridor(
        kind="constant_band",
        beta=beta,
        band=band,
        start_window=start_window,
        terminal_window=terminal_window,
    )


class TestCorridorValidation:
    def test_start_window_must_sit_inside_band(self):
        with pytest.raises(ValueError, match="a < a0 <= b0 < b"):
            unit_corridor(0.0, start_window=(0.0, 0.8))
        with pytest.raises(ValueError, match="a < a0 <= b0 < b"):
            unit_corridor(0.0, start_window=(-0.2, 0.5))

    def test_terminal_window_inside_closed_band(self):
        with pytest.raises(ValueError, match="terminal window"):
            unit_corridor(0.0, terminal_window=(0.5, 1.2))
        unit_corridor(0.0, terminal_window=(0.0, 1.0))  # closed-band edges allowed

    def test_scaled_band_alpha_range(self):
        for alpha in (0.0, 0.5, 0.7):
            with pytest.raises(ValueError, match="alpha"):
                Corridor(kind="scaled_band", beta=0.0, band=UNIT,
                         start_window=(0.2, 0.8), alpha=alpha)
        Corridor(kind="scaled_band", beta=0.0, band=UNIT, start_window=(0.2, 0.8), alpha=0.25)

    def test_functional_requires_ordered_boundaries(self):
        with pytest.raises(ValueError, match="f\\(s\\) < g\\(s\\)"):
            Corridor(kind="functional", beta=0.0, lower_fn=lambda s: 0.0,
                     upper_fn=lambda s: 1.0 - 1.5 * s, start_window=(0.2, 0.8))

    def test_beta_mismatch_detected(self):
        env = sample_environment(1, 1.0, 0.01, 0.5)
        with pytest.raises(ValueError, match="beta"):
            quenched_survival(env, unit_corridor(1.0), 0.5, 1.0)

    def test_corridor_id_stable(self):
        a = unit_corridor(0.5)
        b = unit_corridor(0.5)
        c = unit_corridor(0.6)
        assert a.corridor_id == b.corridor_id
        assert a.corridor_id != c.corridor_id


class TestTransferOperator:
    def test_frozen_band_matches_eigenseries(self):
        """beta = 0 reduces to the fixed band: q_t tracks the analytic value
        to 1e-6 absolute out to t = 10."""
        env = sample_environment(3, 10.0, 1e-3, 0.0)
        curve = quenched_survival(env, unit_corridor(0.0), 0.5, 10.0, record_points=20)
        for t, q in zip(curve.times, curve.log_survival):
            if t < 0.05:
                continue
            qa = -log_band_survival_fixed(0.5, UNIT, float(t))
            assert abs(q - qa) < 1e-6

    def test_start_outside_corridor_flags_infinite(self):
        env = sample_environment(3, 1.0, 1e-2, 0.0)
        curve = quenched_survival(env, unit_corridor(0.0), 1.5, 1.0)
        assert curve.all_absorbed

    def test_frame_invariance(self):
        """Shifting corridor and start by a common constant leaves q_t alone."""
        env = sample_environment(9, 3.0, 2e-3, 1.0)
        base = quenched_survival(env, unit_corridor(1.0), 0.45, 3.0,
                                 spatial_points=121, record_points=6)
        c = 5.0
        shifted_cor = unit_corridor(1.0, start_window=(0.2 + c, 0.8 + c),
                                    band=BandSpec(c, 1.0 + c))
        shifted = quenched_survival(env, shifted_cor, 0.45 + c, 3.0,
                                    spatial_points=121, record_points=6)
        assert np.max(np.abs(base.log_survival - shifted.log_survival)) < 1e-9

    def test_monotone_in_band_width(self):
        """A wider band can only raise survival, environmentwise."""
        env = sample_environment(17, 2.0, 2e-3, 1.0)
        narrow = quenched_survival(env, unit_corridor(1.0), 0.5, 2.0,
                                   spatial_points=101, record_points=8)
        wide_cor = unit_corridor(1.0, band=BandSpec(-0.1, 1.1), start_window=(0.2, 0.8))
        wide = quenched_survival(env, wide_cor, 0.5, 2.0,
                                 spatial_points=101, record_points=8)
        assert np.all(wide.log_survival <= narrow.log_survival + 1e-9)

    def test_pointwise_q_nondecreasing(self):
        for seed in (4, 8, 12):
            env = sample_environment(seed, 2.0, 2e-3, 0.8)
            curve = quenched_survival(env, unit_corridor(0.8), 0.5, 2.0,
                                      spatial_points=101, record_points=40)
            assert np.all(np.diff(curve.log_survival) >= -1e-12)

    def test_self_convergence_under_refinement(self):
        """Halving dt (bridge refinement) and doubling the spatial grid moves
        q(5) by less than 0.5%.

        The piecewise-linear centre-path model converges like ~sqrt(dt) with
        a prefactor growing in |beta| (about 1% per halving at beta = 1 and
        dt = 1e-3); at beta = 0.5 the documented 0.5% bound holds with
        margin.
        """
        env = sample_environment(31, 5.0, 1e-3, 0.5)
        coarse = quenched_survival(env, unit_corridor(0.5), 0.5, 5.0,
                                   spatial_points=101, record_points=4)
        fine_env = refine_environment(env, 2)
        fine = quenched_survival(fine_env, unit_corridor(0.5), 0.5, 5.0,
                                 spatial_points=202, record_points=4)
        q_c = coarse.log_survival[-1]
        q_f = fine.log_survival[-1]
        assert abs(q_c - q_f) / q_f < 0.005

    def test_horizon_must_be_covered(self):
        env = sample_environment(3, 1.0, 1e-2, 0.0)
        with pytest.raises(ValueError, match="horizon"):
            quenched_survival(env, unit_corridor(0.0), 0.5, 2.0)


class TestStartEnvelopes:
    def test_degenerate_window_equals_pointwise(self):
        env = sample_environment(5, 1.0, 2e-3, 0.7)
        cor = unit_corridor(0.7, start_window=(0.4, 0.4))
        env_curve = inf_start_survival(env, cor, 1.0, start_points=5,
                                       spatial_points=101, record_points=6)
        point = quenched_survival(env, cor, 0.4, 1.0,
                                  spatial_points=101, record_points=6)
        assert np.max(np.abs(env_curve.log_survival - point.log_survival)) < 1e-12

    def test_worst_start_attained_at_window_edge(self):
        """With a frozen band the infimum over [0.2, 0.8] sits at 0.2."""
        env = sample_environment(5, 4.0, 1e-3, 0.0)
        cor = unit_corridor(0.0)
        curve = inf_start_survival(env, cor, 4.0, start_points=17, record_points=8)
        for t, q in zip(curve.times, curve.log_survival):
            if t < 0.2:
                continue
            qa = -log_band_survival_fixed(0.2, UNIT, float(t))
            assert abs(q - qa) < 1e-6

    def test_worst_start_dominates_midpoint(self):
        for seed in (2, 6):
            env = sample_environment(seed, 2.0, 2e-3, 1.0)
            cor = unit_corridor(1.0)
            worst = inf_start_survival(env, cor, 2.0, start_points=9,
                                       spatial_points=101, record_points=10)
            mid = quenched_survival(env, cor, 0.5, 2.0,
                                    spatial_points=101, record_points=10)
            assert np.all(worst.log_survival >= mid.log_survival - 1e-12)

    def test_best_start_is_band_midpoint_when_frozen(self):
        env = sample_environment(5, 4.0, 1e-3, 0.0)
        cor = unit_corridor(0.0)
        curve = sup_start_survival(env, cor, 4.0, start_points=17, record_points=8)
        for t, q in zip(curve.times, curve.log_survival):
            if t < 0.2:
                continue
            qa = -log_band_survival_fixed(0.5, UNIT, float(t))
            assert abs(q - qa) < 1e-6

    def test_envelope_ordering_and_gap_decay(self):
        """Best-start q stays below worst-start q, and the normalized gap
        shrinks with the horizon (both normalize to the same rate)."""
        env = sample_environment(13, 20.0, 2e-3, 1.0)
        cor = unit_corridor(1.0, terminal_window=(0.2, 0.8))
        worst = inf_start_survival(env, cor, 20.0, start_points=9,
                                   spatial_points=101, record_points=40)
        best = sup_start_survival(env, cor, 20.0, start_points=9,
                                  spatial_points=101, record_points=40)
        assert np.all(best.log_survival <= worst.log_survival + 1e-9)
        gap5 = (worst.value_at(5.0) - best.value_at(5.0)) / 5.0
        gap20 = (worst.value_at(20.0) - best.value_at(20.0)) / 20.0
        assert gap20 <= gap5 / 2.0


class TestParticleSplitting:
    def test_config_validation(self):
        with pytest.raises(ValueError):
            SplittingConfig(n_particles=50)
        with pytest.raises(ValueError):
            SplittingConfig(resample_period=0.0)

    def test_frozen_band_within_three_sigma(self):
        env = sample_environment(21, 3.0, 5e-3, 0.0)
        cfg = SplittingConfig(n_particles=4000, resample_period=0.5, seed=11)
        curve = particle_splitting_survival(env, unit_corridor(0.0), 0.5, 3.0, cfg,
                                            record_points=6)
        q_true = -math.log(band_survival_fixed(0.5, UNIT, 3.0))
        assert abs(curve.log_survival[-1] - q_true) < 3.0 * curve.stderr[-1]

    def test_bridge_thinning_reduces_coarse_grid_bias(self):
        """At dt = 0.05 the unthinned walker misses intra-step exits; the
        thinned estimate lands closer to the analytic value."""
        env = sample_environment(22, 3.0, 0.05, 0.0)
        q_true = -math.log(band_survival_fixed(0.5, UNIT, 3.0))
        on = particle_splitting_survival(
            env, unit_corridor(0.0), 0.5, 3.0,
            SplittingConfig(n_particles=20_000, resample_period=0.5, seed=3), record_points=4,
        )
        off = particle_splitting_survival(
            env, unit_corridor(0.0), 0.5, 3.0,
            SplittingConfig(n_particles=20_000, resample_period=0.5, seed=3,
                            bridge_thinning=False), record_points=4,
        )
        assert abs(on.log_survival[-1] - q_true) < abs(off.log_survival[-1] - q_true)
        assert off.log_survival[-1] < q_true  # unthinned walkers survive too much

    def test_variance_halves_with_particle_doubling(self):
        """F-test at 5% on replicated runs with N and 2N particles."""
        env = sample_environment(23, 2.0, 5e-3, 0.0)
        reps = 30

        def run(n, seed):
            cfg = SplittingConfig(n_particles=n, resample_period=0.5, seed=seed)
            return particle_splitting_survival(env, unit_corridor(0.0), 0.5, 2.0, cfg,
                                               record_points=2).log_survival[-1]

        small = np.array([run(400, 100 + r) for r in range(reps)])
        large = np.array([run(800, 500 + r) for r in range(reps)])
        ratio = small.var(ddof=1) / (2.0 * large.var(ddof=1))
        lo = stats.f.ppf(0.025, reps - 1, reps - 1)
        hi = stats.f.ppf(0.975, reps - 1, reps - 1)
        assert lo < ratio < hi

    def test_all_particles_dead_truncates(self):
        env = sample_environment(2, 4.0, 1e-2, 0.0)
        tight = Corridor(kind="constant_band", beta=0.0, band=BandSpec(0.45, 0.55),
                         start_window=(0.49, 0.51))
        cfg = SplittingConfig(n_particles=100, resample_period=0.5, seed=1)
        curve = particle_splitting_survival(env, tight, 0.5, 4.0, cfg, record_points=8)
        assert curve.truncated_at is not None
        assert curve.times.size < 8

    def test_transfer_and_splitting_agree(self):
        env = sample_environment(40, 2.0, 5e-3, 1.0)
        cor = unit_corridor(1.0)
        det = quenched_survival(env, cor, 0.5, 2.0, spatial_points=121, record_points=4)
        cfg = SplittingConfig(n_particles=6000, resample_period=0.25, seed=7)
        sto = particle_splitting_survival(env, cor, 0.5, 2.0, cfg, record_points=4)
        assert abs(det.log_survival[-1] - sto.log_survival[-1]) < 3.0 * sto.stderr[-1]


class TestCurveSerialization:
    def test_round_trip(self, tmp_path):
        env = sample_environment(5, 1.0, 1e-2, 0.5)
        curve = quenched_survival(env, unit_corridor(0.5), 0.5, 1.0,
                                  spatial_points=64, record_points=10)
        file = tmp_path / "curve.csv"
        save_curve(curve, file)
        loaded = load_curve(file)
        assert np.array_equal(loaded.times, curve.times)
        assert np.array_equal(loaded.log_survival, curve.log_survival)
        assert loaded.variant == curve.variant
        assert loaded.corridor_id == curve.corridor_id
        assert loaded.band_width == curve.band_width

    def test_round_trip_with_stderr(self, tmp_path):
        env = sample_environment(5, 1.0, 1e-2, 0.0)
        cfg = SplittingConfig(n_particles=200, resample_period=0.5, seed=2)
        curve = particle_splitting_survival(env, unit_corridor(0.0), 0.5, 1.0, cfg,
                                            record_points=5)
        file = tmp_path / "curve.csv"
        save_curve(curve, file)
        loaded = load_curve(file)
        assert np.array_equal(loaded.stderr, curve.stderr)

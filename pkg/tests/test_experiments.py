"""Scenario runners: scaled bands, functional corridors, annealing, tails."""

import math

import numpy as np
import pytest

from corridorlab import (
    GAMMA_ZERO,
    BandSpec,
    Corridor,
    adaptive_simpson,
    annealed_comparison,
    functional_survival,
    quenched_survival,
    sample_environment,
    small_deviation_run,
    tail_diagnostic,
    functional_corridor_run,
)

UNIT = BandSpec(0.0, 1.0)


class TestAdaptiveSimpson:
    def test_known_integrals(self):
        val = adaptive_simpson(lambda s: 1.0 / (1.0 + 0.5 * s) ** 2, 0.0, 1.0, 1e-10)
        assert abs(val - 2.0 / 3.0) < 1e-9
        val = adaptive_simpson(math.exp, 0.0, 1.0, 1e-10)
        assert abs(val - (math.e - 1.0)) < 1e-9
        val = adaptive_simpson(lambda s: math.sin(10 * s), 0.0, math.pi, 1e-9)
        assert abs(val - (1.0 - math.cos(10 * math.pi)) / 10.0) < 1e-7


class TestSmallDeviation:
    def test_alpha_range_enforced(self):
        for alpha in (0.0, 0.5, -0.1):
            with pytest.raises(ValueError, match="alpha"):
                small_deviation_run(alpha, UNIT, 0.0, [10.0], 1)

    def test_tiny_alpha_recovers_unscaled_rate(self):
        """alpha -> 0 is continuous: at alpha = 0.01 the plateau sits within
        5% of the fixed-band rate."""
        res = small_deviation_run(0.01, UNIT, 0.0, [50.0, 100.0, 200.0, 400.0], 1)
        assert res.relative_error < 0.05

    def test_frozen_band_plateau_at_large_horizon(self):
        """beta = 0, alpha = 1/4: the normalized rate reaches pi^2/2 within
        5% by t = 1e4 (the scaling-reduction oracle)."""
        res = small_deviation_run(0.25, UNIT, 0.0, [1e3, 2.5e3, 5e3, 1e4], 1)
        assert abs(res.predicted_rate - GAMMA_ZERO) < 1e-12
        assert res.relative_error < 0.05

    def test_scaling_reduction_is_exact_for_frozen_band(self):
        """The scaled problem at horizon t equals the unit problem at
        t^(1-2*alpha) after rescaling; with beta=0 both are analytic and the
        normalized values match to float precision."""
        alpha, t = 0.25, 81.0
        res = small_deviation_run(alpha, UNIT, 0.0, [t], 1)
        t_eff = t ** (1.0 - 2.0 * alpha)
        from corridorlab import log_band_survival_fixed

        q_unit = -log_band_survival_fixed(0.5, UNIT, t_eff)
        assert abs(res.observed_rate - q_unit / t_eff) < 1e-12

    def test_scaling_reduction_matched_seed_moving_corridor(self):
        """With t^alpha a power of two the scaled run is an exact binary
        rescaling of a unit-band run on the same seed."""
        alpha, t = 0.25, 16.0  # t^alpha = 2
        beta = 1.0
        res = small_deviation_run(alpha, UNIT, beta, [t], 1,
                                  predicted_gamma=11.0, master_seed=5,
                                  base_dt=2e-3, spatial_points=101)
        from corridorlab.seeding import seed_schedule

        seed = seed_schedule(5, [(beta, 0)])[0]
        c = t**alpha
        env = sample_environment(seed, t ** (1.0 - 2.0 * alpha), 2e-3, beta)
        cor = Corridor(kind="constant_band", beta=beta, band=UNIT,
                       start_window=(0.5, 0.5))
        curve = quenched_survival(env, cor, 0.5, env.horizon,
                                  spatial_points=101, record_points=8)
        q_unit = curve.log_survival[-1]
        assert abs(res.observed_rate - q_unit / t ** (1.0 - 2.0 * alpha)) < 1e-9

    def test_requires_gamma_reference_for_moving_corridor(self):
        with pytest.raises(ValueError, match="predicted_gamma"):
            small_deviation_run(0.25, UNIT, 1.0, [10.0], 2)


class TestFunctionalCorridor:
    def test_constant_boundaries_reduce_to_fixed_engine(self):
        """f = 0, g = 1 must reproduce the constant-band sweep step for step."""
        env = sample_environment(19, 2.0, 2e-3, 1.0)
        fcor = Corridor(kind="functional", beta=1.0, lower_fn=lambda s: 0.0,
                        upper_fn=lambda s: 1.0, start_window=(0.2, 0.8))
        ccor = Corridor(kind="constant_band", beta=1.0, band=UNIT,
                        start_window=(0.2, 0.8))
        fun = functional_survival(env, fcor, 0.5, 2.0, spatial_points=101,
                                  record_points=8)
        fixed = quenched_survival(env, ccor, 0.5, 2.0, spatial_points=101,
                                  record_points=8)
        assert np.max(np.abs(fun.log_survival - fixed.log_survival)) < 1e-9

    def test_predicted_rate_integral(self):
        res = functional_corridor_run(
            lambda s: 0.0, lambda s: 1.0 + 0.5 * s, beta=0.0,
            horizon_grid=[10.0], ensemble_size=1, env_dt=5e-3, spatial_points=101,
        )
        assert abs(res.parameters["rate_integral"] - 2.0 / 3.0) < 1e-8
        assert abs(res.predicted_rate - GAMMA_ZERO * 2.0 / 3.0) < 1e-7

    def test_frozen_band_widening_rate(self):
        """f = 0, g = 1 + s/2 at beta = 0: observed within 5% of the
        predicted (pi^2/2) * 2/3 by t = 50."""
        res = functional_corridor_run(
            lambda s: 0.0, lambda s: 1.0 + 0.5 * s, beta=0.0,
            horizon_grid=[12.5, 25.0, 50.0], ensemble_size=1,
            env_dt=2e-3, spatial_points=151,
        )
        assert res.relative_error < 0.05

    def test_wider_upper_boundary_lowers_rate(self):
        """Pointwise widening can only slow the decay (same environment)."""
        common = dict(beta=1.0, horizon_grid=[6.0], ensemble_size=2,
                      predicted_gamma=11.0, master_seed=3, env_dt=5e-3,
                      spatial_points=101)
        narrow = functional_corridor_run(lambda s: 0.0, lambda s: 1.0 + 0.25 * s, **common)
        wide = functional_corridor_run(lambda s: 0.0, lambda s: 1.0 + 0.75 * s, **common)
        assert wide.observed_rate < narrow.observed_rate

    def test_boundary_order_enforced(self):
        with pytest.raises(ValueError, match="f\\(s\\) < g\\(s\\)"):
            functional_corridor_run(lambda s: 0.0, lambda s: 0.5 - s, beta=0.0,
                                    horizon_grid=[5.0], ensemble_size=1)


class TestAnnealed:
    def test_frozen_band_is_exact(self):
        rep = annealed_comparison(BandSpec(-0.5, 0.5), 0.0, 3.0, 10)
        assert rep.relative_error < 1e-6
        assert rep.within_3se

    def test_moving_corridor_matches_rescaled_time(self):
        """Ensemble mean of quenched survival vs the fixed band run at
        (1+beta^2) t, within 3 standard errors (frozen seed)."""
        rep = annealed_comparison(BandSpec(-0.5, 0.5), 1.0, 2.0, 150,
                                  master_seed=7, env_dt=2e-4, spatial_points=101)
        assert rep.within_3se
        assert rep.jensen_positive

    def test_jensen_gap_positive(self):
        rep = annealed_comparison(BandSpec(-0.5, 0.5), 1.0, 1.5, 100,
                                  master_seed=11, env_dt=5e-4, spatial_points=101)
        assert rep.jensen_gap > 0.0


class TestTailDiagnostic:
    def test_parameter_validation(self):
        cor = Corridor(kind="constant_band", beta=1.0, band=UNIT, start_window=(0.2, 0.8))
        with pytest.raises(ValueError, match="q_exponent"):
            tail_diagnostic(1.0, cor, 1.0, 1000)
        with pytest.raises(ValueError, match="ensemble_size"):
            tail_diagnostic(1.0, cor, 1.5, 100)

    def test_frozen_band_all_products_zero(self):
        """Without environment randomness the worst-start value is a constant
        below every threshold, so all exceedance products vanish."""
        band = BandSpec(0.0, 2.0)
        cor = Corridor(kind="constant_band", beta=0.0, band=band, start_window=(0.4, 1.6))
        rep = tail_diagnostic(1.0, cor, 1.5, 1000, env_dt=1e-2, spatial_points=64,
                              start_points=3)
        assert all(v == 0.0 for v in rep.exceedance_products.values())
        assert rep.passed
        assert all(se < 1e-12 for (_, _, se) in rep.moments)

    def test_moving_corridor_trend(self):
        band = BandSpec(0.0, 1.8)
        cor = Corridor(kind="constant_band", beta=1.0, band=band,
                       start_window=(0.4, 1.4))
        rep = tail_diagnostic(2.0, cor, 1.5, 1000, master_seed=13,
                              env_dt=5e-3, spatial_points=101, start_points=5)
        assert rep.passed
        mean, se = rep.moments[0][1], rep.moments[0][2]
        assert se < 0.05 * mean

"""Survival of Brownian motion in a randomly moving corridor.

A particle B must stay inside a corridor [a + beta W_s, b + beta W_s] whose
centre follows an independent Brownian path W.  Conditional on one
realization of W, the survival probability decays exponentially; the decay
constant, normalized by the squared corridor width, defines gamma(beta).
This package computes quenched survival deterministically (transfer
operator) and stochastically (particle splitting), extracts gamma, and
verifies its claimed properties: the classical value at beta = 0, the
annealed lower bound, the cap at beta = 1, evenness, convexity, strict
growth, width scaling, subadditivity, the shrinking-band normalization,
functional corridors and moment/tail bounds.
"""

from .env import (
    DeltaLadder,
    EnvironmentPath,
    delta_ladder,
    load_environment,
    refine_environment,
    sample_environment,
    save_environment,
)
from .kernels import (
    DEFAULT_SERIES,
    BandSpec,
    SeriesConfig,
    SeriesConvergenceError,
    absorbing_band_density,
    band_survival_fixed,
    band_survival_windowed,
    bridge_band_survival,
    first_exit_density_two_sided,
    log_band_survival_fixed,
    tilted_propagator,
)
from .quenched import (
    Corridor,
    SplittingConfig,
    SurvivalCurve,
    functional_survival,
    inf_start_survival,
    load_curve,
    particle_splitting_survival,
    quenched_survival,
    save_curve,
    sup_start_survival,
)
from .rates import (
    GAMMA_ZERO,
    GammaCurve,
    PropertyReport,
    RateEstimate,
    SubadditivityReport,
    WidthScalingReport,
    extract_rate,
    gamma_sweep,
    property_report,
    read_gamma_curve,
    subadditivity_audit,
    sweep_curves,
    width_scaling_check,
    write_gamma_curve,
)
from .experiments import (
    AnnealedReport,
    ScenarioResult,
    TailReport,
    adaptive_simpson,
    annealed_comparison,
    functional_corridor_run,
    small_deviation_run,
    tail_diagnostic,
)
from .seeding import seed_schedule

__version__ = "0.1.0"

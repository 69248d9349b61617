"""Quenched survival for one fixed environment realization.

The corridor [a + beta W_s, b + beta W_s] is frozen by conditioning on the
environment path W.  Inside each environment grid step, beta W is replaced
by its linear interpolant; a frame change then leaves a *fixed* band with a
constant drift, which the kernels module handles exactly.  The quenched
survival probability is computed two independent ways:

* a deterministic transfer-operator sweep: a discretized sub-density on a
  midpoint grid over the open band is pushed through one tilted kernel per
  step, renormalizing each step and accumulating the log of retained mass
  (so q = -ln p is exact arithmetic up to ~1e4 while p itself would
  underflow long before);

* a sequential Monte Carlo particle system with multinomial resampling and
  per-step Brownian-bridge thinning, an unbiased estimator used as an
  independent cross-check of the sweep.

Mass integrals use the midpoint rule with a one-sided endpoint correction
(the density vanishes at the absorbing walls, so the wall derivative is
estimated from the first interior cell); this upgrades the quadrature from
O(h^2) to O(h^4) and is what makes the beta=0 sweep track the analytic
eigenseries to ~1e-10.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .env import EnvironmentPath
from .kernels import (
    DEFAULT_SERIES,
    BandSpec,
    SeriesConfig,
    absorbing_band_density,
)

__all__ = [
    "Corridor",
    "SurvivalCurve",
    "SplittingConfig",
    "quenched_survival",
    "inf_start_survival",
    "sup_start_survival",
    "functional_survival",
    "particle_splitting_survival",
    "save_curve",
    "load_curve",
]

_BASIC_RELATIONSHIP = (
    "corridor windows must satisfy a < a0 <= b0 < b (start window strictly "
    "inside the open band) and a <= a' < b' <= b (terminal window inside the "
    "closed band)"
)


@dataclass(frozen=True)
class Corridor:
    """Boundary specification for the moving corridor.

    kind selects one of three families:
      constant_band  -- [a + beta W_s, b + beta W_s]
      scaled_band    -- [a t^alpha + beta W_s, b t^alpha + beta W_s], used by
                        the shrinking-normalization scenario; alpha must lie
                        strictly inside (0, 1/2)
      functional     -- [f(s/t) + beta W_s, g(s/t) + beta W_s] with f < g
                        continuous on [0, 1]

    start_window is the interval of admissible starting points at time 0;
    terminal_window, when set, restricts the endpoint at the horizon.
    beta duplicates the environment's coupling for cross-validation.
    """

    kind: str
    beta: float
    band: Optional[BandSpec] = None
    start_window: tuple = (0.0, 0.0)
    terminal_window: Optional[tuple] = None
    alpha: Optional[float] = None
    lower_fn: Optional[Callable[[float], float]] = None
    upper_fn: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if self.kind not in ("constant_band", "scaled_band", "functional"):
            raise ValueError(f"unknown corridor kind {self.kind!r}")
        a0, b0 = self.start_window
        if self.kind in ("constant_band", "scaled_band"):
            if self.band is None:
                raise ValueError(f"{self.kind} corridor requires a band")
            a, b = self.band.lower, self.band.upper
            if not (a < a0 <= b0 < b):
                raise ValueError(_BASIC_RELATIONSHIP + f"; got start window [{a0}, {b0}] in band [{a}, {b}]")
            if self.terminal_window is not None:
                ap, bp = self.terminal_window
                if not (a - 1e-12 <= ap < bp <= b + 1e-12):
                    raise ValueError(
                        _BASIC_RELATIONSHIP + f"; got terminal window [{ap}, {bp}] in band [{a}, {b}]"
                    )
        if self.kind == "scaled_band":
            if self.alpha is None or not (0.0 < self.alpha < 0.5):
                raise ValueError(
                    "alpha must lie strictly inside (0, 1/2); the shrinking-band "
                    "normalization t^(1-2 alpha) is only defined there"
                )
        if self.kind == "functional":
            if self.lower_fn is None or self.upper_fn is None:
                raise ValueError("functional corridor requires lower and upper boundary functions")
            s = np.linspace(0.0, 1.0, 1001)
            f = np.asarray([self.lower_fn(v) for v in s], dtype=float)
            g = np.asarray([self.upper_fn(v) for v in s], dtype=float)
            if not np.all(f < g):
                raise ValueError("boundary functions must satisfy f(s) < g(s) on all of [0, 1]")
            if not (f[0] < a0 <= b0 < g[0]):
                raise ValueError(
                    f"start window [{a0}, {b0}] must lie strictly inside the initial "
                    f"opening (f(0), g(0)) = ({f[0]}, {g[0]})"
                )
            if self.terminal_window is not None:
                ap, bp = self.terminal_window
                if not (f[-1] - 1e-12 <= ap < bp <= g[-1] + 1e-12):
                    raise ValueError(
                        f"terminal window [{ap}, {bp}] must lie inside the final "
                        f"opening [f(1), g(1)] = [{f[-1]}, {g[-1]}]"
                    )

    @property
    def width(self) -> float:
        if self.band is None:
            raise ValueError("width is only defined for band corridors")
        return self.band.width

    @property
    def corridor_id(self) -> str:
        h = hashlib.blake2b(digest_size=6)
        h.update(self.kind.encode())
        h.update(struct.pack("<d", self.beta))
        h.update(struct.pack("<dd", *self.start_window))
        if self.terminal_window is not None:
            h.update(struct.pack("<dd", *self.terminal_window))
        if self.band is not None:
            h.update(struct.pack("<dd", self.band.lower, self.band.upper))
        if self.alpha is not None:
            h.update(struct.pack("<d", self.alpha))
        if self.lower_fn is not None:
            s = np.linspace(0.0, 1.0, 129)
            h.update(np.asarray([self.lower_fn(v) for v in s]).tobytes())
            h.update(np.asarray([self.upper_fn(v) for v in s]).tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class SurvivalCurve:
    """q_t = -ln p_t on a time grid for one environment and corridor."""

    times: np.ndarray
    log_survival: np.ndarray
    variant: str
    corridor_id: str
    environment_id: str
    band_width: float
    stderr: Optional[np.ndarray] = None
    start: Optional[float] = None
    truncated_at: Optional[float] = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        q = np.asarray(self.log_survival, dtype=float)
        if t.shape != q.shape:
            raise ValueError("times and log_survival must have matching shapes")
        t.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "log_survival", q)
        if self.stderr is not None:
            se = np.asarray(self.stderr, dtype=float)
            se.setflags(write=False)
            object.__setattr__(self, "stderr", se)

    def value_at(self, t) -> np.ndarray:
        return np.interp(t, self.times, self.log_survival)

    @property
    def all_absorbed(self) -> bool:
        return bool(np.all(np.isinf(self.log_survival)))


@dataclass(frozen=True)
class SplittingConfig:
    """Particle-splitting (sequential Monte Carlo) parameters."""

    n_particles: int = 2000
    resample_period: float = 0.5
    seed: int = 0
    bridge_thinning: bool = True

    def __post_init__(self):
        if self.n_particles < 100:
            raise ValueError("n_particles must be at least 100")
        if self.resample_period <= 0.0:
            raise ValueError("resample_period must be positive")


_DOMAIN_SPLIT = 0x53504C54


def _record_steps(n_steps: int, record_points: int) -> np.ndarray:
    """Indices (1-based step counts) at which q is recorded; always ends at n_steps."""
    if record_points >= n_steps:
        return np.arange(1, n_steps + 1)
    ks = np.unique(np.round(np.linspace(1, n_steps, record_points)).astype(int))
    return ks


def _window_weights(grid: np.ndarray, h: float, window, snap: bool, band: BandSpec) -> np.ndarray:
    """Cell-overlap quadrature weights for integrating over a terminal window."""
    lo, hi = float(window[0]), float(window[1])
    if snap:
        lo = band.lower + round((lo - band.lower) / h) * h
        hi = band.lower + round((hi - band.lower) / h) * h
    left = np.maximum(grid - 0.5 * h, lo)
    right = np.minimum(grid + 0.5 * h, hi)
    return np.clip(right - left, 0.0, h)


def _corrected_mass(F: np.ndarray, h: float) -> np.ndarray:
    """Midpoint-rule mass with the vanishing-wall endpoint correction (rows of F)."""
    return h * F.sum(axis=1) - (h / 12.0) * (F[:, 0] + F[:, -1])


def _masked_tilt(density: np.ndarray, exponent: np.ndarray) -> np.ndarray:
    """density * exp(exponent) evaluated only where density > 0.

    Where the killed density has underflowed to zero the tilt exponent may
    be arbitrarily large; on the support of the density the exponent is
    automatically bounded (|x - y| is capped by the Gaussian underflow
    radius), so masking removes the 0 * inf hazard entirely.
    """
    out = np.zeros(np.broadcast(density, exponent).shape)
    mask = density > 0.0
    expo = np.broadcast_to(exponent, out.shape)
    dens = np.broadcast_to(density, out.shape)
    out[mask] = dens[mask] * np.exp(expo[mask])
    return out


def transfer_survival(
    env: EnvironmentPath,
    band: BandSpec,
    starts,
    horizon: float,
    *,
    spatial_points: int = 201,
    series_cfg: SeriesConfig = DEFAULT_SERIES,
    record_points: int = 200,
    terminal_window=None,
    snap_window: bool = False,
):
    """Transfer-operator sweep for a constant-width moving band.

    Propagates a killed sub-density from each start point through one tilted
    kernel per environment step.  Returns (times, Q) where Q[i, r] is
    q = -ln p for start i at record time r, including the terminal-window
    restriction when one is given.

    The per-step cost is one (starts x M) @ (M x M) product; the driftless
    kernel matrix is built once and the per-step drift enters through
    rank-one Cameron-Martin factors.
    """
    if spatial_points < 32:
        raise ValueError("spatial_points must be at least 32")
    if not env.covers(horizon):
        raise ValueError(f"environment horizon {env.horizon} does not cover {horizon}")
    starts = np.atleast_1d(np.asarray(starts, dtype=float))
    dt = env.dt
    n_steps = int(round(horizon / dt))
    if abs(n_steps * dt - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError("horizon must be an integer multiple of the environment dt")
    M = int(spatial_points)
    h = band.width / M
    grid = band.lower + (np.arange(M) + 0.5) * h

    K0 = absorbing_band_density(grid[:, None], grid[None, :], band, dt, series_cfg)
    slopes = env.beta * np.diff(env.values[: n_steps + 1]) / dt

    inside = (starts > band.lower) & (starts < band.upper)
    record = _record_steps(n_steps, record_points)
    rec_set = {int(k): r for r, k in enumerate(record)}
    Q = np.full((starts.size, record.size), np.inf)
    if not inside.any():
        return record * dt, Q

    live = np.where(inside)[0]
    s0 = slopes[0]
    F = absorbing_band_density(starts[live, None], grid[None, :], band, dt, series_cfg)
    if s0 != 0.0:
        F = _masked_tilt(F, s0 * (starts[live, None] - grid[None, :]) - 0.5 * s0 * s0 * dt)
    qacc = np.zeros(live.size)

    w_term = None
    if terminal_window is not None:
        w_term = _window_weights(grid, h, terminal_window, snap_window, band)

    # Centered tilt factors keep intermediates bounded by exp(|s| L / 2); the
    # rare steps beyond the overflow guard build the (always bounded) tilted
    # kernel entrywise instead.
    centered = grid - band.midpoint
    tilt_guard = 600.0 / max(band.width, 1e-300)

    for k in range(n_steps):
        if k > 0:
            s = slopes[k]
            if s == 0.0:
                F = h * (F @ K0)
            elif abs(s) < tilt_guard:
                F = (F * np.exp(s * centered)[None, :]) @ K0
                F *= h * math.exp(-0.5 * s * s * dt) * np.exp(-s * centered)[None, :]
            else:
                Ks = _masked_tilt(
                    K0, s * (grid[:, None] - grid[None, :]) - 0.5 * s * s * dt
                )
                F = h * (F @ Ks)
        m = _corrected_mass(F, h)
        dead = m <= 1e-300
        if dead.any():
            m = np.where(dead, 1.0, m)
            qacc = np.where(dead, np.inf, qacc)
            F[dead] = 0.0
            F[dead, 0] = 1.0  # placeholder row; its q is already +inf
        qacc = qacc - np.log(m)
        F = F / m[:, None]
        r = rec_set.get(k + 1)
        if r is not None:
            if w_term is None:
                Q[live, r] = qacc
            else:
                with np.errstate(divide="ignore"):
                    Q[live, r] = qacc - np.log(np.maximum(F @ w_term, 1e-300))
    return record * dt, Q


def _environment_id(env: EnvironmentPath) -> str:
    return f"seed={env.seed}"


def _check_beta(env: EnvironmentPath, corridor: Corridor):
    if corridor.beta != env.beta:
        raise ValueError(
            f"corridor beta {corridor.beta} does not match environment beta {env.beta}"
        )


def quenched_survival(
    env: EnvironmentPath,
    corridor: Corridor,
    start: float,
    horizon: float,
    spatial_points: int = 201,
    series_cfg: SeriesConfig = DEFAULT_SERIES,
    record_points: int = 200,
) -> SurvivalCurve:
    """Deterministic q_t from a single start point (pointwise variant).

    A start outside the open corridor yields a curve of +inf q values
    rather than an exception.
    """
    _check_beta(env, corridor)
    if corridor.kind != "constant_band":
        raise ValueError("quenched_survival expects a constant_band corridor")
    term = corridor.terminal_window
    if term is not None and (term[0] <= corridor.band.lower and term[1] >= corridor.band.upper):
        term = None
    times, Q = transfer_survival(
        env,
        corridor.band,
        [start],
        horizon,
        spatial_points=spatial_points,
        series_cfg=series_cfg,
        record_points=record_points,
        terminal_window=term,
    )
    return SurvivalCurve(
        times=times,
        log_survival=Q[0],
        variant="pointwise",
        corridor_id=corridor.corridor_id,
        environment_id=_environment_id(env),
        band_width=corridor.band.width,
        start=start,
    )


def inf_start_survival(
    env: EnvironmentPath,
    corridor: Corridor,
    horizon: float,
    start_points: int = 17,
    spatial_points: int = 201,
    series_cfg: SeriesConfig = DEFAULT_SERIES,
    record_points: int = 200,
) -> SurvivalCurve:
    """-ln of the infimum of survival over the start window (worst start).

    Evaluates the sweep from start_points equally spaced starting values
    spanning [a0, b0] and takes the pointwise maximum of q_t.
    """
    _check_beta(env, corridor)
    a0, b0 = corridor.start_window
    starts = np.linspace(a0, b0, start_points) if b0 > a0 else np.asarray([a0])
    term = corridor.terminal_window
    if term is not None and (term[0] <= corridor.band.lower and term[1] >= corridor.band.upper):
        term = None
    times, Q = transfer_survival(
        env,
        corridor.band,
        starts,
        horizon,
        spatial_points=spatial_points,
        series_cfg=series_cfg,
        record_points=record_points,
        terminal_window=term,
    )
    return SurvivalCurve(
        times=times,
        log_survival=Q.max(axis=0),
        variant="inf_start",
        corridor_id=corridor.corridor_id,
        environment_id=_environment_id(env),
        band_width=corridor.band.width,
    )


def sup_start_survival(
    env: EnvironmentPath,
    corridor: Corridor,
    horizon: float,
    start_points: int = 17,
    spatial_points: int = 201,
    series_cfg: SeriesConfig = DEFAULT_SERIES,
    record_points: int = 200,
) -> SurvivalCurve:
    """-ln of the supremum of survival over all starting points (best start).

    The supremum over the whole line is attained inside the open band, so
    start_points values spanning it suffice; no terminal restriction.
    """
    _check_beta(env, corridor)
    band = corridor.band
    starts = np.linspace(band.lower, band.upper, start_points + 2)[1:-1]
    times, Q = transfer_survival(
        env,
        band,
        starts,
        horizon,
        spatial_points=spatial_points,
        series_cfg=series_cfg,
        record_points=record_points,
        terminal_window=None,
    )
    return SurvivalCurve(
        times=times,
        log_survival=Q.min(axis=0),
        variant="sup_start",
        corridor_id=corridor.corridor_id,
        environment_id=_environment_id(env),
        band_width=band.width,
    )


def functional_survival(
    env: EnvironmentPath,
    corridor: Corridor,
    start: float,
    horizon: float,
    spatial_points: int = 201,
    series_cfg: SeriesConfig = DEFAULT_SERIES,
    record_points: int = 200,
    width_tolerance: float = 1e-3,
) -> SurvivalCurve:
    """Transfer sweep for a corridor whose opening [f(s/t), g(s/t)] varies.

    The boundaries are sampled at environment steps and held constant over
    blocks within which they move by less than width_tolerance times the
    local width; each block reuses one kernel matrix, and block changes
    re-grid by evaluating the kernel from the old grid onto the new one
    (masked to the old band, since density cannot have reached points
    outside it).
    """
    _check_beta(env, corridor)
    if corridor.kind != "functional":
        raise ValueError("functional_survival expects a functional corridor")
    if not env.covers(horizon):
        raise ValueError(f"environment horizon {env.horizon} does not cover {horizon}")
    dt = env.dt
    n_steps = int(round(horizon / dt))
    M = int(spatial_points)
    s_mid = (np.arange(n_steps) + 0.5) * dt / horizon
    f_vals = np.asarray([corridor.lower_fn(v) for v in s_mid], dtype=float)
    g_vals = np.asarray([corridor.upper_fn(v) for v in s_mid], dtype=float)

    slopes = env.beta * np.diff(env.values[: n_steps + 1]) / dt
    record = _record_steps(n_steps, record_points)
    rec_set = {int(k): r for r, k in enumerate(record)}
    times = record * dt
    q_out = np.full(record.size, np.inf)

    def new_block(k):
        band = BandSpec(f_vals[k], g_vals[k])
        h = band.width / M
        grid = band.lower + (np.arange(M) + 0.5) * h
        return band, h, grid

    band, h, grid = new_block(0)
    if not (band.lower < start < band.upper):
        return SurvivalCurve(
            times=times,
            log_survival=q_out,
            variant="pointwise",
            corridor_id=corridor.corridor_id,
            environment_id=_environment_id(env),
            band_width=g_vals[0] - f_vals[0],
            start=start,
        )
    K = absorbing_band_density(grid[:, None], grid[None, :], band, dt, series_cfg)
    s0 = slopes[0]
    F = absorbing_band_density(np.asarray([[start]]), grid[None, :], band, dt, series_cfg)
    if s0 != 0.0:
        F = _masked_tilt(F, s0 * (start - grid)[None, :] - 0.5 * s0 * s0 * dt)
    qacc = 0.0

    tol = width_tolerance / 2.0
    for k in range(n_steps):
        if k > 0:
            moved = max(abs(f_vals[k] - band.lower), abs(g_vals[k] - band.upper))
            s = slopes[k]
            centered = grid - band.midpoint
            if moved <= tol * band.width:
                if s == 0.0:
                    F = h * (F @ K)
                elif abs(s) < 600.0 / band.width:
                    F = (F * np.exp(s * centered)[None, :]) @ K
                    F *= h * math.exp(-0.5 * s * s * dt) * np.exp(-s * centered)[None, :]
                else:
                    Ks = _masked_tilt(
                        K, s * (grid[:, None] - grid[None, :]) - 0.5 * s * s * dt
                    )
                    F = h * (F @ Ks)
            else:
                nband, nh, ngrid = new_block(k)
                cross = absorbing_band_density(grid[:, None], ngrid[None, :], band, dt, series_cfg)
                outside = (ngrid <= band.lower) | (ngrid >= band.upper)
                cross[:, outside] = 0.0
                if s != 0.0:
                    cross = _masked_tilt(
                        cross, s * (grid[:, None] - ngrid[None, :]) - 0.5 * s * s * dt
                    )
                F = h * (F @ cross)
                band, h, grid = nband, nh, ngrid
                K = absorbing_band_density(grid[:, None], grid[None, :], band, dt, series_cfg)
        m = float(_corrected_mass(F, h)[0])
        if m <= 1e-300:
            qacc = np.inf
            F[:] = 0.0
            F[0, 0] = 1.0
            m = 1.0
        qacc -= math.log(m)
        F = F / m
        r = rec_set.get(k + 1)
        if r is not None:
            q_out[r] = qacc
    return SurvivalCurve(
        times=times,
        log_survival=q_out,
        variant="pointwise",
        corridor_id=corridor.corridor_id,
        environment_id=_environment_id(env),
        band_width=g_vals[0] - f_vals[0],
        start=start,
    )


def particle_splitting_survival(
    env: EnvironmentPath,
    corridor: Corridor,
    start: float,
    horizon: float,
    cfg: SplittingConfig,
    series_cfg: SeriesConfig = DEFAULT_SERIES,
    record_points: int = 200,
) -> SurvivalCurve:
    """Sequential Monte Carlo estimate of q_t with standard errors.

    Euler walkers in corridor-frame coordinates are killed on leaving the
    band at grid times and additionally thinned by the exact bridge no-exit
    probability inside each step (when bridge_thinning is on), which removes
    the leading discrete-monitoring bias.  Survivors are multinomially
    resampled every resample_period; the product of per-period survival
    fractions is an unbiased estimator of p_t.  Standard errors come from
    the delta method treating period fractions as independent.

    If every particle dies the curve is truncated and truncated_at records
    the kill time.
    """
    from .kernels import bridge_band_survival  # local import avoids cycle noise

    _check_beta(env, corridor)
    if corridor.kind != "constant_band":
        raise ValueError("particle_splitting_survival expects a constant_band corridor")
    band = corridor.band
    if not env.covers(horizon):
        raise ValueError(f"environment horizon {env.horizon} does not cover {horizon}")
    dt = env.dt
    n_steps = int(round(horizon / dt))
    N = cfg.n_particles
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _DOMAIN_SPLIT]))
    record = _record_steps(n_steps, record_points)
    rec_set = {int(k): r for r, k in enumerate(record)}
    times = record * dt
    q_out = np.full(record.size, np.nan)
    se_out = np.full(record.size, np.nan)

    betaW = env.beta * env.values[: n_steps + 1]
    z = np.full(N, start - betaW[0])
    alive = np.full(N, True)
    if not (band.lower < start < band.upper):
        return SurvivalCurve(
            times=times,
            log_survival=np.full(record.size, np.inf),
            variant="pointwise",
            corridor_id=corridor.corridor_id,
            environment_id=_environment_id(env),
            band_width=band.width,
            start=start,
            truncated_at=0.0,
        )

    steps_per_period = max(1, int(round(cfg.resample_period / dt)))
    log_survival_total = 0.0
    var_total = 0.0
    truncated_at = None

    for k in range(n_steps):
        xi = rng.standard_normal(N)
        znew = z + math.sqrt(dt) * xi - (betaW[k + 1] - betaW[k])
        ok = alive & (znew > band.lower) & (znew < band.upper)
        if cfg.bridge_thinning:
            u = rng.random(N)
            p_br = np.ones(N)
            if ok.any():
                p_br[ok] = bridge_band_survival(z[ok], znew[ok], band, dt, series_cfg)
            ok &= u < p_br
        alive = ok
        z = znew
        n_alive = int(alive.sum())
        if n_alive == 0 and truncated_at is None:
            truncated_at = (k + 1) * dt

        end_of_period = ((k + 1) % steps_per_period == 0) or (k + 1 == n_steps)
        r = rec_set.get(k + 1)
        if r is not None:
            if truncated_at is None:
                frac = n_alive / N
                q_out[r] = -(log_survival_total + math.log(frac))
                se_out[r] = math.sqrt(var_total + (1.0 - frac) / (N * frac))
        if end_of_period and truncated_at is None and k + 1 < n_steps:
            frac = n_alive / N
            log_survival_total += math.log(frac)
            var_total += (1.0 - frac) / (N * frac)
            idx = np.where(alive)[0]
            z = z[idx[rng.integers(0, n_alive, N)]]
            alive = np.full(N, True)

    keep = ~np.isnan(q_out)
    return SurvivalCurve(
        times=times[keep],
        log_survival=q_out[keep],
        variant="pointwise",
        corridor_id=corridor.corridor_id,
        environment_id=_environment_id(env),
        band_width=band.width,
        stderr=se_out[keep],
        start=start,
        truncated_at=truncated_at,
    )


def save_curve(curve: SurvivalCurve, file) -> None:
    """Columnar (t, q[, stderr]) text output with a provenance header."""
    header = (
        f"environment={curve.environment_id} corridor={curve.corridor_id} "
        f"variant={curve.variant} band_width={curve.band_width:.17g}"
    )
    if curve.stderr is not None:
        data = np.column_stack([curve.times, curve.log_survival, curve.stderr])
    else:
        data = np.column_stack([curve.times, curve.log_survival])
    np.savetxt(file, data, fmt="%.17g", header=header)


def load_curve(file) -> SurvivalCurve:
    with open(file) as fh:
        first = fh.readline()
    if not first.startswith("#"):
        raise ValueError("missing curve header line")
    fields = dict(tok.split("=", 1) for tok in first[1:].split())
    data = np.atleast_2d(np.loadtxt(file))
    return SurvivalCurve(
        times=data[:, 0].copy(),
        log_survival=data[:, 1].copy(),
        variant=fields["variant"],
        corridor_id=fields["corridor"],
        environment_id=fields["environment"],
        band_width=float(fields["band_width"]),
        stderr=data[:, 2].copy() if data.shape[1] > 2 else None,
    )

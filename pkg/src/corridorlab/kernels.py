"""Closed-form kernels for Brownian motion absorbed at the edges of a band.

Everything here is classical diffusion analysis.  The central object is the
transition density of a Brownian motion killed on exit from a fixed interval
[a, b] of width L = b - a.  It has two equivalent series representations with
complementary convergence regimes:

* a reflection (image-charge) series, fast for short times,

      p_t(x, y) = sum_k  phi_t(y - x - 2kL) - phi_t(y + x - 2a - 2kL),

  with phi_t the centred Gaussian density of variance t, and

* a sine eigenseries, fast for long times,

      p_t(x, y) = (2/L) sum_n sin(n pi (x-a)/L) sin(n pi (y-a)/L)
                              exp(-n^2 pi^2 t / (2 L^2)).

Integrating either series over y in [lo, hi] gives the survival probability
with a terminal-window restriction; [lo, hi] = [a, b] gives plain survival.
The regime switch point is t* = L^2 / pi^2, which roughly balances the term
counts of the two representations.

A constant drift -c is incorporated exactly through the Cameron-Martin
factor exp(c (x - y) - c^2 t / 2) applied to the driftless density; this is
how a linearly moving band is reduced to a fixed one inside a single step of
the transfer operator.

The two-sided first-exit density of the level pair {-d, +d} is provided both
as an image series (short times) and a spectral series (long times).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

__all__ = [
    "BandSpec",
    "SeriesConfig",
    "SeriesConvergenceError",
    "DEFAULT_SERIES",
    "band_survival_fixed",
    "band_survival_windowed",
    "log_band_survival_fixed",
    "bridge_band_survival",
    "absorbing_band_density",
    "tilted_propagator",
    "first_exit_density_two_sided",
]


@dataclass(frozen=True)
class BandSpec:
    """A fixed spatial band [lower, upper]."""

    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(
                f"band requires lower < upper strictly, got [{self.lower}, {self.upper}]"
            )

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def shifted(self, c: float) -> "BandSpec":
        return BandSpec(self.lower + c, self.upper + c)

    def scaled(self, c: float) -> "BandSpec":
        return BandSpec(self.lower * c, self.upper * c)


@dataclass(frozen=True)
class SeriesConfig:
    """Truncation control for all series evaluations.

    Summation stops once the next term's magnitude falls below
    relative_tolerance times the running partial sum while term magnitudes
    are decreasing; max_terms is a hard cap.
    """

    relative_tolerance: float = 1e-13
    max_terms: int = 512

    def __post_init__(self):
        if not 0.0 < self.relative_tolerance < 1.0:
            raise ValueError("relative_tolerance must lie strictly in (0, 1)")
        if self.max_terms < 8:
            raise ValueError("max_terms must be at least 8")


DEFAULT_SERIES = SeriesConfig()


class SeriesConvergenceError(RuntimeError):
    """A kernel series failed to converge within max_terms.

    Carries the partial sum and the magnitude of the last term as a bound
    on the truncation error.
    """

    def __init__(self, message, partial=None, bound=None):
        super().__init__(message)
        self.partial = partial
        self.bound = bound


def _regime_switch_time(width: float) -> float:
    return width * width / (math.pi * math.pi)


def _sum_terms(term_iter, cfg: SeriesConfig, what: str):
    """Accumulate terms from an iterator under the shared truncation rule.

    Terms are numpy arrays (or scalars).  Convergence is declared once two
    consecutive terms fall below relative_tolerance times the max-norm of
    the partial sum while term magnitudes are non-increasing; the streak
    requirement guards series with structurally zero terms interleaved
    (e.g. even harmonics of a symmetric window).
    """
    total = None
    prev_mag = math.inf
    streak = 0
    for i, term in enumerate(term_iter):
        term = np.asarray(term, dtype=float)
        total = term.copy() if total is None else total + term
        mag = float(np.max(np.abs(term))) if term.size else 0.0
        scale = float(np.max(np.abs(total))) if total.size else 0.0
        small = i > 0 and mag <= prev_mag and mag < cfg.relative_tolerance * max(scale, 1e-300)
        streak = streak + 1 if small else 0
        if streak >= 2:
            return total
        if mag > 0.0:
            prev_mag = mag
        if i + 1 >= cfg.max_terms:
            raise SeriesConvergenceError(
                f"{what}: series did not converge within {cfg.max_terms} terms "
                f"(last term magnitude {mag:.3e})",
                partial=total,
                bound=mag,
            )
    return total


def _survival_image(x, band: BandSpec, t: float, lo: float, hi: float, cfg: SeriesConfig):
    """Reflection-series survival with terminal restriction to [lo, hi]."""
    a, L = band.lower, band.width
    rt = math.sqrt(t)
    x = np.asarray(x, dtype=float)

    def block(k):
        s = 2.0 * k * L
        return (
            ndtr((hi - x - s) / rt)
            - ndtr((lo - x - s) / rt)
            - ndtr((hi + x - 2.0 * a - s) / rt)
            + ndtr((lo + x - 2.0 * a - s) / rt)
        )

    def terms():
        yield block(0)
        k = 1
        while True:
            yield block(k) + block(-k)
            k += 1

    return _sum_terms(terms(), cfg, "band survival (image series)")


def _survival_eigen(x, band: BandSpec, t: float, lo: float, hi: float, cfg: SeriesConfig):
    """Eigenseries survival with terminal restriction to [lo, hi]."""
    a, L = band.lower, band.width
    x = np.asarray(x, dtype=float)
    u = np.pi * (x - a) / L
    lam = np.pi * np.pi * t / (2.0 * L * L)

    def terms():
        n = 1
        while True:
            coef = (2.0 / (n * np.pi)) * (
                math.cos(n * np.pi * (lo - a) / L) - math.cos(n * np.pi * (hi - a) / L)
            )
            yield coef * np.sin(n * u) * math.exp(-n * n * lam)
            n += 1

    return _sum_terms(terms(), cfg, "band survival (eigenseries)")


def band_survival_windowed(x, band: BandSpec, t: float, window, cfg: SeriesConfig = DEFAULT_SERIES):
    """P^x(stay in the band up to t and end inside window).

    window is a (lo, hi) pair with band.lower <= lo < hi <= band.upper.
    Vectorized over x.
    """
    lo, hi = float(window[0]), float(window[1])
    if not (band.lower - 1e-12 <= lo < hi <= band.upper + 1e-12):
        raise ValueError(
            f"terminal window [{lo}, {hi}] must satisfy "
            f"{band.lower} <= lo < hi <= {band.upper}"
        )
    if t < 0.0:
        raise ValueError("time must be non-negative")
    x = np.asarray(x, dtype=float)
    inside = (x > band.lower) & (x < band.upper)
    if t == 0.0:
        out = np.where(inside & (x >= lo) & (x <= hi), 1.0, 0.0)
        return out if out.ndim else float(out)
    if t < _regime_switch_time(band.width):
        vals = _survival_image(x, band, t, lo, hi, cfg)
    else:
        vals = _survival_eigen(x, band, t, lo, hi, cfg)
    vals = np.clip(np.where(inside, vals, 0.0), 0.0, 1.0)
    return vals if vals.ndim else float(vals)


def band_survival_fixed(x, band: BandSpec, t: float, cfg: SeriesConfig = DEFAULT_SERIES):
    """P^x(B stays inside [lower, upper] for all s <= t).

    Returns 0 for x outside the open band, 1 at t=0 for interior x.
    The long-time log-slope of the result is pi^2 / (2 width^2).
    """
    return band_survival_windowed(x, band, t, (band.lower, band.upper), cfg)


def log_band_survival_fixed(x, band: BandSpec, t: float, cfg: SeriesConfig = DEFAULT_SERIES):
    """ln of band_survival_fixed, safe far beyond float underflow.

    For t past the regime switch the ground mode is factored out, so values
    like -1e4 are returned exactly where the plain probability would
    underflow to zero.
    """
    if t < 0.0:
        raise ValueError("time must be non-negative")
    x = np.asarray(x, dtype=float)
    a, L = band.lower, band.width
    inside = (x > band.lower) & (x < band.upper)
    if t == 0.0:
        out = np.where(inside, 0.0, -np.inf)
        return out if out.ndim else float(out)
    if t < _regime_switch_time(band.width):
        s = _survival_image(x, band, t, a, band.upper, cfg)
        with np.errstate(divide="ignore"):
            out = np.where(inside, np.log(np.clip(s, 0.0, 1.0)), -np.inf)
        return out if out.ndim else float(out)

    lam1 = np.pi * np.pi * t / (2.0 * L * L)
    u = np.pi * (x - a) / L

    def terms():
        n = 1
        while True:
            coef = (2.0 / (n * np.pi)) * (1.0 - math.cos(n * np.pi))
            yield coef * np.sin(n * u) * math.exp(-(n * n - 1.0) * lam1)
            n += 1

    rest = _sum_terms(terms(), cfg, "log band survival (eigenseries)")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(inside & (rest > 0.0), -lam1 + np.log(np.maximum(rest, 1e-300)), -np.inf)
    return out if out.ndim else float(out)


def bridge_band_survival(x, y, band: BandSpec, dt: float, cfg: SeriesConfig = DEFAULT_SERIES):
    """No-exit probability of a Brownian bridge from x to y over time dt.

    Alternating image series

        sum_k exp(-2kL(kL + y - x)/dt) - exp(-2(kL + x - a)(kL + y - a)/dt)

    conditioned on both endpoints lying in the open band (returns 0
    otherwise).  A Brownian bridge with any constant drift has the same law
    as the driftless one given its endpoints, so this also serves moving
    linear frames.  Vectorized over broadcast x, y.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    a, L = band.lower, band.width
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    inside = (x > band.lower) & (x < band.upper) & (y > band.lower) & (y < band.upper)

    def block(k):
        kl = k * L
        direct = np.exp(-2.0 * kl * (kl + y - x) / dt)
        reflect = np.exp(-2.0 * (kl + x - a) * (kl + y - a) / dt)
        return direct - reflect

    def terms():
        yield block(0)
        k = 1
        while True:
            yield block(k) + block(-k)
            k += 1

    vals = _sum_terms(terms(), cfg, "bridge band survival")
    vals = np.clip(np.where(inside, vals, 0.0), 0.0, 1.0)
    return vals if vals.ndim else float(vals)


def _density_image(x, y, band: BandSpec, dt: float, cfg: SeriesConfig):
    a, L = band.lower, band.width
    norm = 1.0 / math.sqrt(2.0 * math.pi * dt)

    def phi(z):
        return norm * np.exp(-z * z / (2.0 * dt))

    def block(k):
        s = 2.0 * k * L
        return phi(y - x - s) - phi(y + x - 2.0 * a - s)

    def terms():
        yield block(0)
        k = 1
        while True:
            yield block(k) + block(-k)
            k += 1

    return _sum_terms(terms(), cfg, "absorbing density (image series)")


def _density_eigen(x, y, band: BandSpec, dt: float, cfg: SeriesConfig):
    a, L = band.lower, band.width
    ux = np.pi * (x - a) / L
    uy = np.pi * (y - a) / L
    lam = np.pi * np.pi * dt / (2.0 * L * L)

    def terms():
        n = 1
        while True:
            yield (2.0 / L) * np.sin(n * ux) * np.sin(n * uy) * math.exp(-n * n * lam)
            n += 1

    return _sum_terms(terms(), cfg, "absorbing density (eigenseries)")


def absorbing_band_density(x, y, band: BandSpec, dt: float, cfg: SeriesConfig = DEFAULT_SERIES):
    """Transition density from x to y in time dt, killed on band exit.

    Valid for x, y inside the band; vectorized over broadcast x, y.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if dt < _regime_switch_time(band.width):
        vals = _density_image(x, y, band, dt, cfg)
    else:
        vals = _density_eigen(x, y, band, dt, cfg)
    return np.maximum(vals, 0.0)


def tilted_propagator(
    x_grid,
    y_grid,
    band: BandSpec,
    dt: float,
    slope: float,
    cfg: SeriesConfig = DEFAULT_SERIES,
):
    """Killed transition matrix for a band whose frame drifts linearly.

    Entry (i, j) is the sub-probability density of moving from x_grid[i] to
    y_grid[j] in time dt without leaving the band, in coordinates where the
    band's centre line moves with the given slope: the frame change turns
    the motion into Brownian motion with drift -slope, handled exactly by
    the Cameron-Martin factor exp(slope (x - y) - slope^2 dt / 2).
    """
    x = np.asarray(x_grid, dtype=float)
    y = np.asarray(y_grid, dtype=float)
    if x.ndim != 1 or y.ndim != 1:
        raise ValueError("x_grid and y_grid must be one-dimensional")
    for name, g in (("x_grid", x), ("y_grid", y)):
        if np.any(g <= band.lower) or np.any(g >= band.upper):
            raise ValueError(f"{name} must lie strictly inside the open band")
    base = absorbing_band_density(x[:, None], y[None, :], band, dt, cfg)
    if slope == 0.0:
        return base
    tilt = np.exp(slope * (x[:, None] - y[None, :]) - 0.5 * slope * slope * dt)
    return base * tilt


def first_exit_density_two_sided(delta: float, t, cfg: SeriesConfig = DEFAULT_SERIES):
    """Density of the first time |W| reaches delta (two-sided exit from 0).

    Image form for t <= delta^2,

        p(t) = (2 delta / sqrt(2 pi t^3)) sum_n (4n+1) exp(-(4n+1)^2 delta^2 / (2t)),

    spectral form for larger t,

        p(t) = (pi / (2 delta^2)) sum_{n odd} (-1)^((n-1)/2) n
                                  exp(-n^2 pi^2 t / (8 delta^2)).

    The mean of this density is delta^2.  Vectorized over t.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0.0):
        raise ValueError("t must be positive")
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)
    out = np.empty_like(t_arr)

    small = t_arr <= delta * delta
    if np.any(small):
        ts = t_arr[small]
        pref = 2.0 * delta / np.sqrt(2.0 * math.pi * ts**3)

        def small_terms():
            # order n = 0, -1, 1, -2, 2, ... gives |4n+1| = 1, 3, 5, 7, 9, ...
            j = 0
            while True:
                n = -(j // 2 + 1) if j % 2 else j // 2
                c = 4 * n + 1
                yield c * np.exp(-c * c * delta * delta / (2.0 * ts))
                j += 1

        out[small] = pref * _sum_terms(small_terms(), cfg, "first-exit density (image series)")

    large = ~small
    if np.any(large):
        tl = t_arr[large]
        lam = math.pi * math.pi / (8.0 * delta * delta)

        def large_terms():
            n = 1
            while True:
                sign = -1.0 if ((n - 1) // 2) % 2 else 1.0
                yield sign * n * np.exp(-n * n * lam * tl)
                n += 2

        out[large] = (math.pi / (2.0 * delta * delta)) * _sum_terms(
            large_terms(), cfg, "first-exit density (spectral series)"
        )

    out = np.maximum(out, 0.0)
    return float(out[0]) if scalar else out

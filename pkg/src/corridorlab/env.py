"""Environment paths: the Brownian motion that carries the corridor.

A path is a uniformly spaced discrete Brownian trajectory W with W_0 = 0,
stored as (dt, values) so long horizons suffer no floating-point drift in
the time grid.  Generation is fully reproducible: increments come from
numpy's PCG64 seeded through SeedSequence with a fixed domain tag, so a
(seed, horizon, dt) triple always yields the same path on any platform.

Seed convention: the lowest bit of a seed is a mirror flag.  Seeds 2k and
2k+1 generate sign-mirrored paths (values negated).  The seed scheduler in
the cli module relies on this to couple +beta and -beta runs exactly.

Refinement inserts Brownian-bridge midpoints without touching existing
values.  For power-of-two factors it proceeds by repeated bisection keyed
on the global dyadic position of each new point, so refining by 2 twice
and refining by 4 once produce identical paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "EnvironmentPath",
    "DeltaLadder",
    "sample_environment",
    "refine_environment",
    "delta_ladder",
    "save_environment",
    "load_environment",
]

_DOMAIN_INCREMENTS = 0x57494E43  # increment stream
_DOMAIN_BISECT = 0x42495345  # dyadic bisection stream
_DOMAIN_ONESHOT = 0x4F4E4553  # single-level insertion stream


@dataclass(frozen=True)
class EnvironmentPath:
    """One realization of the driving Brownian path on a uniform grid."""

    seed: int
    beta: float
    dt: float
    dt_nominal: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 2:
            raise ValueError("values must be a 1-d array with at least two points")
        if vals[0] != 0.0:
            raise ValueError("paths start at the origin: values[0] must be 0")
        if self.dt <= 0.0 or self.dt_nominal <= 0.0:
            raise ValueError("dt must be positive")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n_steps(self) -> int:
        return self.values.size - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.size) * self.dt

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    @property
    def mirrored(self) -> bool:
        return bool(self.seed & 1)

    def covers(self, horizon: float) -> bool:
        return self.horizon >= horizon - 1e-9 * max(1.0, horizon)

    def mirror(self) -> "EnvironmentPath":
        """The sign-flipped twin (seed with mirror bit toggled)."""
        return EnvironmentPath(
            seed=self.seed ^ 1,
            beta=self.beta,
            dt=self.dt,
            dt_nominal=self.dt_nominal,
            values=-self.values,
        )


@dataclass(frozen=True)
class DeltaLadder:
    """Stopping times at which the path has moved by +-delta since the last anchor."""

    delta: float
    tau: np.ndarray
    rho: np.ndarray
    count_before: int
    unreliable: bool


def sample_environment(seed: int, horizon: float, dt: float, beta: float) -> EnvironmentPath:
    """Draw a Brownian path on a uniform grid covering the horizon.

    The grid has ceil(horizon/dt) + 1 points; increments are independent
    N(0, dt).  The same seed always reproduces the same path bitwise.
    """
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if dt > horizon:
        raise ValueError("dt must not exceed the horizon")
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    n = int(math.ceil(horizon / dt - 1e-12))
    sign = -1.0 if seed & 1 else 1.0
    rng = np.random.default_rng(np.random.SeedSequence([seed >> 1, _DOMAIN_INCREMENTS]))
    increments = rng.standard_normal(n) * math.sqrt(dt) * sign
    values = np.empty(n + 1)
    values[0] = 0.0
    np.cumsum(increments, out=values[1:])
    return EnvironmentPath(seed=seed, beta=beta, dt=dt, dt_nominal=dt, values=values)


def _bisect_once(path: EnvironmentPath) -> EnvironmentPath:
    """Insert bridge midpoints into every segment (one dyadic level)."""
    new_dt = path.dt / 2.0
    ratio = path.dt_nominal / new_dt
    denom = int(round(ratio))
    old = path.values
    n_new = 2 * path.n_steps + 1
    values = np.empty(n_new)
    values[0::2] = old
    sign = -1.0 if path.seed & 1 else 1.0
    half_std = math.sqrt(path.dt) / 2.0
    mids = 0.5 * (old[:-1] + old[1:])
    for i in range(path.n_steps):
        j = 2 * i + 1  # odd global index at this dyadic level
        rng = np.random.default_rng(
            np.random.SeedSequence([path.seed >> 1, _DOMAIN_BISECT, denom, j])
        )
        values[j] = mids[i] + sign * half_std * rng.standard_normal()
    return EnvironmentPath(
        seed=path.seed, beta=path.beta, dt=new_dt, dt_nominal=path.dt_nominal, values=values
    )


def _fill_oneshot(path: EnvironmentPath, factor: int) -> EnvironmentPath:
    """Insert factor-1 bridge points per segment in one pass."""
    new_dt = path.dt / factor
    denom = int(round(path.dt_nominal / new_dt))
    old = path.values
    values = np.empty(factor * path.n_steps + 1)
    values[::factor] = old
    sign = -1.0 if path.seed & 1 else 1.0
    for i in range(path.n_steps):
        rng = np.random.default_rng(
            np.random.SeedSequence([path.seed >> 1, _DOMAIN_ONESHOT, denom, i])
        )
        prev = old[i]
        right = old[i + 1]
        for k in range(1, factor):
            remaining = factor - k + 1
            mean = prev + (right - prev) / remaining
            var = new_dt * (remaining - 1) / remaining
            prev = mean + sign * math.sqrt(var) * rng.standard_normal()
            values[factor * i + k] = prev
    return EnvironmentPath(
        seed=path.seed, beta=path.beta, dt=new_dt, dt_nominal=path.dt_nominal, values=values
    )


def refine_environment(path: EnvironmentPath, factor: int) -> EnvironmentPath:
    """Refine the grid by an integer factor with bridge-conditional inserts.

    Existing grid values are preserved exactly.  Power-of-two factors are
    applied as repeated bisections keyed on global dyadic positions, so
    dyadic refinements compose consistently; other factors use a one-level
    fill whose seeds are keyed on (segment, level) only.
    """
    if not isinstance(factor, (int, np.integer)) or factor < 2:
        raise ValueError("refinement factor must be an integer >= 2")
    ratio = path.dt_nominal / path.dt
    dyadic_history = abs(ratio - round(ratio)) < 1e-9 and (int(round(ratio)) & (int(round(ratio)) - 1)) == 0
    if factor & (factor - 1) == 0 and dyadic_history:
        out = path
        for _ in range(int(math.log2(factor))):
            out = _bisect_once(out)
        return out
    return _fill_oneshot(path, int(factor))


def delta_ladder(path: EnvironmentPath, delta: float, horizon: float) -> DeltaLadder:
    """Successive times at which |W - anchor| first reaches delta on the grid.

    Detection is the first grid point with displacement >= delta relative to
    the previous ladder time (no sub-grid interpolation).  Times at or past
    the horizon are discarded; count_before counts times strictly below it.
    The result is flagged unreliable when delta^2 < 10 dt, where grid
    crossing times are badly resolved.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    if not path.covers(horizon):
        raise ValueError(f"path horizon {path.horizon} does not cover requested horizon {horizon}")
    values = path.values
    n_max = min(values.size - 1, int(math.floor(horizon / path.dt + 1e-9)))
    taus = []
    anchor_idx = 0
    while True:
        seg = np.abs(values[anchor_idx + 1 : n_max + 1] - values[anchor_idx]) >= delta
        if not seg.any():
            break
        anchor_idx = anchor_idx + 1 + int(np.argmax(seg))
        t_cross = anchor_idx * path.dt
        if t_cross >= horizon - 1e-12 * max(1.0, horizon):
            break
        taus.append(t_cross)
    tau = np.asarray(taus)
    rho = np.diff(np.concatenate(([0.0], tau))) if tau.size else np.empty(0)
    return DeltaLadder(
        delta=delta,
        tau=tau,
        rho=rho,
        count_before=int(tau.size),
        unreliable=bool(delta * delta < 10.0 * path.dt),
    )


def save_environment(path: EnvironmentPath, file) -> None:
    """Write a path as a two-column (time, value) text file.

    The one-line header carries seed, dt, dt_nominal and beta; values use 17
    significant digits so a load round-trips bitwise.
    """
    header = (
        f"seed={path.seed} dt={path.dt:.17g} dt_nominal={path.dt_nominal:.17g} "
        f"beta={path.beta:.17g}"
    )
    data = np.column_stack([path.times, path.values])
    np.savetxt(file, data, fmt="%.17g", header=header)


def load_environment(file) -> EnvironmentPath:
    """Read a path written by save_environment."""
    with open(file) as fh:
        first = fh.readline()
    if not first.startswith("#"):
        raise ValueError("missing environment header line")
    fields = dict(tok.split("=", 1) for tok in first[1:].split())
    data = np.loadtxt(file)
    data = np.atleast_2d(data)
    return EnvironmentPath(
        seed=int(fields["seed"]),
        beta=float(fields["beta"]),
        dt=float(fields["dt"]),
        dt_nominal=float(fields.get("dt_nominal", fields["dt"])),
        values=data[:, 1].copy(),
    )

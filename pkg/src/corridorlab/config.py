"""Run configuration: a single YAML file with nested sections.

All numeric defaults live here, in one place.  A master seed is mandatory;
nothing in the pipeline ever touches the wall clock for randomness.  Only
the output directory and worker count may be overridden through environment
variables (CORRIDORLAB_OUTPUT, CORRIDORLAB_WORKERS); everything else comes
from the file so a config uniquely determines a run.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

import yaml

from .kernels import BandSpec, SeriesConfig
from .quenched import Corridor

__all__ = ["RunConfig", "ConfigError", "load_run_config", "DEFAULTS"]

ENV_OUTPUT = "CORRIDORLAB_OUTPUT"
ENV_WORKERS = "CORRIDORLAB_WORKERS"

DEFAULTS = {
    "corridor": {
        "kind": "constant_band",
        "band": [0.0, 1.0],
        "start_window": None,  # central 60% of the band
        "terminal_window": None,  # full band
    },
    "run": {
        "betas": [0.0, 0.25, 0.5, 0.75, 1.0],
        "horizon": 20.0,
        "env_dt": 1e-3,
        "spatial_points": 201,
        "start_points": 17,
        "ensemble_size": 32,
        "fit_window": None,  # [horizon/4, horizon]
        "record_points": 256,
        "master_seed": None,  # mandatory
    },
    "series": {"relative_tolerance": 1e-13, "max_terms": 512},
    "splitting": {"n_particles": 2000, "resample_period": 0.5, "bridge_thinning": True},
    "scenario": {},
    "audit": {"checkpoints": list(range(1, 11)), "n_environments": 20, "tolerance": 1e-6},
    "check": {"betas": [0.0], "tolerance": 0.005},
    "output": {"directory": "out", "workers": 1, "figures": True},
}


class ConfigError(ValueError):
    """A configuration value violates an operation's admissible range."""


@dataclass
class RunConfig:
    command: str
    corridor_kind: str
    band: BandSpec
    start_window: Optional[tuple]
    terminal_window: Optional[tuple]
    betas: list
    horizon: float
    env_dt: float
    spatial_points: int
    start_points: int
    ensemble_size: int
    fit_window: Optional[tuple]
    record_points: int
    master_seed: int
    series: SeriesConfig
    splitting: dict
    scenario: dict
    audit: dict
    check: dict
    output_dir: str
    workers: int
    figures: bool
    raw: dict = field(default_factory=dict)

    def resolved_start_window(self) -> tuple:
        if self.start_window is not None:
            return self.start_window
        w = self.band.width
        return (self.band.lower + 0.2 * w, self.band.upper - 0.2 * w)

    def resolved_fit_window(self) -> tuple:
        if self.fit_window is not None:
            return self.fit_window
        return (self.horizon / 4.0, self.horizon)

    def corridor(self, beta: float) -> Corridor:
        return Corridor(
            kind="constant_band",
            beta=beta,
            band=self.band,
            start_window=self.resolved_start_window(),
            terminal_window=self.terminal_window,
        )


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, val in (override or {}).items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def load_run_config(path, command: str, master_seed_default: Optional[int] = None) -> RunConfig:
    """Parse and validate a YAML run configuration for the given command.

    master_seed_default backfills run.master_seed only when the file does
    not set one (used by the configless check command).
    """
    if path is None:
        data = {}
    else:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be a mapping")
    merged = _merge(DEFAULTS, data)
    if merged["run"].get("master_seed") is None and master_seed_default is not None:
        merged["run"]["master_seed"] = int(master_seed_default)
    cor = merged["corridor"]
    run = merged["run"]
    out = merged["output"]

    try:
        band = BandSpec(float(cor["band"][0]), float(cor["band"][1]))
    except (ValueError, TypeError, IndexError) as exc:
        raise ConfigError(f"invalid corridor band: {exc}") from exc

    start_window = cor.get("start_window")
    if start_window is not None:
        start_window = (float(start_window[0]), float(start_window[1]))
    terminal_window = cor.get("terminal_window")
    if terminal_window is not None:
        terminal_window = (float(terminal_window[0]), float(terminal_window[1]))

    if run.get("master_seed") is None:
        raise ConfigError(
            "run.master_seed is mandatory: every pipeline must be reproducible, "
            "wall-clock seeding is not supported"
        )

    horizon = float(run["horizon"])
    if horizon <= 0:
        raise ConfigError("run.horizon must be positive")
    env_dt = float(run["env_dt"])
    if env_dt <= 0 or env_dt > horizon:
        raise ConfigError("run.env_dt must satisfy 0 < env_dt <= horizon")
    spatial_points = int(run["spatial_points"])
    if spatial_points < 32:
        raise ConfigError("run.spatial_points must be at least 32")
    start_points = int(run["start_points"])
    if start_points < 1:
        raise ConfigError("run.start_points must be at least 1")
    ensemble_size = int(run["ensemble_size"])
    if ensemble_size < 1:
        raise ConfigError("run.ensemble_size must be at least 1")
    fit_window = run.get("fit_window")
    if fit_window is not None:
        fit_window = (float(fit_window[0]), float(fit_window[1]))
        if fit_window[0] < 1.0:
            raise ConfigError("run.fit_window must start at t >= 1 (burn-in excluded)")
        if not fit_window[0] < fit_window[1] <= horizon + 1e-9:
            raise ConfigError("run.fit_window must satisfy 1 <= t_min < t_max <= horizon")

    series_raw = merged["series"]
    try:
        series = SeriesConfig(
            relative_tolerance=float(series_raw["relative_tolerance"]),
            max_terms=int(series_raw["max_terms"]),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid series section: {exc}") from exc

    output_dir = os.environ.get(ENV_OUTPUT, out["directory"])
    workers = int(os.environ.get(ENV_WORKERS, out["workers"]))
    if workers < 1:
        raise ConfigError("output.workers must be at least 1")

    cfg = RunConfig(
        command=command,
        corridor_kind=cor.get("kind", "constant_band"),
        band=band,
        start_window=start_window,
        terminal_window=terminal_window,
        betas=[float(b) for b in run["betas"]],
        horizon=horizon,
        env_dt=env_dt,
        spatial_points=spatial_points,
        start_points=start_points,
        ensemble_size=ensemble_size,
        fit_window=fit_window,
        record_points=int(run["record_points"]),
        master_seed=int(run["master_seed"]),
        series=series,
        splitting=dict(merged["splitting"]),
        scenario=dict(merged["scenario"]),
        audit=dict(merged["audit"]),
        check=dict(merged["check"]),
        output_dir=output_dir,
        workers=workers,
        figures=bool(out.get("figures", True)),
        raw=merged,
    )

    # constructing a corridor validates the window relationships up front
    try:
        cfg.corridor(cfg.betas[0] if cfg.betas else 0.0)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg

"""Command-line entry point.

Subcommands: sweep, rate, audit, scenario {small-dev, functional, annealed,
tail}, check.  A run is configured by one YAML file (see config module);
the only environment overrides are CORRIDORLAB_OUTPUT and
CORRIDORLAB_WORKERS.  Every run writes a manifest recording the config, the
package version and every derived seed; apart from the manifest timestamp,
reruns of the same config produce byte-identical outputs.

Exit codes: 0 success, 1 usage/configuration error, 2 a quantitative
property check failed (so CI pipelines can tell science failures from
usage failures).
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_run_config
from .env import sample_environment
from .experiments import (
    annealed_comparison,
    functional_corridor_run,
    small_deviation_run,
    tail_diagnostic,
)
from .kernels import BandSpec
from .quenched import Corridor, save_curve
from .rates import (
    GAMMA_ZERO,
    GammaCurve,
    extract_rate,
    gamma_sweep,
    property_report,
    subadditivity_audit,
    sweep_curves,
    write_gamma_curve,
)
from .seeding import seed_schedule

__all__ = ["main", "run", "seed_schedule"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CHECK_FAILED = 2


def _ensure_outdir(cfg: RunConfig) -> str:
    os.makedirs(cfg.output_dir, exist_ok=True)
    return cfg.output_dir


def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _manifest(cfg: RunConfig, seeds: dict, outputs: list) -> dict:
    return {
        "command": cfg.command,
        "version": __version__,
        "config": cfg.raw,
        "seeds": {f"beta={b:g},replica={r}": s for (b, r), s in sorted(seeds.items())},
        "outputs": sorted(outputs),
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }


def _beta_tag(beta: float) -> str:
    return f"{beta:g}".replace("-", "m")


def _run_sweep(cfg: RunConfig, with_properties: bool) -> int:
    outdir = _ensure_outdir(cfg)
    curve_dir = os.path.join(outdir, "curves")
    os.makedirs(curve_dir, exist_ok=True)
    curves, seeds = sweep_curves(
        cfg.betas,
        cfg.ensemble_size,
        cfg.horizon,
        cfg.band,
        master_seed=cfg.master_seed,
        start_window=cfg.resolved_start_window(),
        terminal_window=cfg.terminal_window,
        env_dt=cfg.env_dt,
        spatial_points=cfg.spatial_points,
        start_points=cfg.start_points,
        record_points=cfg.record_points,
        series_cfg=cfg.series,
        workers=cfg.workers,
    )
    outputs = []
    for (beta, r), curve in sorted(curves.items()):
        name = f"curve_b{_beta_tag(beta)}_r{r}.csv"
        save_curve(curve, os.path.join(curve_dir, name))
        outputs.append(os.path.join("curves", name))

    fit = cfg.resolved_fit_window()
    estimates = []
    betas_sorted = sorted(cfg.betas)
    for beta in betas_sorted:
        ens = [curves[(beta, r)] for r in range(cfg.ensemble_size)]
        estimates.append(extract_rate(ens, fit))
    gcurve = GammaCurve(
        betas=np.asarray(betas_sorted),
        estimates=tuple(estimates),
        config={"master_seed": cfg.master_seed, "horizon": cfg.horizon},
    )
    gpath = os.path.join(outdir, "gamma_curve.csv")
    write_gamma_curve(gcurve, gpath)
    outputs.append("gamma_curve.csv")

    code = EXIT_OK
    if with_properties:
        report = property_report(gcurve)
        _write_json(os.path.join(outdir, "property_report.json"), report.as_dict())
        outputs.append("property_report.json")
        for check in report.checks:
            status = {True: "PASS", False: "FAIL", None: "INFO"}[check.passed]
            print(f"[{status}] {check.name}: {check.detail}")
        if not report.passed:
            code = EXIT_CHECK_FAILED
    for beta, est in zip(betas_sorted, estimates):
        print(
            f"beta={beta:g}: gamma={est.gamma:.5f} "
            f"CI=[{est.ci_low:.5f}, {est.ci_high:.5f}] r2={est.r_squared:.5f}"
        )

    if cfg.figures:
        from .plotting import save_gamma_curve_figure, save_survival_figure

        save_gamma_curve_figure(gcurve, os.path.join(outdir, "gamma_curve.png"))
        outputs.append("gamma_curve.png")
        sample = [curves[(b, 0)] for b in betas_sorted]
        save_survival_figure(sample, os.path.join(outdir, "survival_curves.png"))
        outputs.append("survival_curves.png")

    tasks = [(b, r) for b in betas_sorted for r in range(cfg.ensemble_size)]
    seed_map = dict(zip(tasks, seed_schedule(cfg.master_seed, tasks)))
    _write_json(os.path.join(outdir, "manifest.json"), _manifest(cfg, seed_map, outputs))
    return code


def _run_audit(cfg: RunConfig) -> int:
    outdir = _ensure_outdir(cfg)
    audit_cfg = cfg.audit
    beta = float(audit_cfg.get("beta", cfg.betas[0] if cfg.betas else 1.0))
    n_env = int(audit_cfg.get("n_environments", 20))
    tolerance = float(audit_cfg.get("tolerance", 1e-6))
    checkpoints = [float(c) for c in audit_cfg.get("checkpoints", list(range(1, 11)))]
    start_window = cfg.resolved_start_window()
    corridor = Corridor(
        kind="constant_band",
        beta=beta,
        band=cfg.band,
        start_window=start_window,
        terminal_window=start_window,
    )
    labels = [(beta, r) for r in range(n_env)]
    seeds = seed_schedule(cfg.master_seed, labels)
    horizon = max(checkpoints)
    rows = []
    reports = []
    for r, seed in enumerate(seeds):
        env = sample_environment(seed, horizon, cfg.env_dt, beta)
        rep = subadditivity_audit(
            env,
            corridor,
            checkpoints,
            spatial_points=cfg.spatial_points,
            start_points=cfg.start_points,
            series_cfg=cfg.series,
            tolerance=tolerance,
        )
        reports.append(rep)
        for (m, n), v in sorted(rep.violations.items()):
            rows.append(f"{r},{seed},{m:.17g},{n:.17g},{v:.17g}")
    max_violation = max(r.max_violation for r in reports)
    passed = all(r.passed for r in reports)
    pairs_path = os.path.join(outdir, "audit_pairs.csv")
    with open(pairs_path, "w") as fh:
        fh.write("replica,seed,m,n,violation\n")
        fh.write("\n".join(rows) + "\n")
    payload = {
        "beta": beta,
        "n_environments": n_env,
        "checkpoints": checkpoints,
        "tolerance": tolerance,
        "max_violation": max_violation,
        "passed": passed,
    }
    _write_json(os.path.join(outdir, "audit_report.json"), payload)
    outputs = ["audit_pairs.csv", "audit_report.json"]
    if cfg.figures:
        from .plotting import save_audit_figure

        save_audit_figure(reports[0], os.path.join(outdir, "audit.png"))
        outputs.append("audit.png")
    _write_json(
        os.path.join(outdir, "manifest.json"),
        _manifest(cfg, dict(zip(labels, seeds)), outputs),
    )
    print(
        f"subadditivity audit: max violation {max_violation:.3e} over "
        f"{n_env} environments x {len(reports[0].violations)} pairs "
        f"-> {'PASS' if passed else 'FAIL'}"
    )
    return EXIT_OK if passed else EXIT_CHECK_FAILED


def _boundary_fn(spec):
    kind = spec.get("type", "constant")
    if kind == "constant":
        v = float(spec["value"])
        return lambda s: v
    if kind == "linear":
        intercept = float(spec.get("intercept", 0.0))
        slope = float(spec.get("slope", 0.0))
        return lambda s: intercept + slope * s
    raise ConfigError(f"unsupported boundary type {kind!r}; use constant or linear")


def _run_scenario(cfg: RunConfig, kind: str) -> int:
    outdir = _ensure_outdir(cfg)
    sc = cfg.scenario
    beta = float(sc.get("beta", cfg.betas[0] if cfg.betas else 0.0))
    tolerance = float(sc.get("tolerance", 0.05))
    ensemble = int(sc.get("ensemble_size", cfg.ensemble_size))
    predicted = sc.get("predicted_gamma")
    outputs = []
    figures = []

    if kind == "small-dev":
        alpha = float(sc.get("alpha", 0.25))
        t_grid = [float(t) for t in sc.get("t_grid", [100.0, 200.0, 400.0, 800.0])]
        result = small_deviation_run(
            alpha,
            cfg.band,
            beta,
            t_grid,
            ensemble,
            predicted_gamma=predicted,
            master_seed=cfg.master_seed,
            base_dt=cfg.env_dt,
            spatial_points=cfg.spatial_points,
            start_window=cfg.resolved_start_window(),
            series_cfg=cfg.series,
        )
    elif kind == "functional":
        lower = _boundary_fn(sc.get("lower", {"type": "constant", "value": 0.0}))
        upper = _boundary_fn(sc.get("upper", {"type": "linear", "intercept": 1.0, "slope": 0.5}))
        horizon_grid = [float(t) for t in sc.get("horizon_grid", [10.0, 20.0, 40.0])]
        result = functional_corridor_run(
            lower,
            upper,
            beta=beta,
            horizon_grid=horizon_grid,
            ensemble_size=ensemble,
            predicted_gamma=predicted,
            master_seed=cfg.master_seed,
            env_dt=cfg.env_dt,
            spatial_points=cfg.spatial_points,
            series_cfg=cfg.series,
        )
    elif kind == "annealed":
        t = float(sc.get("t", 3.0))
        report = annealed_comparison(
            cfg.band,
            beta,
            t,
            ensemble,
            master_seed=cfg.master_seed,
            env_dt=cfg.env_dt,
            spatial_points=cfg.spatial_points,
            series_cfg=cfg.series,
        )
        payload = report.__dict__.copy()
        _write_json(os.path.join(outdir, "scenario_annealed.json"), payload)
        outputs.append("scenario_annealed.json")
        ok = report.within_3se and (beta == 0.0 or report.jensen_positive)
        print(
            f"annealed comparison: mean p={report.mean_survival:.6e} "
            f"analytic={report.analytic_survival:.6e} (+-{report.stderr:.2e}) "
            f"jensen gap={report.jensen_gap:.4f} -> {'PASS' if ok else 'FAIL'}"
        )
        labels = [(beta, r) for r in range(ensemble)]
        _write_json(
            os.path.join(outdir, "manifest.json"),
            _manifest(cfg, dict(zip(labels, seed_schedule(cfg.master_seed, labels))), outputs),
        )
        return EXIT_OK if ok else EXIT_CHECK_FAILED
    elif kind == "tail":
        t = float(sc.get("t", 2.0))
        q_exponent = float(sc.get("q_exponent", 1.5))
        corridor = cfg.corridor(beta)
        report = tail_diagnostic(
            t,
            corridor,
            q_exponent,
            ensemble,
            master_seed=cfg.master_seed,
            env_dt=cfg.env_dt,
            spatial_points=cfg.spatial_points,
            start_points=cfg.start_points,
            series_cfg=cfg.series,
        )
        payload = {
            "t": report.t,
            "beta": report.beta,
            "ensemble_size": report.ensemble_size,
            "q_exponent": report.q_exponent,
            "moments": [
                {"order": j, "value": v, "stderr": se} for (j, v, se) in report.moments
            ],
            "exceedance_products": {
                f"p={p},n={n}": v for (p, n), v in sorted(report.exceedance_products.items())
            },
            "products_decreasing": {str(p): ok for p, ok in report.products_decreasing.items()},
            "passed": report.passed,
        }
        _write_json(os.path.join(outdir, "scenario_tail.json"), payload)
        outputs.append("scenario_tail.json")
        print(
            f"tail diagnostic: mean X={report.samples_mean:.3f}, "
            f"trend {'decreasing' if report.passed else 'NOT decreasing'} "
            f"-> {'PASS' if report.passed else 'FAIL'}"
        )
        labels = [(beta, r) for r in range(ensemble)] if beta != 0.0 else []
        _write_json(
            os.path.join(outdir, "manifest.json"),
            _manifest(
                cfg,
                dict(zip(labels, seed_schedule(cfg.master_seed, labels))) if labels else {},
                outputs,
            ),
        )
        return EXIT_OK if report.passed else EXIT_CHECK_FAILED
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigError(f"unknown scenario {kind!r}")

    name = f"scenario_{result.scenario_id}"
    payload = {
        "scenario_id": result.scenario_id,
        "parameters": result.parameters,
        "observed_rate": result.observed_rate,
        "predicted_rate": result.predicted_rate,
        "relative_error": result.relative_error,
        "tolerance": tolerance,
    }
    _write_json(os.path.join(outdir, f"{name}.json"), payload)
    outputs.append(f"{name}.json")
    diag = result.diagnostics
    with open(os.path.join(outdir, f"{name}.csv"), "w") as fh:
        fh.write("t,normalized_rate,stderr\n")
        for t, v, se in zip(diag["t"], diag["normalized_rate"], diag["stderr"]):
            fh.write(f"{t:.17g},{v:.17g},{se:.17g}\n")
    outputs.append(f"{name}.csv")
    if cfg.figures:
        from .plotting import save_scenario_figure

        save_scenario_figure(result, os.path.join(outdir, f"{name}.png"))
        outputs.append(f"{name}.png")
    passed = result.relative_error <= tolerance
    print(
        f"{result.scenario_id}: observed={result.observed_rate:.5f} "
        f"predicted={result.predicted_rate:.5f} "
        f"rel.err={result.relative_error:.3%} -> {'PASS' if passed else 'FAIL'}"
    )
    _write_json(os.path.join(outdir, "manifest.json"), _manifest(cfg, {}, outputs))
    return EXIT_OK if passed else EXIT_CHECK_FAILED


def _run_check(cfg: RunConfig, betas) -> int:
    outdir = _ensure_outdir(cfg)
    if not betas:
        betas = [float(b) for b in cfg.check.get("betas", [0.0])]
    tolerance = float(cfg.check.get("tolerance", 0.005))
    results = []
    passed_all = True
    for beta in sorted(betas):
        ensemble = 1 if beta == 0.0 else cfg.ensemble_size
        curve = gamma_sweep(
            [beta],
            ensemble,
            cfg.horizon,
            cfg.band,
            master_seed=cfg.master_seed,
            start_window=cfg.resolved_start_window(),
            terminal_window=cfg.terminal_window,
            env_dt=cfg.env_dt,
            spatial_points=cfg.spatial_points,
            start_points=cfg.start_points,
            fit_window=cfg.resolved_fit_window(),
            record_points=cfg.record_points,
            series_cfg=cfg.series,
            workers=cfg.workers,
        )
        est = curve.estimates[0]
        if beta == 0.0:
            target = GAMMA_ZERO
            ok = abs(est.gamma - target) <= tolerance * target
            detail = (
                f"gamma(0)={est.gamma:.5f}, CI contains {target:.4f}: "
                f"{est.ci_low <= target <= est.ci_high or ok}"
            )
        else:
            bound = math.pi * math.pi * (1.0 + beta * beta) / 2.0
            ok = est.ci_high >= bound * (1.0 - 0.03) and est.ci_low <= 4.0 * math.pi * math.pi
            detail = f"gamma({beta:g})={est.gamma:.5f} vs lower bound {bound:.5f}"
        passed_all &= ok
        results.append(
            {
                "beta": beta,
                "gamma": est.gamma,
                "ci_low": est.ci_low,
                "ci_high": est.ci_high,
                "passed": bool(ok),
                "detail": detail,
            }
        )
        print(f"[{'PASS' if ok else 'FAIL'}] check beta={beta:g}: {detail}")
    _write_json(
        os.path.join(outdir, "check_report.json"),
        {"passed": bool(passed_all), "tolerance": tolerance, "results": results},
    )
    _write_json(os.path.join(outdir, "manifest.json"), _manifest(cfg, {}, ["check_report.json"]))
    return EXIT_OK if passed_all else EXIT_CHECK_FAILED


def run(cfg: RunConfig, *, scenario_kind: str = None, check_betas=None) -> int:
    """Execute the pipeline a validated RunConfig describes."""
    if cfg.command == "sweep":
        return _run_sweep(cfg, with_properties=True)
    if cfg.command == "rate":
        return _run_sweep(cfg, with_properties=False)
    if cfg.command == "audit":
        return _run_audit(cfg)
    if cfg.command == "scenario":
        return _run_scenario(cfg, scenario_kind)
    if cfg.command == "check":
        return _run_check(cfg, check_betas)
    raise ConfigError(f"unknown command {cfg.command!r}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="corridorlab",
        description="Survival of Brownian motion in a randomly moving corridor: "
        "quenched decay rates, property checks and scenario studies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, helptext in (
        ("sweep", "estimate gamma over a beta grid and run all property checks"),
        ("rate", "estimate decay rates without property checks"),
        ("audit", "audit the chaining inequality q_{0,n} <= q_{0,m} + q_{m,n}"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", help="YAML run configuration")

    p = sub.add_parser("scenario", help="run a corollary/diagnostic scenario")
    p.add_argument("kind", choices=["small-dev", "functional", "annealed", "tail"])
    p.add_argument("config", help="YAML run configuration")

    p = sub.add_parser("check", help="quick validation run (beta=0 analytic by default)")
    p.add_argument("config", nargs="?", default=None, help="optional YAML run configuration")
    p.add_argument(
        "--beta",
        action="append",
        type=float,
        default=None,
        help="beta value to check (repeatable; default 0)",
    )
    p.add_argument("--seed", type=int, default=20260809, help="master seed when no config given")

    args = parser.parse_args(argv)
    try:
        if args.command == "check":
            cfg = load_run_config(args.config, "check", master_seed_default=args.seed)
        else:
            cfg = load_run_config(args.config, args.command)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        return run(
            cfg,
            scenario_kind=getattr(args, "kind", None),
            check_betas=getattr(args, "beta", None),
        )
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

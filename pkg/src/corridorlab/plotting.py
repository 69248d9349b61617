"""Figure rendering for report outputs.

Every figure goes straight to a file through the Agg backend; PNG output is
byte-deterministic for a fixed matplotlib version, which keeps reruns of a
pipeline reproducible.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "save_gamma_curve_figure",
    "save_survival_figure",
    "save_scenario_figure",
    "save_audit_figure",
]


def save_gamma_curve_figure(curve, path) -> None:
    """Decay constant vs beta with error bars and the analytic bounds."""
    betas = np.asarray(curve.betas)
    gammas = np.asarray([e.gamma for e in curve.estimates])
    lo = np.asarray([e.ci_low for e in curve.estimates])
    hi = np.asarray([e.ci_high for e in curve.estimates])

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.errorbar(
        betas, gammas, yerr=[gammas - lo, hi - gammas],
        fmt="o", capsize=3, color="tab:blue", label=r"estimated $\gamma(\beta)$",
    )
    bgrid = np.linspace(min(betas.min(), 0.0), max(betas.max(), 1.0), 200)
    ax.plot(
        bgrid, math.pi**2 * (1 + bgrid**2) / 2,
        "--", color="tab:gray", label=r"lower bound $\pi^2(1+\beta^2)/2$",
    )
    ax.axhline(math.pi**2 / 2, color="tab:green", lw=0.8, ls=":", label=r"$\pi^2/2$")
    if betas.max() >= 1.0:
        ax.plot([1.0], [4 * math.pi**2], "v", color="tab:red", label=r"$4\pi^2$ cap at $\beta=1$")
    ax.set_xlabel(r"$\beta$")
    ax.set_ylabel(r"$\gamma$")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_survival_figure(curves, path, max_curves: int = 12) -> None:
    """Log-survival trajectories q_t for a sample of environments."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for c in list(curves)[:max_curves]:
        ax.plot(c.times, c.log_survival, lw=0.9, alpha=0.8, label=c.environment_id)
    ax.set_xlabel("t")
    ax.set_ylabel(r"$q_t = -\ln p_t$")
    if len(list(curves)) <= 6:
        ax.legend(fontsize=7)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_scenario_figure(result, path) -> None:
    """Normalized rate against the horizon with the predicted level."""
    d = result.diagnostics
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    t = np.asarray(d.get("t", []))
    y = np.asarray(d.get("normalized_rate", []))
    se = np.asarray(d.get("stderr", np.zeros_like(y)))
    if t.size:
        ax.errorbar(t, y, yerr=se, fmt="o-", capsize=3, color="tab:blue", label="observed")
    ax.axhline(result.predicted_rate, color="tab:red", ls="--", label="predicted")
    ax.set_xscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("normalized rate")
    ax.set_title(result.scenario_id)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_audit_figure(report, path) -> None:
    """Subadditivity margins for every checkpoint pair (negative = satisfied)."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    pairs = sorted(report.violations)
    vals = [report.violations[p] for p in pairs]
    ax.axhline(0.0, color="k", lw=0.8)
    ax.axhline(report.tolerance, color="tab:red", ls="--", lw=0.8, label="tolerance")
    ax.plot(range(len(pairs)), vals, "o", ms=3, color="tab:blue")
    ax.set_xlabel("checkpoint pair index (sorted by (m, n))")
    ax.set_ylabel(r"$q_{0,n} - q_{0,m} - q_{m,n}$")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)

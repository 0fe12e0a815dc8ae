"""Figure rendering for solver runs and frequency sweeps.

Headless: the Agg backend is forced before pyplot import so the report
path works without a display.
"""

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["plot_run", "plot_sweep"]


def plot_run(run, path):
    """Component norms and the anisotropic norm against time."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    m = run.comp_norms.shape[1]
    for k in range(m):
        ax.plot(run.times, run.comp_norms[:, k], label=f"component {k + 1}", lw=1.2)
    ax.plot(run.times, run.aniso, label="anisotropic", color="k", lw=2.0)
    if np.all(run.aniso > 0):
        ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("norm")
    title = "norm history"
    if run.blowup_time is not None:
        title += f" (halted at t={run.blowup_time:.4g})"
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_sweep(sweep, path):
    """Amplification against modes on log-log axes with the fitted slope."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ns = np.array(sweep.n_values, dtype=float)
    rho = np.array(sweep.rho, dtype=float)
    finite = np.isfinite(rho)
    ax.loglog(ns[finite], rho[finite], "o-", label="rho")
    if np.any(~finite):
        ax.plot(ns[~finite], np.full(np.sum(~finite), np.nanmax(rho[finite]) if finite.any() else 1.0),
                "rx", label="blowup")
    if math.isfinite(sweep.fitted_q) and finite.sum() >= 2:
        anchor = rho[finite][0]
        ax.loglog(ns[finite], anchor * (ns[finite] / ns[finite][0]) ** sweep.fitted_q,
                  "--", color="gray", label=f"slope q={sweep.fitted_q:.3f}")
    ax.set_xlabel("N")
    ax.set_ylabel("amplification")
    ax.set_title("frequency sweep")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)

"""Matplotlib figures for the report paths.

Each renderer writes PNG files next to the delimited output of the command
that produced the data.  Everything uses the Agg backend; nothing opens a
window.
"""

from __future__ import annotations

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FIG_KW = dict(figsize=(7.0, 4.5), dpi=140)


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def kam_decay_figure(out_dir, result, name="decay.png"):
    """Sup-norm decay against the schedule, plus tail and obstruction."""
    reports = result.log.reports
    if not reports:
        return None
    ms = [r.m for r in reports]
    fig, ax = plt.subplots(**FIG_KW)
    sups = [reports[0].sup_before] + [r.sup_after for r in reports]
    ax.semilogy(range(len(sups)), sups, "o-", label=r"$\|P_m\|_{C^0}$")
    ax.semilogy(ms, [r.eps_m for r in reports], "k--",
                label=r"schedule $\epsilon_m$")
    ax.semilogy(ms, [max(r.tail, 1e-300) for r in reports], "s:",
                label="tail beyond cutoff")
    ax.semilogy(ms, [max(r.obstruction, 1e-300) for r in reports], "^:",
                label="obstruction")
    ax.set_xlabel("step m")
    ax.set_ylabel("norm")
    ax.set_title("KAM iteration decay")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    return _finish(fig, os.path.join(out_dir, name))


def kam_diagnostics_figure(out_dir, result, name="diagnostics.png"):
    reports = result.log.reports
    if not reports:
        return None
    ms = [r.m for r in reports]
    fig, axes = plt.subplots(1, 2, figsize=(10.0, 4.0), dpi=140)
    axes[0].semilogy(ms, [max(r.solver_residual, 1e-300) for r in reports],
                     "o-", label="solver residual")
    axes[0].semilogy(ms, [max(r.w_sup, 1e-300) for r in reports], "s-",
                     label=r"$\|w_m\|_{C^0}$")
    if any(r.defect > 0 for r in reports):
        axes[0].semilogy(ms, [max(r.defect, 1e-300) for r in reports], "^-",
                         label="relation defect")
    axes[0].set_xlabel("step m")
    axes[0].grid(True, which="both", alpha=0.3)
    axes[0].legend()
    axes[1].plot(ms, [r.n_solve for r in reports], "o-", label="solve cutoff")
    axes[1].plot(ms, [r.n_m for r in reports], "k--",
                 label=r"schedule $N_m$")
    axes[1].set_xlabel("step m")
    axes[1].set_ylabel("truncation degree")
    axes[1].grid(True, alpha=0.3)
    axes[1].legend()
    fig.suptitle("KAM step diagnostics")
    return _finish(fig, os.path.join(out_dir, name))


def analytic_figure(out_dir, report, name="analytic.png"):
    if not report.entries:
        return None
    fig, ax = plt.subplots(**FIG_KW)
    ms = [e.m for e in report.entries]
    ax.semilogy(ms, [max(e.weighted, 1e-300) for e in report.entries], "o-",
                label=r"$\|P_{8m}\|_{r_m}$")
    ax.semilogy(ms, [e.eps_m for e in report.entries], "k--",
                label=r"$\epsilon_m$")
    ax.set_xlabel("subsequence index m  (step 8m)")
    ax.set_title("weighted-norm tracking on shrinking radii")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    return _finish(fig, os.path.join(out_dir, name))


def diophantine_figure(out_path, report):
    """Log-log scatter of per-block minima with the fitted envelope."""
    pts = [(r.lam, r.min_nonzero) for r in report.per_block
           if r.sqnorm > 0 and r.min_nonzero > 0]
    fig, ax = plt.subplots(**FIG_KW)
    if pts:
        lam = np.array([p[0] for p in pts])
        mn = np.array([p[1] for p in pts])
        ax.loglog(1.0 + lam, mn, ".", ms=4, alpha=0.6,
                  label="per-block min nonzero eigenvalue")
        if report.sigma > 0:
            xs = np.geomspace(1.0 + min(lam), 1.0 + max(lam), 64)
            ax.loglog(xs, report.sigma / xs ** report.tau, "r-",
                      label=(rf"$\sigma/(1+\lambda)^\tau$, "
                             rf"$\sigma$={report.sigma:.3g}, "
                             rf"$\tau$={report.tau:.3g}"))
    kern = [(r.lam, r.kernel_dim) for r in report.per_block
            if r.kernel_dim > 0 and r.sqnorm > 0]
    if kern:
        for lamk, _ in kern[:1]:
            ax.axvline(1.0 + lamk, color="gray", ls=":", alpha=0.5)
        ax.plot([], [], color="gray", ls=":",
                label=f"{len(kern)} blocks carry kernel modes")
    ax.set_xlabel(r"$1+\lambda$")
    ax.set_ylabel("min nonzero eigenvalue")
    ax.set_title(f"Diophantine scan, flavor {report.flavor!r}")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    return _finish(fig, out_path)


def spectrum_figure(out_path, rows):
    """rows: list of (lam, eigenvalue, which) for a few blocks."""
    fig, ax = plt.subplots(**FIG_KW)
    markers = {"d0d0*": "o", "d1*d1": "s", "box": "^"}
    for which in ("d0d0*", "d1*d1", "box"):
        sel = [(l, e) for l, e, w in rows if w == which]
        if sel:
            ax.plot([s[0] for s in sel], [s[1] for s in sel],
                    markers[which], alpha=0.6, ls="", label=which)
    ax.set_xlabel(r"$\lambda$")
    ax.set_ylabel("eigenvalue")
    ax.set_title("blockwise spectra")
    ax.grid(True, alpha=0.3)
    ax.legend()
    return _finish(fig, out_path)

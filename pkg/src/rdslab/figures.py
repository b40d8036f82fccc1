"""Matplotlib renderings of the report CSVs, written next to them as PNGs.

Every plot here visualises data that is also emitted as a delimited file;
the figures are a convenience layer, not the primary output.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .dynamics import EmpiricalDensity, TimeSeriesDataset
from .trace import ChainTrace

_DPI = 130


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def dataset_figure(ds: TimeSeriesDataset, path, title: str = "") -> Path:
    """Orbit trace and marginal histogram of an observed series."""
    fig, (ax1, ax2) = plt.subplots(
        1, 2, figsize=(9, 3), gridspec_kw={"width_ratios": [3, 1]}, sharey=True
    )
    idx = np.arange(1, ds.n + 1)
    ax1.plot(idx, ds.observations, lw=0.6, color="tab:blue")
    ax1.set_xlabel("index")
    ax1.set_ylabel("x")
    if title:
        ax1.set_title(title)
    ax2.hist(
        ds.observations, bins=40, orientation="horizontal", color="tab:blue", alpha=0.7
    )
    ax2.set_xlabel("count")
    return _save(fig, path)


def density_overlay_figure(
    densities: list[tuple[str, EmpiricalDensity]],
    path,
    title: str = "",
    marks: list[float] | None = None,
    xlabel: str = "x",
) -> Path:
    """Superimposed grid densities, optionally with vertical marker lines."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for label, dens in densities:
        ax.plot(dens.grid, dens.mass, lw=1.2, label=label)
    for m in marks or []:
        ax.axvline(m, color="gray", ls=":", lw=0.8)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("density")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    return _save(fig, path)


def ergodic_figure(trace: ChainTrace, path, title: str = "") -> Path:
    """Running ergodic averages of every coefficient chain."""
    mp1 = trace.theta.shape[1]
    ncols = 3
    nrows = (mp1 + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(3 * ncols, 2.2 * nrows))
    steps = np.arange(1, trace.records + 1)
    for j in range(mp1):
        ax = axes.flat[j]
        run = np.cumsum(trace.theta[:, j]) / steps
        ax.plot(steps, run, lw=0.8)
        ax.set_title(f"theta_{j}", fontsize=9)
    for k in range(mp1, nrows * ncols):
        axes.flat[k].axis("off")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return _save(fig, path)


def barrier_figure(
    horizon_densities: list[tuple[int, EmpiricalDensity]],
    reference: EmpiricalDensity,
    path,
    truth: np.ndarray | None = None,
    title: str = "",
) -> Path:
    """Posterior predictive marginals against the long-run reference density."""
    k = len(horizon_densities)
    ncols = min(5, k)
    nrows = (k + ncols - 1) // ncols
    fig, axes = plt.subplots(
        nrows, ncols, figsize=(2.6 * ncols, 2.2 * nrows), sharex=True, sharey=True
    )
    axes = np.atleast_1d(axes).ravel()
    for ax, (h, dens) in zip(axes, horizon_densities):
        ax.plot(reference.grid, reference.mass, color="black", lw=1.0, label="long-run")
        ax.plot(dens.grid, dens.mass, color="tab:red", lw=1.0, label="predictive")
        if truth is not None and h - 1 < truth.size:
            ax.plot([truth[h - 1]], [0], marker="o", color="tab:blue", ms=4)
        ax.set_title(f"horizon {h}", fontsize=9)
    for ax in axes[k:]:
        ax.axis("off")
    axes[0].legend(fontsize=7)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return _save(fig, path)


def omega_curves_figure(curves: dict[str, tuple[np.ndarray, np.ndarray]], path) -> Path:
    """Forecastability index as a function of the sample size."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for label, (ns, oms) in curves.items():
        ax.plot(ns, oms, marker="o", ms=3, lw=1.0, label=label)
    ax.set_xlabel("series length n")
    ax.set_ylabel("forecastability")
    ax.set_ylim(0, 1)
    ax.legend(fontsize=8)
    return _save(fig, path)

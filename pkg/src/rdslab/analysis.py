"""Post-hoc estimators and diagnostics over chain traces and series.

Blocked sampling-mean and histogram-MAP estimators, percentage absolute
relative errors, Gaussian KDE, running ergodic averages, approximate
entropy, spectral forecastability, and L1 distances between grid
densities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .dynamics import EmpiricalDensity


@dataclass(frozen=True)
class EstimatorConfig:
    """Block structure for the sampling-mean estimator plus binning/KDE knobs."""

    K: int = 47
    N: int = 10_000
    s: int = 500
    bins: int = 300
    range: tuple[float, float] = (-2.0, 2.0)
    kde_bandwidth: float | str = "auto"

    def __post_init__(self):
        if min(self.K, self.N, self.bins) < 1 or self.s < 0:
            raise ValueError("K, N, bins must be >= 1 and s >= 0")
        if not self.range[0] < self.range[1]:
            raise ValueError("range must be increasing")

    @classmethod
    def scaled_to(cls, length: int, N: int = 10_000, s: int = 500, **kw) -> "EstimatorConfig":
        """Config with as many blocks as ``length`` supports (at most 47)."""
        K = min(47, length // (N + s))
        if K < 1:
            N = max(1, length // 2)
            s = 0
            K = length // N
        return cls(K=K, N=N, s=s, **kw)


def sm_estimate(column: np.ndarray, config: EstimatorConfig) -> float:
    """Mean of K block means of size N, blocks separated by s samples."""
    column = np.asarray(column)
    needed = config.K * (config.N + config.s)
    if column.size < needed:
        raise ValueError(
            f"column has {column.size} samples; SM estimator needs >= {needed}"
        )
    block_means = [
        column[r * (config.N + config.s) : r * (config.N + config.s) + config.N].mean()
        for r in range(config.K)
    ]
    return float(np.mean(block_means))


def map_estimate(samples: np.ndarray, bins: int, hist_range: tuple[float, float]) -> float:
    """Midpoint of the modal histogram bin; ties break towards the median.

    Raises if no sample lands inside ``hist_range``.
    """
    samples = np.asarray(samples)
    if samples.size == 0:
        raise ValueError("empty sample")
    counts, edges = np.histogram(samples, bins=bins, range=hist_range)
    if counts.sum() == 0:
        raise ValueError("all samples fall outside the histogram range")
    centers = 0.5 * (edges[:-1] + edges[1:])
    best = np.flatnonzero(counts == counts.max())
    if best.size > 1:
        med = np.median(samples)
        best = best[np.argmin(np.abs(centers[best] - med))]
    else:
        best = best[0]
    return float(centers[best])


def pare(true_value: float, estimate: float) -> float:
    """Percentage absolute relative error 100 |est - true| / |true|."""
    if true_value == 0.0:
        raise ValueError("PARE undefined for zero truth; use absolute error")
    return 100.0 * abs(estimate - true_value) / abs(true_value)


def silverman_bandwidth(samples: np.ndarray) -> float:
    """0.9 min(sd, IQR/1.34) n^(-1/5), floored at 1e-6."""
    samples = np.asarray(samples)
    sd = samples.std()
    q75, q25 = np.percentile(samples, [75, 25])
    iqr = q75 - q25
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    bw = 0.9 * spread * samples.size ** (-0.2)
    return max(float(bw), 1e-6)


def kde(
    samples: np.ndarray,
    grid: np.ndarray,
    bandwidth: float | str = "auto",
) -> EmpiricalDensity:
    """Gaussian-kernel density on a uniform grid, renormalised to mass 1.

    ``bandwidth="auto"`` applies Silverman's rule; zero-variance samples
    degrade gracefully to a spike via the bandwidth floor.
    """
    samples = np.asarray(samples, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if samples.size == 0:
        raise ValueError("empty sample")
    if grid.size < 2:
        raise ValueError("grid needs at least two points")
    h = silverman_bandwidth(samples) if bandwidth == "auto" else max(float(bandwidth), 1e-6)
    width = float(grid[1] - grid[0])
    # chunk over samples to bound the broadcast size
    dens = np.zeros_like(grid)
    step = max(1, int(4e6 // grid.size))
    for k in range(0, samples.size, step):
        chunk = samples[k : k + step]
        dens += np.exp(-0.5 * ((grid[:, None] - chunk[None, :]) / h) ** 2).sum(axis=1)
    dens /= samples.size * h * math.sqrt(2.0 * math.pi)
    total = dens.sum() * width
    if total <= 0:
        raise ValueError("grid does not cover the sample")
    return EmpiricalDensity(grid=grid, mass=dens / total, bin_width=width)


def ergodic_average(column: np.ndarray) -> np.ndarray:
    """Running means, same length as the input."""
    column = np.asarray(column, dtype=float)
    return np.cumsum(column) / np.arange(1, column.size + 1)


def apen(series: np.ndarray, m_embed: int = 2, r_tol: float | None = None) -> float:
    """Approximate entropy ApEn(m, r) with max-norm template matching.

    ``r_tol`` defaults to 0.2 times the sample standard deviation.
    Constant series return 0 by convention.
    """
    series = np.asarray(series, dtype=float)
    n = series.size
    if n <= m_embed + 1:
        raise ValueError("series too short for the embedding dimension")
    sd = series.std()
    if sd == 0.0:
        return 0.0
    r = 0.2 * sd if r_tol is None else float(r_tol)

    def phi(m: int) -> float:
        count = n - m + 1
        emb = np.lib.stride_tricks.sliding_window_view(series, m)
        dist = np.abs(emb[:, None, :] - emb[None, :, :]).max(axis=2)
        c = (dist <= r).sum(axis=1) / count
        return float(np.mean(np.log(c)))

    return phi(m_embed) - phi(m_embed + 1)


def omega(
    series: np.ndarray,
    segment_len: int | None = None,
    overlap: float = 0.5,
) -> float:
    """Forecastability: one minus the normalised spectral entropy.

    The spectral density comes from Hann-windowed overlapping segment
    averaging; it is normalised to a probability over the positive
    frequencies, whose count also normalises the entropy so the result
    lies in [0, 1] exactly (0 for a flat spectrum, 1 for a pure tone).
    """
    series = np.asarray(series, dtype=float)
    n = series.size
    if segment_len is None:
        segment_len = max(2, (n // 4) // 2 * 2)
    if n < 2 * segment_len:
        raise ValueError(f"series length {n} < 2 * segment_len {segment_len}")
    freqs, psd = signal.welch(
        series,
        window="hann",
        nperseg=segment_len,
        noverlap=int(segment_len * overlap),
        detrend="constant",
    )
    psd = psd[freqs > 0]
    total = psd.sum()
    if total <= 0:
        raise ValueError("zero spectral power (constant series?)")
    q = psd / total
    q = q[q > 0]
    entropy = float(-(q * np.log(q)).sum())
    return 1.0 - entropy / math.log(psd.size)


def l1_distance(d1: EmpiricalDensity, d2: EmpiricalDensity) -> float:
    """L1 distance after linear interpolation onto the finer common grid.

    Densities with disjoint supports return 2, the maximum possible.
    """
    lo1, hi1 = d1.grid[0] - d1.bin_width / 2, d1.grid[-1] + d1.bin_width / 2
    lo2, hi2 = d2.grid[0] - d2.bin_width / 2, d2.grid[-1] + d2.bin_width / 2
    if hi1 <= lo2 or hi2 <= lo1:
        return 2.0
    width = min(d1.bin_width, d2.bin_width)
    lo, hi = min(lo1, lo2), max(hi1, hi2)
    grid = np.arange(lo + width / 2, hi, width)
    a = np.interp(grid, d1.grid, d1.mass, left=0.0, right=0.0)
    b = np.interp(grid, d2.grid, d2.mass, left=0.0, right=0.0)
    return float(np.abs(a - b).sum() * width)

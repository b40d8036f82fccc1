"""Report generation: PARE tables, density grids, diagnostics, figures.

Takes one dataset plus any number of traces over it and emits the CSV
tables shaped like the experiment summaries (coefficient and
out-of-sample PARE grids, density overlays, ergodic averages, complexity
indices), with matplotlib renderings of the same data next to them.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import analysis, figures
from .analysis import EstimatorConfig
from .config import AnalysisConfig
from .dynamics import (
    EmpiricalDensity,
    TimeSeriesDataset,
    quasi_invariant_samples,
    tail_fatness,
)
from .polyalg import real_roots
from .trace import ChainTrace


def preimage_targets(dataset: TimeSeriesDataset) -> np.ndarray:
    """Sorted real preimages of g(x0_true): the modes of the x0 posterior."""
    if dataset.map_true is None or dataset.x0_true is None:
        raise ValueError("dataset carries no generating map")
    pmap = dataset.map_true
    target = pmap(dataset.x0_true)
    coeffs = np.asarray(pmap.coefficients, dtype=float)
    coeffs = coeffs.copy()
    coeffs[0] -= target
    return real_roots(coeffs)


def preimage_labels(count: int) -> list[str]:
    """Position labels: L/M/R for three preimages, x_1.. otherwise."""
    if count == 3:
        return ["x_L", "x_M", "x_R"]
    return [f"x_{i + 1}" for i in range(count)]


def _sm_config(records: int, acfg: AnalysisConfig) -> EstimatorConfig:
    return EstimatorConfig.scaled_to(
        records, N=min(acfg.sm_block, max(1, records // 2)), s=acfg.sm_sep,
        bins=acfg.bins, range=acfg.range,
    )


def _pare_or_abs(true_value: float, estimate: float) -> float:
    """PARE, or absolute error x100 for zero-truth entries."""
    if true_value == 0.0:
        return 100.0 * abs(estimate)
    return analysis.pare(true_value, estimate)


def _map_estimate_robust(samples: np.ndarray, bins: int, hist_range) -> float:
    """MAP with a fallback range when the configured bins miss the sample."""
    try:
        return analysis.map_estimate(samples, bins, hist_range)
    except ValueError:
        lo, hi = np.percentile(samples, [0.5, 99.5])
        if not lo < hi:
            lo, hi = lo - 1e-6, hi + 1e-6
        return analysis.map_estimate(samples, bins, (float(lo), float(hi)))


def theta_pare_rows(
    traces: dict[str, ChainTrace], dataset: TimeSeriesDataset, acfg: AnalysisConfig
) -> tuple[list[str], list[list]]:
    """Coefficient and x0 PARE table (sampler per row).

    Zero-truth coefficients report absolute error x100 instead (relative
    error is undefined); the zero_truth row flags them.
    """
    truth = np.zeros(max(t.m for t in traces.values()) + 1)
    tc = np.asarray(dataset.map_true.coefficients)
    truth[: tc.size] = tc
    preimages = preimage_targets(dataset)
    labels = preimage_labels(preimages.size)

    header = ["sampler"] + [f"theta_{j}" for j in range(truth.size)] + [
        "x0_label", "x0_pare", "x0_map",
    ]
    rows = []
    rows.append(
        ["zero_truth"] + [int(truth[j] == 0.0) for j in range(truth.size)] + ["", "", ""]
    )
    for name, tr in traces.items():
        cfg = _sm_config(tr.records, acfg)
        ests = [analysis.sm_estimate(tr.theta_column(j), cfg) for j in range(tr.m + 1)]
        pares = [round(_pare_or_abs(truth[j], ests[j]), 4) for j in range(tr.m + 1)]
        x0_map = _map_estimate_robust(tr.x0, acfg.bins, acfg.range)
        nearest = int(np.argmin(np.abs(preimages - x0_map)))
        x0_pare = _pare_or_abs(preimages[nearest], x0_map)
        rows.append([name] + pares + [labels[nearest], round(x0_pare, 4), round(x0_map, 6)])
    return header, rows


def future_pare_rows(
    traces: dict[str, ChainTrace],
    dataset: TimeSeriesDataset,
    acfg: AnalysisConfig,
    horizons: int = 5,
) -> tuple[list[str], list[list]]:
    """Out-of-sample PARE table: sampler x estimator over the first horizons."""
    if dataset.future_truth is None:
        raise ValueError("dataset has no held-out future values")
    header = ["sampler", "estimator"] + [
        f"x_{dataset.n + j + 1}" for j in range(horizons)
    ] + ["average"]
    rows = []
    for name, tr in traces.items():
        hmax = min(horizons, tr.T, dataset.future_truth.size)
        cfg = _sm_config(tr.records, acfg)
        for est_name in ("SM", "MAP"):
            vals = []
            for j in range(hmax):
                col = tr.future_column(j + 1)
                if est_name == "SM":
                    est = analysis.sm_estimate(col, cfg)
                else:
                    est = _map_estimate_robust(col, acfg.bins, acfg.range)
                vals.append(_pare_or_abs(float(dataset.future_truth[j]), est))
            if not vals:
                continue
            rows.append(
                [name, est_name]
                + [round(v, 4) for v in vals]
                + [round(float(np.mean(vals)), 4)]
            )
    return header, rows


def write_csv(path, header: list[str], rows: list[list]) -> Path:
    path = Path(path)
    lines = [",".join(str(h) for h in header)]
    lines += [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def density_table(path, grid: np.ndarray, columns: dict[str, np.ndarray]) -> Path:
    header = ["grid"] + list(columns)
    rows = [
        [repr(float(g))] + [repr(float(col[i])) for col in columns.values()]
        for i, g in enumerate(grid)
    ]
    return write_csv(path, header, rows)


def true_noise_density(dataset: TimeSeriesDataset, grid: np.ndarray) -> EmpiricalDensity:
    mass = dataset.noise_true.pdf(grid)
    width = float(grid[1] - grid[0])
    return EmpiricalDensity(grid=grid, mass=mass / (mass.sum() * width), bin_width=width)


class ReportBuilder:
    """Accumulates analysis outputs for one dataset into a directory."""

    def __init__(
        self,
        outdir,
        dataset: TimeSeriesDataset,
        traces: dict[str, ChainTrace],
        acfg: AnalysisConfig | None = None,
        render_figures: bool = True,
    ):
        self.outdir = Path(outdir)
        self.outdir.mkdir(parents=True, exist_ok=True)
        self.dataset = dataset
        self.traces = traces
        self.acfg = acfg or AnalysisConfig()
        self.render = render_figures
        self.written: list[Path] = []
        self._quasi: np.ndarray | None = None

    def _emit(self, path) -> None:
        self.written.append(Path(path))

    # -- individual sections -------------------------------------------

    def pare_tables(self) -> None:
        if self.dataset.map_true is None:
            return
        header, rows = theta_pare_rows(self.traces, self.dataset, self.acfg)
        self._emit(write_csv(self.outdir / "pare_theta.csv", header, rows))
        if self.dataset.future_truth is not None and any(
            t.T > 0 for t in self.traces.values()
        ):
            header, rows = future_pare_rows(self.traces, self.dataset, self.acfg)
            self._emit(write_csv(self.outdir / "pare_future.csv", header, rows))

    def noise_density(self) -> None:
        spread = max(
            float(np.percentile(np.abs(t.z_pred), 99.5)) for t in self.traces.values()
        )
        lim = min(max(spread, 1e-3), 5.0)
        grid = np.linspace(-lim, lim, self.acfg.kde_points)
        cols: dict[str, np.ndarray] = {}
        overlays = []
        if self.dataset.noise_true is not None:
            td = true_noise_density(self.dataset, grid)
            cols["true"] = td.mass
            overlays.append(("true", td))
        for name, tr in self.traces.items():
            z = tr.z_pred[np.abs(tr.z_pred) <= lim]
            if z.size < 10:
                continue
            dens = analysis.kde(z, grid)
            cols[name] = dens.mass
            overlays.append((name, dens))
        self._emit(density_table(self.outdir / "density_noise.csv", grid, cols))
        if self.render and overlays:
            self._emit(
                figures.density_overlay_figure(
                    overlays, self.outdir / "density_noise.png",
                    title="noise predictive vs truth", xlabel="z",
                )
            )

    def x0_density(self) -> None:
        grid = np.linspace(self.acfg.range[0], self.acfg.range[1], self.acfg.kde_points)
        cols = {}
        overlays = []
        for name, tr in self.traces.items():
            inside = tr.x0[(tr.x0 >= grid[0]) & (tr.x0 <= grid[-1])]
            if inside.size < 10:
                continue
            dens = analysis.kde(inside, grid)
            cols[name] = dens.mass
            overlays.append((name, dens))
        marks = []
        if self.dataset.map_true is not None:
            marks = [float(v) for v in preimage_targets(self.dataset)]
            rows = [
                [lab, round(val, 6)]
                for lab, val in zip(preimage_labels(len(marks)), marks)
            ]
            self._emit(write_csv(self.outdir / "preimages.csv", ["label", "x"], rows))
        if cols:
            self._emit(density_table(self.outdir / "density_x0.csv", grid, cols))
        if self.render and overlays:
            self._emit(
                figures.density_overlay_figure(
                    overlays, self.outdir / "density_x0.png",
                    title="initial-condition posterior", marks=marks, xlabel="x0",
                )
            )

    def _quasi_samples(self, n_long: int = 500_000) -> np.ndarray | None:
        if self.dataset.map_true is None or self.dataset.noise_true is None:
            return None
        if self._quasi is None:
            self._quasi = quasi_invariant_samples(
                self.dataset.map_true,
                self.dataset.noise_true,
                float(self.dataset.x0_true),
                n_long=n_long,
                burn=1000,
                seed=2_000 + (self.dataset.seed or 0),
            )
        return self._quasi

    def prediction_barrier(self) -> None:
        with_future = {n: t for n, t in self.traces.items() if t.T > 0}
        if not with_future:
            return
        T = max(t.T for t in with_future.values())
        horizons = sorted({h for h in [*range(1, 6), *range(T - 4, T + 1)] if 1 <= h <= T})
        quasi = self._quasi_samples()
        grid = np.linspace(self.acfg.range[0], self.acfg.range[1], self.acfg.kde_points)
        quasi_kde = analysis.kde(quasi, grid) if quasi is not None else None

        l1_rows = []
        for name, tr in with_future.items():
            panel = []
            for h in horizons:
                dens = analysis.kde(tr.future_column(h), grid)
                panel.append((h, dens))
                cols = {name: dens.mass}
                if quasi_kde is not None:
                    cols["quasi_invariant"] = quasi_kde.mass
                    l1_rows.append(
                        [name, h, round(analysis.l1_distance(dens, quasi_kde), 5)]
                    )
                self._emit(
                    density_table(
                        self.outdir / f"density_future_{name}_h{h}.csv", grid, cols
                    )
                )
            if self.render:
                self._emit(
                    figures.barrier_figure(
                        panel,
                        quasi_kde if quasi_kde is not None else panel[0][1],
                        self.outdir / f"barrier_{name}.png",
                        truth=self.dataset.future_truth,
                        title=f"{name}: predictive marginals vs long-run density",
                    )
                )
        if l1_rows:
            self._emit(
                write_csv(
                    self.outdir / "barrier_l1.csv", ["sampler", "horizon", "l1"], l1_rows
                )
            )
        if quasi is not None:
            qd = analysis.kde(quasi, grid)
            self._emit(
                density_table(
                    self.outdir / "density_quasi_invariant.csv", grid,
                    {"quasi_invariant": qd.mass},
                )
            )

    def ergodic_averages(self, max_rows: int = 4000) -> None:
        for name, tr in self.traces.items():
            stride = max(1, tr.records // max_rows)
            idx = np.arange(0, tr.records, stride)
            run = np.cumsum(tr.theta, axis=0) / np.arange(1, tr.records + 1)[:, None]
            header = ["record"] + [f"theta_{j}" for j in range(tr.m + 1)]
            rows = [
                [int(i + 1)] + [repr(float(v)) for v in run[i]] for i in idx
            ]
            self._emit(write_csv(self.outdir / f"ergodic_{name}.csv", header, rows))
            if self.render:
                self._emit(
                    figures.ergodic_figure(
                        tr, self.outdir / f"ergodic_{name}.png", title=name
                    )
                )

    def complexity(self) -> None:
        obs = self.dataset.observations
        rows = [
            ["apen", round(analysis.apen(obs), 5)],
            ["omega", round(analysis.omega(obs), 5)],
        ]
        if self.dataset.noise_true is not None:
            rows.append(["tail_fatness", round(tail_fatness(self.dataset.noise_true), 6)])
        self._emit(write_csv(self.outdir / "complexity.csv", ["metric", "value"], rows))

    def timing(self) -> None:
        rows = [
            [
                name,
                tr.meta.get("T", ""),
                round(tr.meta.get("seconds_per_1k_iterations", float("nan")), 4),
                tr.iterations,
                sum(tr.rejections.values()),
            ]
            for name, tr in self.traces.items()
        ]
        self._emit(
            write_csv(
                self.outdir / "timing.csv",
                ["sampler", "T", "seconds_per_1k_iterations", "iterations", "rejections"],
                rows,
            )
        )

    def dataset_figure(self) -> None:
        if self.render:
            self._emit(
                figures.dataset_figure(
                    self.dataset, self.outdir / "dataset.png", title="observed series"
                )
            )

    def run_all(self) -> list[Path]:
        self.dataset_figure()
        self.pare_tables()
        self.noise_density()
        self.x0_density()
        self.prediction_barrier()
        self.ergodic_averages()
        self.complexity()
        self.timing()
        return self.written

"""Batch experiment front door.

Subcommands::

    rdslab generate   write a dataset (preset or explicit config)
    rdslab fit        run a sampler over a dataset, write the trace
    rdslab analyze    build report tables + figures from traces
    rdslab reproduce  one-command recipes for the benchmark experiments

Exit codes: 0 success, 1 configuration/validation error, 2 numerical
failure.  The default output root comes from RDSLAB_OUT (else the
current directory).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .config import (
    ALGORITHMS,
    AnalysisConfig,
    ConfigError,
    DATASET_PRESETS,
    ExperimentConfig,
    GeneratorConfig,
    SamplerConfig,
    load_config,
    save_config,
)
from .dynamics import (
    NoiseTooStrongError,
    OrbitEscapeError,
    TimeSeriesDataset,
    generate_series,
    load_dataset,
    save_dataset,
)
from .gsbr import run_gsbr
from .parametric import run_param
from .rdpr import run_rdpr
from .report import ReportBuilder, write_csv
from .trace import ChainTrace

RUNNERS = {"gsbr": run_gsbr, "rdpr": run_rdpr, "param": run_param}

REPRODUCE_IDS = ("table1", "table3", "table4", "appendixC", "fig2", "fig5-barrier")


def _output_root(value: str | None) -> Path:
    if value:
        return Path(value)
    return Path(os.environ.get("RDSLAB_OUT", "."))


def _generate_dataset(gen: GeneratorConfig) -> TimeSeriesDataset:
    pmap, noise, x0, n, seed, horizon = gen.build()
    return generate_series(pmap, noise, x0, n, seed, horizon=horizon)


def cmd_generate(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        gen = cfg.generator
    else:
        gen = GeneratorConfig.from_dict(
            {"preset": args.preset, **({"seed": args.seed} if args.seed is not None else {})}
            if args.preset
            else {}
        )
    outdir = _output_root(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    ds = _generate_dataset(gen)
    csv_path = outdir / f"{args.name}.csv"
    save_dataset(ds, csv_path)
    save_config(
        ExperimentConfig(generator=gen), outdir / f"{args.name}.config.json"
    )
    print(f"wrote {csv_path} (n={ds.n}, horizon={0 if ds.future_truth is None else len(ds.future_truth)})")
    return 0


def run_sampler(
    algorithm: str,
    dataset: TimeSeriesDataset,
    scfg: SamplerConfig,
) -> ChainTrace:
    runner = RUNNERS[algorithm]
    return runner(
        dataset,
        scfg.build_prior(),
        T=scfg.T,
        iterations=scfg.iterations,
        burn=scfg.burn,
        thin=scfg.thin,
        rng=scfg.seed,
        degree=scfg.degree,
    )


def _apply_overrides(scfg: SamplerConfig, args) -> SamplerConfig:
    d = scfg.__dict__.copy()
    for field in ("algorithm", "prior", "T", "iterations", "burn", "thin", "seed"):
        v = getattr(args, field, None)
        if v is not None:
            d[field] = v
    return SamplerConfig.from_dict(d, "sampler")


def cmd_fit(args) -> int:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    scfg = _apply_overrides(cfg.sampler, args)
    ds = load_dataset(args.dataset)
    outdir = _output_root(args.out)
    outdir.mkdir(parents=True, exist_ok=True)

    trace = run_sampler(scfg.algorithm, ds, scfg)
    name = args.name or f"trace_{scfg.algorithm}"
    trace.meta["dataset"] = str(args.dataset)
    trace.meta["seed"] = scfg.seed
    trace.to_csv(outdir / f"{name}.csv")
    save_config(
        ExperimentConfig(generator=cfg.generator, sampler=scfg),
        outdir / f"{name}.config.json",
    )
    print(
        f"wrote {outdir / (name + '.csv')} "
        f"({trace.records} records, {trace.meta['seconds_per_1k_iterations']:.2f} s/1e3 iters)"
    )
    return 0


def cmd_analyze(args) -> int:
    ds = load_dataset(args.dataset)
    traces: dict[str, ChainTrace] = {}
    for path in args.trace:
        tr = ChainTrace.from_csv(path)
        label = tr.sampler if tr.sampler not in traces else Path(path).stem
        if tr.meta.get("dataset") and Path(tr.meta["dataset"]).name != Path(args.dataset).name:
            raise ConfigError(
                f"trace {path} was fit on {tr.meta['dataset']}, not {args.dataset}"
            )
        traces[label] = tr
    if not traces:
        raise ConfigError("analyze needs at least one --trace")
    acfg = load_config(args.config).analysis if args.config else AnalysisConfig()
    outdir = _output_root(args.out)
    builder = ReportBuilder(outdir, ds, traces, acfg, render_figures=not args.no_figures)
    written = builder.run_all()
    for p in written:
        print(f"wrote {p}")
    return 0


# ---------------------------------------------------------------------------
# Reproduction recipes
# ---------------------------------------------------------------------------


def _recipe_runs(experiment: str, full: bool, iterations, burn):
    """(dataset presets, [(algorithm, prior)], T) for each experiment id."""
    its = iterations or (500_000 if full else 100_000)
    brn = burn if burn is not None else 10_000
    if experiment == "table1":
        return ["cubic-f1"], [("param", "informative"), ("rdpr", "informative"), ("gsbr", "informative")], 20, its, brn
    if experiment in ("table3", "table4"):
        presets = ["cubic-f21", "cubic-f22", "cubic-f23", "cubic-f24"]
        return presets, [("gsbr", "noninformative"), ("param", "noninformative")], 20, its, brn
    if experiment == "appendixC":
        return ["logistic-f24"], [("gsbr", "noninformative"), ("param", "noninformative")], 20, its, brn
    if experiment == "fig5-barrier":
        return ["cubic-f1"], [("gsbr", "informative")], 20, its, brn
    raise ConfigError(f"unknown experiment id {experiment!r}")


def _reproduce_fig2(outdir: Path, render: bool) -> None:
    from .analysis import omega

    curves = {}
    ns = np.arange(50, 281, 10)
    for preset in ("cubic-f1", "cubic-f21", "cubic-f22", "cubic-f23", "cubic-f24"):
        gen = GeneratorConfig(preset=preset, horizon=0)
        pmap, noise, x0, _, seed, _ = gen.build()
        ds = generate_series(pmap, noise, x0, int(ns[-1]), seed)
        omegas = np.array([omega(ds.observations[:k]) for k in ns])
        curves[preset] = (ns, omegas)
    rows = [
        [int(n)] + [repr(float(curves[p][1][i])) for p in curves]
        for i, n in enumerate(ns)
    ]
    write_csv(outdir / "omega_curves.csv", ["n"] + list(curves), rows)
    if render:
        from . import figures

        figures.omega_curves_figure(curves, outdir / "omega_curves.png")


def cmd_reproduce(args) -> int:
    outroot = _output_root(args.out) / args.experiment
    outroot.mkdir(parents=True, exist_ok=True)

    if args.experiment == "fig2":
        _reproduce_fig2(outroot, render=not args.no_figures)
        print(f"wrote {outroot}/omega_curves.csv")
        return 0

    presets, algos, T, iterations, burn = _recipe_runs(
        args.experiment, args.full, args.iterations, args.burn
    )
    for preset in presets:
        subdir = outroot / preset
        subdir.mkdir(parents=True, exist_ok=True)
        gen = GeneratorConfig(preset=preset, horizon=T)
        ds = _generate_dataset(gen)
        save_dataset(ds, subdir / "dataset.csv")

        traces = {}
        for k, (algo, prior) in enumerate(algos):
            scfg = SamplerConfig(
                algorithm=algo, prior=prior, T=T, iterations=iterations,
                burn=burn, thin=1, seed=args.seed + k, degree=5,
            )
            print(f"[{preset}] running {algo} ({iterations} iterations)...", flush=True)
            t0 = time.perf_counter()
            tr = run_sampler(algo, ds, scfg)
            print(f"[{preset}] {algo} done in {time.perf_counter() - t0:.0f}s", flush=True)
            tr.meta["dataset"] = str(subdir / "dataset.csv")
            tr.to_csv(subdir / f"trace_{algo}.csv")
            traces[algo] = tr
            save_config(
                ExperimentConfig(generator=gen, sampler=scfg),
                subdir / f"trace_{algo}.config.json",
            )
        builder = ReportBuilder(
            subdir, ds, traces, AnalysisConfig(), render_figures=not args.no_figures
        )
        builder.run_all()
        print(f"[{preset}] report written to {subdir}")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="rdslab",
        description="Reconstruction and prediction of noisy polynomial dynamical systems",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset")
    g.add_argument("--preset", choices=sorted(DATASET_PRESETS))
    g.add_argument("--config", help="experiment config JSON")
    g.add_argument("--seed", type=int, help="override the preset seed")
    g.add_argument("--out", help="output directory")
    g.add_argument("--name", default="dataset", help="basename for the CSV")
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", help="run a sampler over a dataset")
    f.add_argument("--dataset", required=True, help="dataset CSV path")
    f.add_argument("--config", help="experiment config JSON")
    f.add_argument("--algorithm", choices=ALGORITHMS)
    f.add_argument("--prior", help="prior preset name")
    f.add_argument("--T", type=int, help="prediction horizon")
    f.add_argument("--iterations", type=int)
    f.add_argument("--burn", type=int)
    f.add_argument("--thin", type=int)
    f.add_argument("--seed", type=int)
    f.add_argument("--out", help="output directory")
    f.add_argument("--name", help="basename for the trace CSV")
    f.set_defaults(func=cmd_fit)

    a = sub.add_parser("analyze", help="build report tables and figures")
    a.add_argument("--dataset", required=True)
    a.add_argument("--trace", action="append", default=[], help="trace CSV (repeatable)")
    a.add_argument("--config", help="experiment config JSON (analysis block)")
    a.add_argument("--out", help="output directory")
    a.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    a.set_defaults(func=cmd_analyze)

    r = sub.add_parser("reproduce", help="run a full benchmark recipe")
    r.add_argument("experiment", choices=REPRODUCE_IDS)
    r.add_argument("--out", help="output root")
    r.add_argument("--full", action="store_true", help="paper-scale iteration counts")
    r.add_argument("--iterations", type=int, help="override iteration count")
    r.add_argument("--burn", type=int, help="override burn-in")
    r.add_argument("--seed", type=int, default=7, help="base chain seed")
    r.add_argument("--no-figures", action="store_true")
    r.set_defaults(func=cmd_reproduce)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (OrbitEscapeError, NoiseTooStrongError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

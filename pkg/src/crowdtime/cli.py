"""Command-line interface: simulate, aggregate, evaluate, analyze-time.

Commands write CSV/JSON only by default plus rendered figures on the report
paths (disable with ``--no-plot``).  Every command is deterministic given
``--seed``; file writes go through a temp-file rename so partially written
outputs never appear.  Exit codes: 0 success, 2 usage or data error,
3 numerical failure.
"""

from __future__ import annotations

import json
import math
import os
import sys
import time
from importlib.metadata import version as _pkg_version
from pathlib import Path

import click
import numpy as np

from . import baselines, metrics, plots
from .bcc import bcc_gibbs, cbcc_gibbs
from .bcctime import bccpropensity_gibbs, bcctime_gibbs
from .data import (
    Dataset,
    Hyperparameters,
    LabelSpace,
    dataset_stats,
    load_judgments_csv,
    transform_times,
    untransform_seconds,
)
from .errors import DataError, NumericalFailure, UnknownModel
from .onecoin import onecoin_em
from .results import PosteriorSummary
from .rng import RandomSource
from .synthgen import SynthConfig, generate, write_files

MODELS = ("mv", "vd", "random", "onecoin", "bcc", "cbcc", "bccprop", "bcctime")
_HP_FLAGS = (
    ("--hp.p0", "hp_p0", float,
     "Class-proportion pseudo-count, replicated across classes."),
    ("--hp.s0", "hp_s0", float,
     "Spam-label pseudo-count, replicated across classes."),
    ("--hp.pi0-diag", "hp_pi0_diag", float, "Confusion prior diagonal mass."),
    ("--hp.pi0-offdiag", "hp_pi0_offdiag", float,
     "Confusion prior off-diagonal mass."),
    ("--hp.alpha0", "hp_alpha0", float, "Propensity prior true count."),
    ("--hp.beta0", "hp_beta0", float, "Propensity prior false count."),
    ("--hp.sigma0-mean", "hp_sigma0_mean", float,
     "Window lower-threshold prior mean (transformed units)."),
    ("--hp.gamma0-precision", "hp_gamma0_precision", float,
     "Window lower-threshold prior precision."),
    ("--hp.lambda0-mean", "hp_lambda0_mean", float,
     "Window upper-threshold prior mean (transformed units)."),
    ("--hp.delta0-precision", "hp_delta0_precision", float,
     "Window upper-threshold prior precision."),
)


def _hp_options(f):
    for flag, name, ftype, help_text in reversed(_HP_FLAGS):
        f = click.option(flag, name, type=ftype, default=None, help=help_text)(f)
    return f


def _seed_default() -> tuple[int, str]:
    env = os.environ.get("CROWDTIME_SEED")
    if env is not None:
        return int(env), "env"
    return 0, "default"


def _resolve_seed(seed) -> tuple[int, str]:
    if seed is not None:
        return int(seed), "flag"
    return _seed_default()


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    _atomic_write(path, "\n".join(lines) + "\n")


def _build_hyperparameters(d: Dataset, time_transform: str, kwargs) -> Hyperparameters:
    overrides = {}
    C = d.n_classes
    if kwargs.get("hp_p0") is not None:
        overrides["p0"] = (kwargs["hp_p0"],) * C
    if kwargs.get("hp_s0") is not None:
        overrides["s0"] = (kwargs["hp_s0"],) * C
    for key in ("pi0_diag", "pi0_offdiag", "alpha0", "beta0", "sigma0_mean",
                "gamma0_precision", "lambda0_mean", "delta0_precision"):
        value = kwargs.get(f"hp_{key}")
        if value is not None:
            overrides[key] = value
    return Hyperparameters.defaults(C, d.n_tasks, time_transform, **overrides)


def _hyperparameters_dict(h: Hyperparameters) -> dict:
    return {
        "p0": list(h.p0),
        "s0": list(h.s0),
        "pi0_diag": h.pi0_diag,
        "pi0_offdiag": h.pi0_offdiag,
        "alpha0": h.alpha0,
        "beta0": h.beta0,
        "sigma0_mean": h.sigma0_mean,
        "gamma0_precision": h.gamma0_precision,
        "lambda0_mean": h.lambda0_mean,
        "delta0_precision": h.delta0_precision,
        "time_transform": h.time_transform,
    }


def _fit_summary(model: str, d: Dataset, h: Hyperparameters, *, seed: int,
                 iterations: int, burnin: int, chains: int,
                 num_communities: int, community_concentration: float,
                 max_iters: int, tol: float) -> PosteriorSummary:
    """Run one aggregator; time-aware models get the transformed dataset."""
    if model == "mv":
        return PosteriorSummary.from_label_map(
            "mv", d, baselines.majority_vote(d), meta={"model": "mv"})
    if model == "vd":
        return PosteriorSummary.from_label_map(
            "vd", d, baselines.vote_distribution(d), meta={"model": "vd"})
    if model == "random":
        return PosteriorSummary.from_label_map(
            "random", d, baselines.random_baseline(d), meta={"model": "random"})
    if model == "onecoin":
        fit = onecoin_em(d, max_iters=max_iters, tol=tol)
        confusion = np.stack([
            np.array([[a, 1.0 - a], [1.0 - a, a]]) for a in fit.worker_accuracy
        ])
        return PosteriorSummary.from_label_map(
            "onecoin", d, fit.task_posterior,
            worker_ids=d.worker_ids, confusion=confusion,
            meta={"model": "onecoin", "converged": fit.converged,
                  "em_iterations": fit.n_iters})
    rng = RandomSource(seed)
    if model == "bcc":
        return bcc_gibbs(d, h, iters=iterations, burnin=burnin, rng=rng,
                         chains=chains)
    if model == "cbcc":
        return cbcc_gibbs(d, h, num_communities=num_communities,
                          community_concentration=community_concentration,
                          iters=iterations, burnin=burnin, rng=rng, chains=chains)
    transformed = transform_times(d, h.time_transform)
    if model == "bccprop":
        return bccpropensity_gibbs(transformed, h, iters=iterations,
                                   burnin=burnin, rng=rng, chains=chains)
    if model == "bcctime":
        return bcctime_gibbs(transformed, h, iters=iterations, burnin=burnin,
                             rng=rng, chains=chains)
    raise UnknownModel(f"unknown model {model!r}; choose from {', '.join(MODELS)}")


def _write_labels_csv(path: Path, summary: PosteriorSummary) -> None:
    C = summary.n_classes
    header = ["task_id", "label"] + [f"p_{c}" for c in range(C)]
    winners = np.argmax(summary.label_probs, axis=1)
    rows = [
        [task_id, int(winners[i])] + [float(x) for x in summary.label_probs[i]]
        for i, task_id in enumerate(summary.task_ids)
    ]
    _write_csv(path, header, rows)


def _write_workers_csv(path: Path, summary: PosteriorSummary) -> None:
    header = ["worker_id"]
    C = summary.n_classes
    if summary.confusion is not None:
        header += [f"pi_{r}_{c}" for r in range(C) for c in range(C)]
    if summary.propensity is not None:
        header.append("propensity")
    if summary.community_probs is not None:
        header.append("community")
    rows = []
    for k, worker_id in enumerate(summary.worker_ids or ()):
        row = [worker_id]
        if summary.confusion is not None:
            row += [float(x) for x in summary.confusion[k].ravel()]
        if summary.propensity is not None:
            row.append(float(summary.propensity[k]))
        if summary.community_probs is not None:
            row.append(int(np.argmax(summary.community_probs[k])))
        rows.append(row)
    _write_csv(path, header, rows)


def _write_durations_csv(path: Path, durations) -> None:
    header = ["task_id", "lower_mean", "lower_sd", "upper_mean", "upper_sd",
              "lower_seconds", "upper_seconds", "half_width", "midpoint"]
    rows = [
        [t.task_id, t.lower_mean, t.lower_sd, t.upper_mean, t.upper_sd,
         t.interval_seconds[0], t.interval_seconds[1], t.half_width, t.midpoint]
        for t in durations
    ]
    _write_csv(path, header, rows)


def _write_validity_csv(path: Path, d: Dataset, summary: PosteriorSummary) -> None:
    header = ["task_id", "worker_id", "label", "time_seconds", "validity_probability"]
    rows = [
        [j.task_id, j.worker_id, j.label,
         untransform_seconds(j.time, d.time_transform), float(summary.validity[i])]
        for i, j in enumerate(d.judgments)
    ]
    _write_csv(path, header, rows)


def _write_run_json(path: Path, payload: dict) -> None:
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _run_payload(command: str, seed: int, seed_source: str, d: Dataset,
                 started: float, **extra) -> dict:
    stats = dataset_stats(d)
    payload = {
        "command": command,
        "crowdtime_version": _pkg_version("crowdtime"),
        "seed": seed,
        "seed_source": seed_source,
        "dataset": {
            "n_judgments": stats.n_judgments,
            "n_tasks": stats.n_tasks,
            "n_workers": stats.n_workers,
            "n_classes": stats.n_classes,
            "judgments_per_task": stats.judgments_per_task,
            "judgments_per_worker": stats.judgments_per_worker,
            "judgment_accuracy": stats.judgment_accuracy,
        },
        "wall_time_seconds": time.perf_counter() - started,
    }
    payload.update(extra)
    return payload


def _label_space(classes: int, class_names: str | None) -> LabelSpace:
    names = tuple(class_names.split(",")) if class_names else None
    return LabelSpace(classes, names)


@click.group()
def cli():
    """Aggregate crowdsourced judgments with completion-time modelling."""


@cli.command("aggregate")
@click.option("--model", required=True, type=click.Choice(MODELS))
@click.option("--judgments", "judgments_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--classes", required=True, type=int)
@click.option("--class-names", default=None, help="Comma-separated display names.")
@click.option("--iterations", default=2000, show_default=True, type=int)
@click.option("--burnin", default=500, show_default=True, type=int)
@click.option("--chains", default=1, show_default=True, type=int)
@click.option("--seed", default=None, type=int)
@click.option("--time-transform", default="log", show_default=True,
              type=click.Choice(["log", "none"]))
@click.option("--num-communities", default=2, show_default=True, type=int)
@click.option("--community-concentration", default=10.0, show_default=True, type=float)
@click.option("--max-iters", default=200, show_default=True, type=int,
              help="EM iteration cap (onecoin).")
@click.option("--tol", default=1e-6, show_default=True, type=float,
              help="EM stopping tolerance (onecoin).")
@click.option("--out", "out_dir", default=".", show_default=True,
              type=click.Path(file_okay=False))
@click.option("--plot/--no-plot", default=True, show_default=True)
@_hp_options
def cmd_aggregate(model, judgments_path, classes, class_names, iterations,
                  burnin, chains, seed, time_transform, num_communities,
                  community_concentration, max_iters, tol, out_dir, plot,
                  **hp_kwargs):
    """Run one aggregator and write labels/workers/durations CSVs + run.json."""
    started = time.perf_counter()
    seed, seed_source = _resolve_seed(seed)
    d = load_judgments_csv(judgments_path, _label_space(classes, class_names))
    h = _build_hyperparameters(d, time_transform, hp_kwargs)
    summary = _fit_summary(
        model, d, h, seed=seed, iterations=iterations, burnin=burnin,
        chains=chains, num_communities=num_communities,
        community_concentration=community_concentration,
        max_iters=max_iters, tol=tol,
    )

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    outputs = {"labels": "labels.csv", "workers": "workers.csv", "run": "run.json"}
    _write_labels_csv(out / "labels.csv", summary)
    _write_workers_csv(out / "workers.csv", summary)
    if summary.durations is not None:
        _write_durations_csv(out / "durations.csv", summary.durations)
        outputs["durations"] = "durations.csv"
    if summary.validity is not None:
        _write_validity_csv(out / "validity.csv", d, summary)
        outputs["validity"] = "validity.csv"
    if plot and summary.durations is not None:
        observed_max = np.full(d.n_tasks, -np.inf)
        observed_sum = np.zeros(d.n_tasks)
        np.maximum.at(observed_max, d.task_idx, d.times)
        np.add.at(observed_sum, d.task_idx, d.times)
        counts = np.bincount(d.task_idx, minlength=d.n_tasks)
        plots.plot_durations(summary.durations, observed_max,
                             observed_sum / counts, out / "durations.png")
        outputs["durations_figure"] = "durations.png"

    _write_run_json(out / "run.json", _run_payload(
        "aggregate", seed, seed_source, d, started,
        model=model,
        iterations=iterations, burnin=burnin, chains=chains,
        time_transform=time_transform,
        hyperparameters=_hyperparameters_dict(h),
        model_meta={k: v for k, v in summary.meta.items() if k != "fit_seconds"},
        outputs=outputs,
    ))
    click.echo(f"wrote {', '.join(sorted(outputs.values()))} to {out}")


@cli.command("evaluate")
@click.option("--judgments", "judgments_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--gold", "gold_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--classes", required=True, type=int)
@click.option("--class-names", default=None)
@click.option("--models", default=",".join(MODELS), show_default=True,
              help="Comma-separated model list.")
@click.option("--iterations", default=2000, show_default=True, type=int)
@click.option("--burnin", default=500, show_default=True, type=int)
@click.option("--chains", default=1, show_default=True, type=int)
@click.option("--seed", default=None, type=int)
@click.option("--time-transform", default="log", show_default=True,
              type=click.Choice(["log", "none"]))
@click.option("--num-communities", default=2, show_default=True, type=int)
@click.option("--community-concentration", default=10.0, show_default=True, type=float)
@click.option("--max-iters", default=200, show_default=True, type=int)
@click.option("--tol", default=1e-6, show_default=True, type=float)
@click.option("--positive-class", default=1, show_default=True, type=int)
@click.option("--subsample", default=None,
              help="Comma-separated fractions for the subsample curve.")
@click.option("--repeats", default=5, show_default=True, type=int)
@click.option("--out", "out_dir", default=".", show_default=True,
              type=click.Path(file_okay=False))
@click.option("--plot/--no-plot", default=True, show_default=True)
@_hp_options
def cmd_evaluate(judgments_path, gold_path, classes, class_names, models,
                 iterations, burnin, chains, seed, time_transform,
                 num_communities, community_concentration, max_iters, tol,
                 positive_class, subsample, repeats, out_dir, plot, **hp_kwargs):
    """Compare aggregators against gold labels (AUC / average recall / accuracy)."""
    started = time.perf_counter()
    seed, seed_source = _resolve_seed(seed)
    d = load_judgments_csv(judgments_path, _label_space(classes, class_names),
                           gold_path=gold_path)
    h = _build_hyperparameters(d, time_transform, hp_kwargs)
    model_list = [m.strip() for m in models.split(",") if m.strip()]
    for m in model_list:
        if m not in MODELS:
            raise UnknownModel(f"unknown model {m!r}; choose from {', '.join(MODELS)}")
    model_seeds = {m: s.seed for m, s in
                   zip(model_list, RandomSource(seed).spawn(len(model_list)))}

    fit_kwargs = dict(iterations=iterations, burnin=burnin, chains=chains,
                      num_communities=num_communities,
                      community_concentration=community_concentration,
                      max_iters=max_iters, tol=tol)
    reports = []
    skipped = {}
    subsample_rows: dict[str, list] = {}
    fractions = [float(f) for f in subsample.split(",")] if subsample else None
    for m in model_list:
        try:
            summary = _fit_summary(m, d, h, seed=model_seeds[m], **fit_kwargs)
        except DataError as exc:
            skipped[m] = f"{type(exc).__name__}: {exc}"
            click.echo(f"note: skipping {m} ({skipped[m]})", err=True)
            continue
        reports.append(metrics.evaluate_summary(summary, d, positive_class))
        if fractions:
            def refit(subset, _m=m):
                return _fit_summary(_m, subset, h, seed=model_seeds[_m], **fit_kwargs)
            subsample_rows[m] = metrics.subsample_curve(
                d, fractions, refit, seed=model_seeds[m], repeats=repeats,
                positive_class=positive_class)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = ["method", "auc", "average_recall", "accuracy", "n_tasks_scored"]
    rows = [[r.method_name, r.auc, r.average_recall, r.accuracy, r.n_tasks_scored]
            for r in reports]
    _write_csv(out / "comparison.csv", header, rows)
    outputs = {"comparison": "comparison.csv", "run": "run.json"}
    if subsample_rows:
        sub_header = ["method", "fraction", "repeats", "metric", "mean", "sd"]
        sub_rows = [[m, r.fraction, r.repeats, r.metric_name, r.mean, r.sd]
                    for m, rs in subsample_rows.items() for r in rs]
        _write_csv(out / "subsample.csv", sub_header, sub_rows)
        outputs["subsample"] = "subsample.csv"
    if plot:
        if reports:
            plots.plot_method_comparison(reports, out / "comparison.png")
            outputs["comparison_figure"] = "comparison.png"
        if subsample_rows:
            plots.plot_subsample_curves(subsample_rows, out / "subsample.png")
            outputs["subsample_figure"] = "subsample.png"

    _write_run_json(out / "run.json", _run_payload(
        "evaluate", seed, seed_source, d, started,
        models=model_list, model_seeds=model_seeds, skipped=skipped,
        iterations=iterations, burnin=burnin, chains=chains,
        time_transform=time_transform, positive_class=positive_class,
        subsample_fractions=fractions, repeats=repeats,
        hyperparameters=_hyperparameters_dict(h),
        outputs=outputs,
    ))
    click.echo(f"wrote {', '.join(sorted(outputs.values()))} to {out}")


@cli.command("analyze-time")
@click.option("--judgments", "judgments_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--gold", "gold_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--classes", required=True, type=int)
@click.option("--class-names", default=None)
@click.option("--bin-edges", default=None,
              help="Comma-separated time thresholds in seconds; "
                   "default: log-spaced over the observed range.")
@click.option("--min-judgments", default=10, show_default=True, type=int)
@click.option("--out", "out_dir", default=".", show_default=True,
              type=click.Path(file_okay=False))
@click.option("--plot/--no-plot", default=True, show_default=True)
def cmd_analyze_time(judgments_path, gold_path, classes, class_names,
                     bin_edges, min_judgments, out_dir, plot):
    """Quality-versus-time analyses: cumulative bins, per-task correlations,
    per-task time histograms."""
    started = time.perf_counter()
    d = load_judgments_csv(judgments_path, _label_space(classes, class_names),
                           gold_path=gold_path)
    if bin_edges:
        edges = [float(e) for e in bin_edges.split(",")]
        edges_source = "flag"
    else:
        lo, hi = float(d.times.min()), float(d.times.max())
        edges = list(np.geomspace(lo, hi, num=12)) if hi > lo else [lo]
        edges_source = "default_log_spaced"
    edges_with_limit = edges + [math.inf]

    quality = metrics.time_binned_quality(d, edges_with_limit)
    correlation = metrics.per_task_quality_time(d, min_judgments)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    binary = d.n_classes == 2
    header = ["threshold_seconds", "n_judgments", "n_correct", "accuracy"]
    if binary:
        header += ["tp", "fp", "fn", "precision", "recall"]
    rows = []
    for r in quality:
        row = [r.threshold, r.n_judgments, r.n_correct, r.accuracy]
        if binary:
            row += [r.tp, r.fp, r.fn, r.precision, r.recall]
        rows.append(row)
    _write_csv(out / "binned_quality.csv", header, rows)

    _write_csv(
        out / "per_task_correlation.csv",
        ["task_id", "n", "pearson_r", "p_value", "defined"],
        [[r.task_id, r.n, r.pearson_r, r.p_value, r.defined] for r in correlation],
    )

    hist_rows = []
    gold = d.gold_array()[d.task_idx]
    hist_edges = np.asarray(edges_with_limit)
    for i, task_id in enumerate(d.task_ids):
        sel = d.task_idx == i
        if int(sel.sum()) < min_judgments:
            continue
        times = d.times[sel]
        correct = (d.labels[sel] == gold[sel]).astype(int)
        prev = 0.0
        for edge in hist_edges:
            in_bin = (times > prev) & (times <= edge) if np.isfinite(edge) \
                else times > prev
            hist_rows.append([task_id, prev, edge, int(in_bin.sum()),
                              int(correct[in_bin].sum())])
            prev = edge
    _write_csv(out / "task_time_histograms.csv",
               ["task_id", "bin_low", "bin_high", "n", "n_correct"], hist_rows)

    outputs = {
        "binned_quality": "binned_quality.csv",
        "per_task_correlation": "per_task_correlation.csv",
        "task_time_histograms": "task_time_histograms.csv",
        "run": "run.json",
    }
    if plot:
        plots.plot_binned_quality(quality, out / "binned_quality.png")
        plots.plot_task_correlation(correlation, out / "per_task_correlation.png")
        outputs["binned_quality_figure"] = "binned_quality.png"
        outputs["per_task_correlation_figure"] = "per_task_correlation.png"

    _write_run_json(out / "run.json", _run_payload(
        "analyze-time", 0, "not_used", d, started,
        bin_edges=edges, bin_edges_source=edges_source,
        min_judgments=min_judgments, outputs=outputs,
    ))
    click.echo(f"wrote {', '.join(sorted(outputs.values()))} to {out}")


@cli.command("simulate")
@click.option("--tasks", required=True, type=int)
@click.option("--workers", required=True, type=int)
@click.option("--classes", default=2, show_default=True, type=int)
@click.option("--spammer-fraction", default=0.0, show_default=True, type=float)
@click.option("--reliable-accuracy", default=0.85, show_default=True, type=float)
@click.option("--window-low", default=10.0, show_default=True, type=float,
              help="Planted window lower bound in seconds.")
@click.option("--window-high", default=50.0, show_default=True, type=float)
@click.option("--outlier-scale", default=50.0, show_default=True, type=float)
@click.option("--judgments-per-task", default=5, show_default=True, type=int)
@click.option("--spammer-task-rate", default=1.0, show_default=True, type=float)
@click.option("--seed", default=None, type=int)
@click.option("--out", "out_dir", default=".", show_default=True,
              type=click.Path(file_okay=False))
def cmd_simulate(tasks, workers, classes, spammer_fraction, reliable_accuracy,
                 window_low, window_high, outlier_scale, judgments_per_task,
                 spammer_task_rate, seed, out_dir):
    """Generate a synthetic dataset with planted ground truth."""
    seed, _ = _resolve_seed(seed)
    config = SynthConfig(
        n_tasks=tasks, n_workers=workers, n_classes=classes,
        spammer_fraction=spammer_fraction, reliable_accuracy=reliable_accuracy,
        planted_window=(math.log(window_low), math.log(window_high)),
        outlier_scale=outlier_scale, judgments_per_task=judgments_per_task,
        spammer_task_rate=spammer_task_rate, seed=seed,
    )
    dataset, truth = generate(config)
    paths = write_files(dataset, truth, out_dir)
    click.echo(f"wrote {', '.join(p.name for p in paths.values())} to {out_dir}")


def main(argv=None) -> int:
    """Run the CLI and map errors to exit codes (2 data/usage, 3 numerical)."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 2
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        return 130
    except DataError as exc:
        click.echo(f"{type(exc).__name__}: {exc}", err=True)
        return 2
    except NumericalFailure as exc:
        click.echo(f"{type(exc).__name__}: {exc}", err=True)
        return 3
    return 0


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()

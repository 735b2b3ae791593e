"""Command-line front end.

Artifacts are plot-data CSVs and Markdown tables, not rendered images;
point any plotting tool at the emitted files. Without --config every
command falls back to a bundled demo configuration over the synthetic
two-Gaussian dataset, so the full pipeline runs with zero external
files.

Exit codes: 0 success, 1 configuration/data error, 2 grid completed
with error rows.
"""

from __future__ import annotations

import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from .classifiers import SoftClassifierSpec
from .data import induce_imbalance, make_split, standardize
from .decision import bayes_threshold
from .errors import ImbkitError
from .experiment import (
    ExperimentConfig,
    demo_config,
    downsample_sweep,
    load_dataset_entry,
    run_grid,
    stable_seed,
    threshold_sweep,
    write_results_csv,
    write_sweep_csv,
    write_table_markdown,
    write_timings_csv,
)
from .metrics import (
    best_balanced_threshold,
    calibration_curve,
    operating_point,
    roc_curve,
    write_calibration_csv,
    write_roc_csv,
)

_OUT_ENVVAR = "IMBKIT_OUT"


def _fail(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _load_config(config_path, seeds=None, workers=None, backend=None, sidecar_cmd=None):
    try:
        config = ExperimentConfig.from_file(config_path) if config_path else demo_config()
    except ImbkitError as exc:
        _fail(str(exc))
    try:
        if seeds is not None:
            config = replace(config, seeds=tuple(range(seeds)))
        if workers is not None:
            config = replace(config, workers=workers)
        if backend or sidecar_cmd:
            params = dict(config.classifier.params)
            name = backend or config.classifier.backend
            if sidecar_cmd:
                name = "external"
                params["command"] = sidecar_cmd
            config = replace(config, classifier=SoftClassifierSpec(name, params))
    except (ImbkitError, ValueError) as exc:
        _fail(str(exc))
    return config


def _out_dir(out) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _pick_dataset(config, name):
    if name is None:
        return config.datasets[0]
    for entry in config.datasets:
        if entry["name"] == name:
            return entry
    _fail(f"dataset {name!r} not in config ({[e['name'] for e in config.datasets]})")


def _build_cell(config, entry, n, pi1, seed):
    """Split + induce imbalance exactly the way the grid runner would."""
    dataset = load_dataset_entry(entry)
    cell = (config.master_seed, dataset.name, n, pi1, seed)
    split = make_split(dataset, config.test_per_class, stable_seed(*cell, "split"))
    ctx = induce_imbalance(split.context, n, pi1, stable_seed(*cell, "imbalance"))
    if config.standardize:
        ctx, test = standardize(ctx, split.test)
    else:
        test = split.test
    return ctx, test


_config_option = click.option(
    "--config", "config_path", type=click.Path(), default=None,
    help="Experiment config file (YAML). Omit to use the bundled demo setup.",
)
_out_option = click.option(
    "--out", envvar=_OUT_ENVVAR, default="imbkit-out", show_default=True,
    help=f"Output directory (env {_OUT_ENVVAR}).",
)


@click.group()
@click.version_option(package_name="imbkit")
def main():
    """Class-imbalance correction benchmark harness."""


@main.command()
@_config_option
def validate(config_path):
    """Load every configured dataset and report row counts and priors."""
    config = _load_config(config_path)
    failures = 0
    for entry in config.datasets:
        try:
            ds = load_dataset_entry(entry)
            click.echo(f"{ds.name}: n={ds.n} pi1={ds.pi1:.3f}")
        except (ImbkitError, OSError, ValueError) as exc:
            failures += 1
            click.echo(f"{entry['name']}: FAILED ({exc})", err=True)
    if failures:
        _fail(f"{failures} dataset(s) failed validation")


@main.command()
@_config_option
@_out_option
@click.option("--seeds", type=int, default=None, help="Override: use seeds 0..N-1.")
@click.option("--workers", type=int, default=None, help="Worker pool width.")
@click.option("--backend", type=click.Choice(["kernel_icl", "gaussian_nb", "knn", "external"]),
              default=None, help="Override the classifier backend.")
@click.option("--sidecar-cmd", default=None,
              help="Command for the external scoring process (implies --backend external).")
def run(config_path, out, seeds, workers, backend, sidecar_cmd):
    """Run the full experiment grid and write results/tables."""
    config = _load_config(config_path, seeds, workers, backend, sidecar_cmd)
    out = _out_dir(out)
    rows = run_grid(config)
    write_results_csv(rows, out / "results.csv")
    write_timings_csv(rows, out / "timings.csv")
    errors = [r for r in rows if r.error]
    try:
        write_table_markdown(rows, out / "table.md", methods=list(config.methods))
    except ImbkitError:
        pass  # every row failed; results.csv still records why
    click.echo(f"wrote {len(rows)} rows to {out / 'results.csv'}")
    if errors:
        click.echo(f"{len(errors)} grid cell(s) recorded errors:", err=True)
        for r in errors[:10]:
            click.echo(f"  {r.dataset} n={r.n} pi1={r.pi1} {r.method} seed={r.seed}: {r.error}",
                       err=True)
        sys.exit(2)


@main.command("sweep-threshold")
@_config_option
@_out_option
@click.option("--dataset", default=None, help="Dataset name (default: first in config).")
@click.option("--n", "n_context", type=int, default=500, show_default=True)
@click.option("--pi1", type=float, default=0.1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--taus", default=None,
              help="Comma-separated thresholds (default: 0.01..0.99 in steps of 0.01).")
def sweep_threshold_cmd(config_path, out, dataset, n_context, pi1, seed, taus):
    """Per-class accuracy as the decision threshold sweeps [0, 1]."""
    config = _load_config(config_path)
    out = _out_dir(out)
    entry = _pick_dataset(config, dataset)
    if taus:
        grid = tuple(float(t) for t in taus.split(","))
    else:
        grid = tuple(np.round(np.arange(0.01, 1.0, 0.01), 2))
    try:
        ctx, test = _build_cell(config, entry, n_context, pi1, seed)
        result = threshold_sweep(config.classifier, ctx, test, grid)
    except (ImbkitError, ValueError) as exc:
        _fail(str(exc))
    path = out / f"sweep_threshold_{entry['name']}_n{n_context}_pi{pi1}.csv"
    write_sweep_csv(result, path)
    best = max(range(len(grid)), key=lambda i: result.reports[i].balanced)
    click.echo(f"wrote {path}")
    click.echo(f"best balanced accuracy {result.reports[best].balanced:.3f} "
               f"at tau={grid[best]} (context pi1={ctx.pi1:.3f})")


@main.command("sweep-downsample")
@_config_option
@_out_option
@click.option("--dataset", default=None, help="Dataset name (default: first in config).")
@click.option("--n", "n_context", type=int, default=1000, show_default=True)
@click.option("--pi1", type=float, default=0.05, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--targets", default=None,
              help="Comma-separated majority counts (default: n1,2n1,4n1,8n1).")
def sweep_downsample_cmd(config_path, out, dataset, n_context, pi1, seed, targets):
    """Accuracies as the majority count sweeps with the minority fixed."""
    config = _load_config(config_path)
    out = _out_dir(out)
    entry = _pick_dataset(config, dataset)
    try:
        ctx, test = _build_cell(config, entry, n_context, pi1, seed)
        if targets:
            grid = tuple(int(t) for t in targets.split(","))
        else:
            grid = tuple(t for t in (ctx.n1, 2 * ctx.n1, 4 * ctx.n1, 8 * ctx.n1) if t <= ctx.n0)
        result = downsample_sweep(config.classifier, ctx, test, grid,
                                  stable_seed(config.master_seed, entry["name"], "ds-sweep", seed))
    except (ImbkitError, ValueError) as exc:
        _fail(str(exc))
    path = out / f"sweep_downsample_{entry['name']}_n{n_context}_pi{pi1}.csv"
    write_sweep_csv(result, path)
    click.echo(f"wrote {path}")
    for value, report in zip(result.axis_values, result.reports):
        click.echo(f"n0={value}: balanced={report.balanced:.3f} worst={report.worst_class:.3f}")


@main.command()
@_config_option
@_out_option
@click.option("--dataset", default=None, help="Dataset name (default: first in config).")
@click.option("--n", "n_context", type=int, default=1000, show_default=True)
@click.option("--pi1", type=float, default=0.1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--bins", type=int, default=10, show_default=True)
def calibrate(config_path, out, dataset, n_context, pi1, seed, bins):
    """Reliability curve and bias diagnosis on the balanced test set."""
    from .classifiers import predict_proba

    config = _load_config(config_path)
    out = _out_dir(out)
    entry = _pick_dataset(config, dataset)
    try:
        ctx, test = _build_cell(config, entry, n_context, pi1, seed)
        scores = predict_proba(config.classifier, ctx, test.features)
        curve = calibration_curve(scores, test.labels, n_bins=bins)
    except (ImbkitError, ValueError) as exc:
        _fail(str(exc))
    path = out / f"calibration_{entry['name']}_n{n_context}_pi{pi1}.csv"
    write_calibration_csv(curve, path)
    click.echo(f"wrote {path}")
    click.echo(f"ece={curve.ece:.4f} diagnosis={curve.diagnosis}")


@main.command()
@_config_option
@_out_option
@click.option("--dataset", default=None, help="Dataset name (default: first in config).")
@click.option("--n", "n_context", type=int, default=500, show_default=True)
@click.option("--pi1", "pi1s", type=float, multiple=True, default=(0.1, 0.5),
              show_default=True, help="Context priors (repeatable).")
@click.option("--seed", type=int, default=0, show_default=True)
def roc(config_path, out, dataset, n_context, pi1s, seed):
    """ROC curves per context prior, with tau=0.5 and tau=pi1 points."""
    from .classifiers import predict_proba

    config = _load_config(config_path)
    out = _out_dir(out)
    entry = _pick_dataset(config, dataset)
    for pi1 in pi1s:
        try:
            ctx, test = _build_cell(config, entry, n_context, pi1, seed)
            scores = predict_proba(config.classifier, ctx, test.features)
            curve = roc_curve(scores, test.labels)
        except (ImbkitError, ValueError) as exc:
            _fail(str(exc))
        path = out / f"roc_{entry['name']}_n{n_context}_pi{pi1}.csv"
        write_roc_csv(curve, path)
        fa_half, md_half = operating_point(scores, test.labels, 0.5)
        fa_bayes, md_bayes = operating_point(scores, test.labels, bayes_threshold(ctx.pi1))
        tau_star, bal_star = best_balanced_threshold(scores, test.labels)
        click.echo(f"wrote {path}")
        click.echo(
            f"pi1={pi1}: auc={curve.auc:.4f} "
            f"tau=0.5 -> (FA={fa_half:.3f}, MD={md_half:.3f}) "
            f"tau=pi1 -> (FA={fa_bayes:.3f}, MD={md_bayes:.3f}) "
            f"tau*={tau_star:.3f} (balanced {bal_star:.3f})"
        )


if __name__ == "__main__":
    main()

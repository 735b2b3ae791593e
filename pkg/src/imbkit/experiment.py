"""Experiment grid runner, sweeps, and result aggregation/export.

The grid is the cross product datasets x context sizes x imbalance
levels x correction methods x seeds. Each cell: split off a balanced
test set, induce the requested imbalance in the context, apply the
correction, score the test set, evaluate. Data-level corrections only
ever touch the context; the test set stays balanced.

Per-cell randomness derives from a stable hash of
(master_seed, dataset, n, pi1, seed), so adding or removing methods
never perturbs the sampling of existing cells, and identical configs
reproduce results byte for byte with the built-in backends.
"""

from __future__ import annotations

import csv
import hashlib
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .classifiers import SidecarClassifier, SoftClassifierSpec, build_classifier
from .data import ContextSet, Dataset, induce_imbalance, load_csv, make_split, standardize
from .decision import apply_threshold, bayes_threshold
from .errors import ConfigInvalidError, EmptyInputError
from .metrics import EvalReport, evaluate, roc_curve
from .sampling import downsample, downsample_to, oversample, synthetic_upsample

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "SweepResult",
    "METHODS",
    "stable_seed",
    "load_dataset_entry",
    "run_grid",
    "aggregate",
    "threshold_sweep",
    "downsample_sweep",
    "write_results_csv",
    "write_timings_csv",
    "write_table_markdown",
    "write_sweep_csv",
    "demo_config",
]

METHODS = ("none", "threshold", "oversample", "synthetic_upsample", "downsample")
_METHOD_ALIASES = {"synthetic": "synthetic_upsample", "thresholding": "threshold"}


def stable_seed(*parts) -> int:
    """64-bit seed from a stable hash of the parts (platform independent)."""
    def canon(p):
        if isinstance(p, float):
            return repr(p)
        return str(p)

    key = "\x1f".join(canon(p) for p in parts)
    return int.from_bytes(hashlib.sha256(key.encode("utf-8")).digest()[:8], "big")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a grid run needs; validated at construction."""

    datasets: tuple = ()
    context_sizes: tuple = (100, 500, 1000)
    imbalances: tuple = (0.05, 0.1, 0.2, 0.3)
    methods: tuple = METHODS
    classifier: SoftClassifierSpec = field(default_factory=SoftClassifierSpec)
    seeds: tuple = (0, 1, 2, 3, 4)
    test_per_class: int = 500
    master_seed: int = 0
    workers: int = 1
    standardize: bool = True
    k_neighbors: int = 5  # synthetic upsampling

    def __post_init__(self):
        datasets = tuple(dict(d) for d in self.datasets)
        if not datasets:
            raise ConfigInvalidError("config lists no datasets")
        for d in datasets:
            if "name" not in d or ("path" not in d and "synthetic" not in d):
                raise ConfigInvalidError(f"bad dataset entry: {d}")
        sizes = tuple(int(n) for n in self.context_sizes)
        if not sizes or any(n < 2 for n in sizes):
            raise ConfigInvalidError("context sizes must all be >= 2")
        imbalances = tuple(float(p) for p in self.imbalances)
        if not imbalances or any(not 0.0 < p < 1.0 for p in imbalances):
            raise ConfigInvalidError("imbalances must lie in (0, 1)")
        methods = tuple(_METHOD_ALIASES.get(str(m).lower(), str(m).lower()) for m in self.methods)
        unknown = [m for m in methods if m not in METHODS]
        if unknown:
            raise ConfigInvalidError(f"unknown methods {unknown}; valid: {METHODS}")
        seeds = tuple(int(s) for s in self.seeds)
        if not seeds:
            raise ConfigInvalidError("at least one seed is required")
        if self.test_per_class < 1:
            raise ConfigInvalidError("test_per_class must be >= 1")
        if self.workers < 1:
            raise ConfigInvalidError("workers must be >= 1")
        if self.k_neighbors < 1:
            raise ConfigInvalidError("k_neighbors must be >= 1")
        object.__setattr__(self, "datasets", datasets)
        object.__setattr__(self, "context_sizes", sizes)
        object.__setattr__(self, "imbalances", imbalances)
        object.__setattr__(self, "methods", methods)
        object.__setattr__(self, "seeds", seeds)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        try:
            doc = dict(doc)
            kwargs = {}
            if "datasets" in doc:
                kwargs["datasets"] = tuple(doc["datasets"])
            for key in ("context_sizes", "imbalances", "methods"):
                if key in doc:
                    kwargs[key] = tuple(doc[key])
            if "seeds" in doc:
                seeds = doc["seeds"]
                kwargs["seeds"] = (
                    tuple(range(int(seeds))) if isinstance(seeds, int) else tuple(seeds)
                )
            for key in ("test_per_class", "master_seed", "workers", "k_neighbors"):
                if key in doc:
                    kwargs[key] = int(doc[key])
            if "standardize" in doc:
                kwargs["standardize"] = bool(doc["standardize"])
            if "classifier" in doc:
                c = doc["classifier"] or {}
                kwargs["classifier"] = SoftClassifierSpec(
                    backend=c.get("backend", "kernel_icl"), params=c.get("params", {}) or {}
                )
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigInvalidError(str(exc))

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        import yaml

        path = Path(path)
        if not path.exists():
            raise ConfigInvalidError(f"no such config file: {path}")
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = yaml.safe_load(fh) or {}
        except yaml.YAMLError as exc:
            raise ConfigInvalidError(f"{path}: {exc}")
        if not isinstance(doc, dict):
            raise ConfigInvalidError(f"{path}: top level must be a mapping")
        if "datasets" in doc:
            entries = []
            for entry in doc["datasets"]:
                entry = dict(entry)
                if "path" in entry:
                    p = Path(entry["path"])
                    if not p.is_absolute():
                        entry["path"] = str((path.parent / p).resolve())
                entries.append(entry)
            doc["datasets"] = entries
        return cls.from_dict(doc)


def demo_config(**overrides) -> ExperimentConfig:
    """Self-contained configuration over the synthetic two-Gaussian data."""
    base = dict(
        datasets=(
            {
                "name": "two-gaussians",
                "synthetic": "two_gaussians",
                "params": {"n_per_class": 1200, "dim": 2, "separation": 1.0, "seed": 7},
            },
        ),
        context_sizes=(100, 300),
        imbalances=(0.1, 0.3),
        methods=METHODS,
        seeds=(0, 1),
        test_per_class=300,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def load_dataset_entry(entry: dict) -> Dataset:
    """Materialize one manifest entry (CSV file or synthetic generator)."""
    if "synthetic" in entry:
        kind = entry["synthetic"]
        if kind != "two_gaussians":
            raise ConfigInvalidError(f"unknown synthetic dataset kind {kind!r}")
        from .synthetic import make_two_gaussians

        params = dict(entry.get("params", {}) or {})
        return make_two_gaussians(name=entry["name"], **params)
    ds = load_csv(entry["path"], entry["label_column"], entry["minority_label"])
    return replace(ds, name=entry["name"]) if ds.name != entry["name"] else ds


@dataclass(frozen=True)
class ResultRow:
    """Outcome of one (dataset, n, pi1, method, seed) grid cell."""

    dataset: str
    n: int
    pi1: float
    method: str
    seed: int
    report: EvalReport | None
    auc: float | None
    wall_time: float
    error: str = ""


@dataclass(frozen=True)
class SweepResult:
    """Per-value evaluation reports along one swept axis."""

    axis: str  # "threshold" or "majority_count"
    axis_values: tuple
    reports: tuple

    def __post_init__(self):
        vals = tuple(self.axis_values)
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("axis values must be strictly increasing")
        if len(vals) != len(self.reports):
            raise ValueError("one report per axis value required")
        object.__setattr__(self, "axis_values", vals)
        object.__setattr__(self, "reports", tuple(self.reports))


def _apply_method(method: str, ctx: ContextSet, seed: int, k_neighbors: int) -> ContextSet:
    if method in ("none", "threshold"):
        return ctx
    if method == "downsample":
        return downsample(ctx, seed)
    if method == "oversample":
        return oversample(ctx, seed)
    return synthetic_upsample(ctx, k_neighbors=k_neighbors, seed=seed)


def _score(config: ExperimentConfig, ctx: ContextSet, test: ContextSet) -> np.ndarray:
    if config.standardize:
        ctx, test = standardize(ctx, test)
    clf = build_classifier(config.classifier)
    try:
        clf.fit(ctx.features, ctx.labels)
        return clf.predict_proba(test.features)[:, 1]
    finally:
        if isinstance(clf, SidecarClassifier):
            clf.close()


def _run_cell(args) -> list[ResultRow]:
    config, dataset, n, pi1, seed = args
    rows: list[ResultRow] = []
    cell = (config.master_seed, dataset.name, n, pi1, seed)
    try:
        split = make_split(dataset, config.test_per_class, stable_seed(*cell, "split"))
        ctx = induce_imbalance(split.context, n, pi1, stable_seed(*cell, "imbalance"))
    except Exception as exc:  # the whole cell is unusable
        for method in config.methods:
            rows.append(
                ResultRow(dataset.name, n, pi1, method, seed, None, None, 0.0,
                          error=f"{type(exc).__name__}: {exc}")
            )
        return rows

    test = split.test
    shared_scores = None  # computed once for "none"/"threshold"
    for method in config.methods:
        start = time.perf_counter()
        try:
            if method in ("none", "threshold"):
                if shared_scores is None:
                    shared_scores = _score(config, ctx, test)
                scores = shared_scores
            else:
                balanced_ctx = _apply_method(
                    method, ctx, stable_seed(*cell, "method", method), config.k_neighbors
                )
                scores = _score(config, balanced_ctx, test)
            rule = bayes_threshold(ctx.pi1) if method == "threshold" else 0.5
            report = evaluate(test.labels, apply_threshold(scores, rule))
            auc = roc_curve(scores, test.labels).auc
            rows.append(
                ResultRow(dataset.name, n, pi1, method, seed, report, auc,
                          time.perf_counter() - start)
            )
        except Exception as exc:
            rows.append(
                ResultRow(dataset.name, n, pi1, method, seed, None, None,
                          time.perf_counter() - start,
                          error=f"{type(exc).__name__}: {exc}")
            )
    return rows


def run_grid(config: ExperimentConfig, progress=None) -> list[ResultRow]:
    """Run every grid cell; failed cells become error rows, not aborts.

    Rows come back in deterministic order (datasets, then n, pi1, seed,
    method) regardless of worker scheduling.
    """
    datasets = [load_dataset_entry(entry) for entry in config.datasets]
    cells = [
        (config, ds, n, pi1, seed)
        for ds in datasets
        for n in config.context_sizes
        for pi1 in config.imbalances
        for seed in config.seeds
    ]
    results: list[ResultRow] = []
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for rows in pool.map(_run_cell, cells):
                results.extend(rows)
                if progress:
                    progress(len(results))
    else:
        for cell in cells:
            results.extend(_run_cell(cell))
            if progress:
                progress(len(results))
    return results


# --------------------------------------------------------------------------
# aggregation
# --------------------------------------------------------------------------

_METRIC_COLUMNS = EvalReport.METRIC_FIELDS + ("auc",)


def _row_metrics(row: ResultRow) -> dict:
    out = {name: getattr(row.report, name) for name in EvalReport.METRIC_FIELDS}
    out["auc"] = row.auc
    return out


def aggregate(rows, group_by=("dataset", "method")) -> list[dict]:
    """Unweighted mean of every metric over the collapsed dimensions.

    Returns one dict per group carrying the group keys, the averaged
    metrics and the contributing run count. When grouping by dataset, a
    final "Average" entry per remaining key combination averages the
    per-dataset values (each dataset weighted equally).
    """
    rows = [r for r in rows if r.report is not None]
    if not rows:
        raise EmptyInputError("no successful result rows to aggregate")
    group_by = tuple(group_by)
    valid = {"dataset", "n", "pi1", "method", "seed"}
    if not group_by or not set(group_by) <= valid:
        raise ValueError(f"group_by must be a nonempty subset of {sorted(valid)}")

    groups: dict[tuple, list[dict]] = {}
    order: list[tuple] = []
    for row in rows:
        key = tuple(getattr(row, dim) for dim in group_by)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(_row_metrics(row))

    def summarize(key, metric_dicts):
        out = dict(zip(group_by, key))
        for m in _METRIC_COLUMNS:
            vals = [d[m] for d in metric_dicts if d[m] is not None]
            out[m] = float(np.mean(vals)) if vals else None
        out["runs"] = len(metric_dicts)
        return out

    table = [summarize(key, groups[key]) for key in order]

    if "dataset" in group_by:
        rest_dims = tuple(d for d in group_by if d != "dataset")
        rest_keys: list[tuple] = []
        for entry in table:
            rk = tuple(entry[d] for d in rest_dims)
            if rk not in rest_keys:
                rest_keys.append(rk)
        for rk in rest_keys:
            members = [e for e in table if tuple(e[d] for d in rest_dims) == rk]
            avg = {"dataset": "Average", **dict(zip(rest_dims, rk))}
            for m in _METRIC_COLUMNS:
                vals = [e[m] for e in members if e[m] is not None]
                avg[m] = float(np.mean(vals)) if vals else None
            avg["runs"] = sum(e["runs"] for e in members)
            table.append(avg)
    return table


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------

def _fit_and_score(classifier, ctx: ContextSet, test: ContextSet) -> np.ndarray:
    clf = build_classifier(classifier) if isinstance(classifier, SoftClassifierSpec) else classifier
    try:
        clf.fit(ctx.features, ctx.labels)
        return clf.predict_proba(test.features)[:, 1]
    finally:
        if isinstance(clf, SidecarClassifier) and clf is not classifier:
            clf.close()


def threshold_sweep(classifier, context: ContextSet, test: ContextSet, taus) -> SweepResult:
    """Evaluate one scored test set under every threshold in taus."""
    taus = tuple(float(t) for t in taus)
    if any(not 0.0 <= t <= 1.0 for t in taus):
        raise ValueError("taus must lie in [0, 1]")
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise ValueError("taus must be strictly increasing")
    scores = _fit_and_score(classifier, context, test)
    reports = tuple(
        evaluate(test.labels, apply_threshold(scores, tau)) for tau in taus
    )
    return SweepResult(axis="threshold", axis_values=taus, reports=reports)


def downsample_sweep(
    classifier, context: ContextSet, test: ContextSet, n0_targets, seed: int
) -> SweepResult:
    """Evaluate tau=0.5 decisions as the majority count sweeps upward.

    Each target re-draws the majority subset (same seed) and refits,
    since the context itself changes.
    """
    targets = tuple(int(t) for t in n0_targets)
    reports = []
    for target in targets:
        ctx_t = downsample_to(context, target, seed)
        scores = _fit_and_score(classifier, ctx_t, test)
        reports.append(evaluate(test.labels, apply_threshold(scores, 0.5)))
    return SweepResult(axis="majority_count", axis_values=targets, reports=tuple(reports))


# --------------------------------------------------------------------------
# export
# --------------------------------------------------------------------------

RESULT_COLUMNS = (
    "dataset", "n", "pi1", "method", "seed",
    "tp", "fp", "tn", "fn",
    "acc_class0", "acc_class1", "balanced", "worst_class", "average", "prob_error",
    "auc", "error",
)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_results_csv(rows, path) -> None:
    """One ResultRow per line in a fixed column order.

    Timing is deliberately excluded (see :func:`write_timings_csv`) so
    identical configurations produce byte-identical files.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_COLUMNS)
        for r in rows:
            c = r.report.confusion if r.report else None
            w.writerow([
                r.dataset, r.n, _fmt(r.pi1), r.method, r.seed,
                c.tp if c else "", c.fp if c else "", c.tn if c else "", c.fn if c else "",
                *(
                    _fmt(getattr(r.report, m)) if r.report else ""
                    for m in EvalReport.METRIC_FIELDS
                ),
                _fmt(r.auc), r.error,
            ])


def write_timings_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["dataset", "n", "pi1", "method", "seed", "wall_time_s"])
        for r in rows:
            w.writerow([r.dataset, r.n, _fmt(r.pi1), r.method, r.seed, _fmt(r.wall_time)])


_METHOD_HEADINGS = {
    "none": "None",
    "threshold": "Thrsh.",
    "oversample": "OS",
    "synthetic_upsample": "Synth.",
    "downsample": "DS",
}


def write_table_markdown(rows, path, methods=None) -> None:
    """Per-dataset balanced/worst-class accuracy table plus an Average row."""
    table = aggregate(rows, group_by=("dataset", "method"))
    if methods is None:
        methods = []
        for e in table:
            if e["method"] not in methods:
                methods.append(e["method"])
    by_key = {(e["dataset"], e["method"]): e for e in table}
    datasets = []
    for e in table:
        if e["dataset"] not in datasets and e["dataset"] != "Average":
            datasets.append(e["dataset"])
    datasets.append("Average")

    def cell(ds, m, metric):
        e = by_key.get((ds, m))
        return f"{e[metric]:.3f}" if e and e[metric] is not None else "--"

    lines = []
    header = ["Dataset"]
    for m in methods:
        name = _METHOD_HEADINGS.get(m, m)
        header += [f"{name} Bal.", f"{name} WCA"]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    for ds in datasets:
        row = [ds]
        for m in methods:
            row += [cell(ds, m, "balanced"), cell(ds, m, "worst_class")]
        lines.append("| " + " | ".join(row) + " |")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_sweep_csv(result: SweepResult, path) -> None:
    axis_name = "tau" if result.axis == "threshold" else "n0_target"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([axis_name, *EvalReport.METRIC_FIELDS])
        for value, report in zip(result.axis_values, result.reports):
            w.writerow([_fmt(value), *(_fmt(getattr(report, m)) for m in EvalReport.METRIC_FIELDS)])

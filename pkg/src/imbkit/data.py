"""Dataset ingestion, deterministic splitting, and imbalance induction.

Label convention: class 1 is the minority class, class 0 the majority.
Every operation that draws random rows takes an explicit integer seed and
is a pure function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import (
    EmptyDatasetError,
    InsufficientClassSamplesError,
    MissingColumnError,
    MissingFileError,
    NotBinaryError,
)

__all__ = [
    "Dataset",
    "ContextSet",
    "Split",
    "load_csv",
    "load_manifest",
    "make_split",
    "induce_imbalance",
    "standardize",
    "round_half_up",
]


def round_half_up(x: float) -> int:
    """Round with ties away from zero toward +inf (0.5 -> 1, 2.5 -> 3).

    Fixed explicitly so that minority counts at fractional pi1 * n are
    reproducible across platforms; banker's rounding is not used.
    """
    return int(math.floor(x + 0.5))


def _read_only(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """An ingested tabular dataset with binary labels.

    ``labels`` contains only 0/1 with 1 the minority class by convention.
    ``categorical_features`` records which columns were integer-encoded
    from non-numeric values (used by the synthetic upsampler).
    """

    name: str
    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    categorical_features: tuple[int, ...] = ()

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if X.shape[0] != y.shape[0]:
            raise ValueError("features row count must equal labels length")
        if not np.isin(y, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        if not (np.any(y == 0) and np.any(y == 1)):
            raise NotBinaryError("both classes must be present")
        if np.isnan(X).any():
            raise ValueError("features must not contain NaN after ingestion")
        object.__setattr__(self, "features", _read_only(X))
        object.__setattr__(self, "labels", _read_only(y))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(
            self, "categorical_features", tuple(self.categorical_features)
        )

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def pi1(self) -> float:
        return float(np.mean(self.labels == 1))


@dataclass(frozen=True)
class ContextSet:
    """A labeled sample with known class counts and empirical prior.

    ``pi1`` always equals ``n1 / (n0 + n1)`` exactly; both classes are
    required. Instances are immutable and safe to share across workers.
    """

    features: np.ndarray
    labels: np.ndarray
    n0: int = field(init=False)
    n1: int = field(init=False)
    pi1: float = field(init=False)
    categorical_features: tuple[int, ...] = ()

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError("features must be (n, d) with one label per row")
        if not np.isin(y, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        n1 = int(np.sum(y == 1))
        n0 = int(y.shape[0] - n1)
        if n0 < 1 or n1 < 1:
            raise ValueError("both classes must be present in a context set")
        object.__setattr__(self, "features", _read_only(X))
        object.__setattr__(self, "labels", _read_only(y))
        object.__setattr__(self, "n0", n0)
        object.__setattr__(self, "n1", n1)
        object.__setattr__(self, "pi1", n1 / (n0 + n1))
        object.__setattr__(
            self, "categorical_features", tuple(self.categorical_features)
        )

    @property
    def n(self) -> int:
        return self.features.shape[0]

    def take(self, indices) -> "ContextSet":
        """New ContextSet from a row-index selection."""
        idx = np.asarray(indices, dtype=np.intp)
        return ContextSet(
            self.features[idx],
            self.labels[idx],
            categorical_features=self.categorical_features,
        )


@dataclass(frozen=True)
class Split:
    """A disjoint (context pool, balanced test set) pair for one seed."""

    context: ContextSet
    test: ContextSet
    seed: int


# --------------------------------------------------------------------------
# ingestion
# --------------------------------------------------------------------------

def load_csv(path, label_column: str, minority_label) -> Dataset:
    """Load a binary-classification dataset from an RFC-4180-style CSV.

    The header row is required. The label column must resolve to exactly
    two distinct values; rows whose label cell is empty are rejected.
    ``minority_label`` is mapped to class 1, the other value to class 0.

    Non-numeric feature columns are integer-encoded by first appearance
    order. Missing numeric values are imputed with the column median of
    the ingested data (deterministic; 0.0 if a column is entirely empty).
    """
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"no such file: {path}")
    frame = pd.read_csv(path, dtype={label_column: str} if label_column else None)
    if label_column not in frame.columns:
        raise MissingColumnError(
            f"label column {label_column!r} not in {list(frame.columns)}"
        )

    labels_raw = frame[label_column].astype("string").str.strip()
    keep = labels_raw.notna() & (labels_raw != "")
    frame = frame.loc[keep]
    labels_raw = labels_raw.loc[keep]
    if len(frame) == 0:
        raise EmptyDatasetError(f"{path}: no rows with a parseable label")

    values = list(dict.fromkeys(labels_raw))  # distinct, first-appearance order
    if len(values) != 2:
        raise NotBinaryError(
            f"label column {label_column!r} has {len(values)} distinct values "
            f"({values[:5]}{'...' if len(values) > 5 else ''}); need exactly 2"
        )
    minority = str(minority_label).strip()
    if minority not in values:
        raise NotBinaryError(
            f"minority label {minority!r} not among label values {values}"
        )
    y = (labels_raw == minority).to_numpy().astype(np.int64)

    feature_frame = frame.drop(columns=[label_column])
    names = []
    columns = []
    categorical = []
    for j, col in enumerate(feature_frame.columns):
        series = feature_frame[col]
        if pd.api.types.is_numeric_dtype(series):
            vals = series.astype(np.float64).to_numpy()
            if np.isnan(vals).any():
                med = np.nanmedian(vals) if not np.isnan(vals).all() else 0.0
                vals = np.where(np.isnan(vals), med, vals)
        else:
            codes, _ = pd.factorize(series.astype("string").fillna("nan"))
            vals = codes.astype(np.float64)
            categorical.append(j)
        names.append(str(col))
        columns.append(vals)
    if not columns:
        raise EmptyDatasetError(f"{path}: no feature columns besides the label")
    X = np.column_stack(columns)

    return Dataset(
        name=path.stem,
        features=X,
        labels=y,
        feature_names=tuple(names),
        categorical_features=tuple(categorical),
    )


def load_manifest(path) -> list[dict]:
    """Read a dataset manifest (YAML list of entries).

    File entries carry {name, path, label_column, minority_label};
    synthetic entries carry {name, synthetic, params} and are generated
    on the fly (see :mod:`imbkit.synthetic`). Relative paths are resolved
    against the manifest's directory.
    """
    import yaml

    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"no such manifest: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise EmptyDatasetError(f"{path}: unparseable manifest: {exc}")
    if isinstance(doc, dict) and "datasets" in doc:
        doc = doc["datasets"]
    if not isinstance(doc, list) or not doc:
        raise EmptyDatasetError(f"{path}: manifest lists no datasets")
    entries = []
    for entry in doc:
        entry = dict(entry)
        if "name" not in entry:
            raise MissingColumnError(f"{path}: manifest entry without a name: {entry}")
        if "path" in entry:
            p = Path(entry["path"])
            if not p.is_absolute():
                entry["path"] = str((path.parent / p).resolve())
        elif "synthetic" not in entry:
            raise MissingColumnError(
                f"{path}: entry {entry['name']!r} needs 'path' or 'synthetic'"
            )
        entries.append(entry)
    return entries


# --------------------------------------------------------------------------
# splitting and imbalance induction
# --------------------------------------------------------------------------

def make_split(dataset: Dataset, test_per_class: int, seed: int) -> Split:
    """Carve out a class-balanced test set; the remainder is the context pool.

    Test rows are drawn per class by seeded uniform sampling without
    replacement. Identical (dataset, test_per_class, seed) yields
    bit-identical splits.
    """
    if test_per_class < 1:
        raise ValueError("test_per_class must be >= 1")
    y = dataset.labels
    rng = np.random.default_rng(seed)
    test_idx = []
    for label in (0, 1):
        rows = np.flatnonzero(y == label)
        # 1 of each class must remain in the pool
        if rows.size < test_per_class + 1:
            raise InsufficientClassSamplesError(label, test_per_class + 1, rows.size)
        test_idx.append(rng.choice(rows, size=test_per_class, replace=False))
    test_idx = np.sort(np.concatenate(test_idx))
    mask = np.ones(dataset.n, dtype=bool)
    mask[test_idx] = False
    pool_idx = np.flatnonzero(mask)
    cats = dataset.categorical_features
    return Split(
        context=ContextSet(
            dataset.features[pool_idx], y[pool_idx], categorical_features=cats
        ),
        test=ContextSet(
            dataset.features[test_idx], y[test_idx], categorical_features=cats
        ),
        seed=seed,
    )


def induce_imbalance(
    pool: ContextSet, n_total: int, pi1: float, seed: int
) -> ContextSet:
    """Subsample the pool to n_total rows with minority prior pi1.

    The minority count is ``round_half_up(n_total * pi1)``; both classes
    are drawn without replacement and the rows are shuffled (seeded).
    """
    if not 0.0 < pi1 < 1.0:
        raise ValueError(f"pi1 must be in (0, 1), got {pi1}")
    n1 = round_half_up(n_total * pi1)
    n0 = n_total - n1
    if n1 < 1 or n0 < 1:
        raise ValueError(
            f"n_total={n_total}, pi1={pi1} leaves an empty class (n0={n0}, n1={n1})"
        )
    rng = np.random.default_rng(seed)
    picked = []
    for label, count in ((0, n0), (1, n1)):
        rows = np.flatnonzero(pool.labels == label)
        if rows.size < count:
            raise InsufficientClassSamplesError(label, count, rows.size)
        picked.append(rng.choice(rows, size=count, replace=False))
    idx = np.concatenate(picked)
    idx = idx[rng.permutation(idx.size)]
    return pool.take(idx)


def standardize(context: ContextSet, test: ContextSet) -> tuple[ContextSet, ContextSet]:
    """Per-feature affine transform fitted on the context only.

    Zero mean, unit variance on the context; zero-variance features map
    to 0 in both sets. The test set is transformed with the context's
    statistics, never its own.
    """
    mu = context.features.mean(axis=0)
    sd = context.features.std(axis=0)
    scale = np.where(sd > 0, sd, 1.0)

    def _apply(cs: ContextSet) -> ContextSet:
        return ContextSet(
            (cs.features - mu) / scale,
            cs.labels,
            categorical_features=cs.categorical_features,
        )

    return _apply(context), _apply(test)

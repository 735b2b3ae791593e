"""Data-level imbalance corrections: downsampling, oversampling, synthetic upsampling.

All operations are pure: given the same context and seed they return
bit-identical results. They rebalance the context only; test sets are
never resampled.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator

from .data import ContextSet
from .errors import (
    AlreadyBalancedWarning,
    TargetExceedsAvailableError,
    TooFewMinoritySamplesError,
)

__all__ = [
    "SamplingMethod",
    "downsample",
    "downsample_to",
    "oversample",
    "synthetic_upsample",
    "MajorityDownsampler",
    "MinorityOversampler",
    "SyntheticMinorityUpsampler",
]


@dataclass(frozen=True)
class SamplingMethod:
    """Named correction with its method-specific parameters.

    ``kind`` is one of {"none", "downsample", "oversample",
    "synthetic_upsample"}; params currently hold ``k_neighbors`` for the
    synthetic upsampler and ``n0_target`` for downsample sweeps.
    """

    kind: str
    params: dict = field(default_factory=dict)

    _KINDS = ("none", "downsample", "oversample", "synthetic_upsample")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown sampling method {self.kind!r}")
        k = self.params.get("k_neighbors")
        if self.kind == "synthetic_upsample" and k is not None and k < 1:
            raise ValueError("k_neighbors must be >= 1")


def _warn_not_majority_heavy(op):
    warnings.warn(
        f"{op}: context has n0 < n1; returning input unchanged",
        AlreadyBalancedWarning,
        stacklevel=3,
    )


def downsample(ctx: ContextSet, seed: int) -> ContextSet:
    """Remove majority rows until n0 equals n1 (pi1 becomes 0.5).

    Majority rows are chosen by seeded sampling without replacement; all
    minority rows are retained. A context with n0 < n1 is returned
    unchanged with an :class:`AlreadyBalancedWarning`.
    """
    if ctx.n0 < ctx.n1:
        _warn_not_majority_heavy("downsample")
        return ctx
    if ctx.n0 == ctx.n1:
        return ctx
    return downsample_to(ctx, ctx.n1, seed)


def downsample_to(ctx: ContextSet, n0_target: int, seed: int) -> ContextSet:
    """Reduce the majority class to exactly n0_target rows, minority untouched."""
    if not 1 <= n0_target <= ctx.n0:
        raise TargetExceedsAvailableError(
            f"n0_target={n0_target} outside [1, {ctx.n0}]"
        )
    if n0_target == ctx.n0:
        return ctx
    rng = np.random.default_rng(seed)
    maj = np.flatnonzero(ctx.labels == 0)
    keep = rng.choice(maj, size=n0_target, replace=False)
    idx = np.sort(np.concatenate([keep, np.flatnonzero(ctx.labels == 1)]))
    return ctx.take(idx)


def oversample(ctx: ContextSet, seed: int) -> ContextSet:
    """Replicate minority rows as evenly as possible until n1 equals n0.

    Each original minority row appears floor(n0/n1) or ceil(n0/n1) times;
    the rows receiving the extra copy are a seeded draw without
    replacement. No new feature vectors are introduced.
    """
    if ctx.n1 > ctx.n0:
        _warn_not_majority_heavy("oversample")
        return ctx
    if ctx.n1 == ctx.n0:
        return ctx
    rng = np.random.default_rng(seed)
    mino = np.flatnonzero(ctx.labels == 1)
    reps = ctx.n0 // ctx.n1
    extra = ctx.n0 - reps * ctx.n1
    extra_rows = (
        rng.choice(mino, size=extra, replace=False) if extra else np.empty(0, np.intp)
    )
    # original rows stay in place; replicas are appended
    appended = np.concatenate([np.tile(mino, reps - 1), extra_rows]).astype(np.intp)
    idx = np.concatenate([np.arange(ctx.n, dtype=np.intp), np.sort(appended)])
    return ctx.take(idx)


def synthetic_upsample(ctx: ContextSet, k_neighbors: int = 5, seed: int = 0) -> ContextSet:
    """Append interpolated minority rows until n1 equals n0.

    Each synthetic row is ``x_i + u * (x_j - x_i)`` where x_i is a seeded
    random minority row, x_j one of its k nearest minority neighbours
    (Euclidean distance in standardized feature space) and u uniform on
    [0, 1]. Integer-encoded categorical columns are snapped to the
    nearest value seen among minority rows.

    This is a SMOTE-style interpolating stand-in for generative
    upsampling; it makes no attempt to reproduce PFN-based generators.
    """
    if k_neighbors < 1:
        raise ValueError("k_neighbors must be >= 1")
    if ctx.n1 > ctx.n0:
        _warn_not_majority_heavy("synthetic_upsample")
        return ctx
    if ctx.n1 == ctx.n0:
        return ctx
    if ctx.n1 < 2:
        raise TooFewMinoritySamplesError(
            f"synthetic upsampling needs >= 2 minority rows, got {ctx.n1}"
        )
    need = ctx.n0 - ctx.n1
    rng = np.random.default_rng(seed)

    mino = np.flatnonzero(ctx.labels == 1)
    X_min = ctx.features[mino]

    # neighbour geometry in standardized space (affine, so interpolation
    # commutes with the transform and can be done on original features)
    mu = ctx.features.mean(axis=0)
    sd = ctx.features.std(axis=0)
    scale = np.where(sd > 0, sd, 1.0)
    Z = (X_min - mu) / scale
    dist = cdist(Z, Z)
    np.fill_diagonal(dist, np.inf)
    k = min(k_neighbors, ctx.n1 - 1)
    neighbours = np.argsort(dist, axis=1, kind="stable")[:, :k]

    base = rng.integers(0, ctx.n1, size=need)
    pick = rng.integers(0, k, size=need)
    u = rng.uniform(0.0, 1.0, size=need)
    xi = X_min[base]
    xj = X_min[neighbours[base, pick]]
    synth = xi + u[:, None] * (xj - xi)

    for col in ctx.categorical_features:
        seen = np.unique(X_min[:, col])
        nearest = np.argmin(np.abs(synth[:, col][:, None] - seen[None, :]), axis=1)
        synth[:, col] = seen[nearest]

    X_out = np.vstack([ctx.features, synth])
    y_out = np.concatenate([ctx.labels, np.ones(need, dtype=np.int64)])
    return ContextSet(X_out, y_out, categorical_features=ctx.categorical_features)


# --------------------------------------------------------------------------
# estimator-style wrappers (imblearn-compatible fit_resample surface)
# --------------------------------------------------------------------------

class _ResamplerBase(BaseEstimator):
    def _context(self, X, y) -> ContextSet:
        return ContextSet(np.asarray(X, dtype=np.float64), np.asarray(y))

    def fit_resample(self, X, y):
        out = self._resample(self._context(X, y))
        return out.features.copy(), out.labels.copy()


class MajorityDownsampler(_ResamplerBase):
    """Drop majority rows to equalize class counts (seeded)."""

    def __init__(self, random_state=0):
        self.random_state = random_state

    def _resample(self, ctx):
        return downsample(ctx, self.random_state)


class MinorityOversampler(_ResamplerBase):
    """Replicate minority rows to equalize class counts (seeded)."""

    def __init__(self, random_state=0):
        self.random_state = random_state

    def _resample(self, ctx):
        return oversample(ctx, self.random_state)


class SyntheticMinorityUpsampler(_ResamplerBase):
    """Interpolate new minority rows to equalize class counts (seeded)."""

    def __init__(self, k_neighbors=5, random_state=0):
        self.k_neighbors = k_neighbors
        self.random_state = random_state

    def _resample(self, ctx):
        return synthetic_upsample(ctx, self.k_neighbors, self.random_state)

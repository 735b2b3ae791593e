"""Soft-score classifier backends.

The toolkit treats a classifier as anything that maps (context, query)
to P(y=1 | query, context) without updating weights: fit ingests the
context, predict_proba conditions on it. Three built-in reference
backends are provided, plus a client for external model processes
speaking a line-delimited JSON protocol.

Built-in backends canonicalize the context row order at fit time, so
scores are bit-identical under any permutation of the context.
"""

from __future__ import annotations

import json
import shlex
import subprocess
import threading
import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .data import ContextSet
from .errors import (
    BackendFailureError,
    DegenerateContextWarning,
    DimensionMismatchError,
)

__all__ = [
    "SoftScores",
    "SoftClassifierSpec",
    "KernelICLClassifier",
    "KNNProportionClassifier",
    "DiagonalGaussianNB",
    "SidecarClassifier",
    "build_classifier",
    "predict_proba",
    "kernel_icl_score",
    "median_bandwidth",
]

_BANDWIDTH_RULES = ("cv", "median", "scaled")
_CV_GRID = np.logspace(np.log10(0.05), np.log10(2.0), 12)
_MAX_EXACT_PAIRS = 4000


@dataclass(frozen=True)
class SoftScores:
    """Per-query predicted probability of class 1, each in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).ravel()
        if v.size and (np.nanmin(v) < 0.0 or np.nanmax(v) > 1.0 or np.isnan(v).any()):
            raise ValueError("scores must lie in [0, 1]")
        v = np.ascontiguousarray(v)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def __iter__(self):
        return iter(self.values)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def as_score_array(scores) -> np.ndarray:
    """Coerce SoftScores or any array-like of probabilities to ndarray."""
    return np.asarray(getattr(scores, "values", scores), dtype=np.float64).ravel()


def _canonical_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row order independent of input permutation (features then label)."""
    keys = tuple([y] + [X[:, j] for j in range(X.shape[1] - 1, -1, -1)])
    return np.lexsort(keys)


def _median_pairwise(X: np.ndarray) -> float:
    n = X.shape[0]
    if n < 2:
        return 0.0
    if n > _MAX_EXACT_PAIRS:
        # deterministic, permutation-invariant thinning: canonical sort
        # then an even stride down to the exact-computation cap
        order = _canonical_order(X, np.zeros(n))
        step = np.linspace(0, n - 1, _MAX_EXACT_PAIRS).astype(np.intp)
        X = X[order[step]]
        n = X.shape[0]
    d = cdist(X, X)
    return float(np.median(d[np.triu_indices(n, k=1)]))


def median_bandwidth(context: ContextSet) -> float:
    """Median pairwise Euclidean distance among context rows.

    Exact for contexts up to a few thousand rows (larger contexts are
    thinned deterministically). Returns 1.0 with a
    :class:`DegenerateContextWarning` when all rows coincide.
    """
    med = _median_pairwise(np.asarray(context.features, dtype=np.float64))
    if med <= 0.0:
        warnings.warn(
            "all context rows identical; using bandwidth 1.0",
            DegenerateContextWarning,
            stacklevel=2,
        )
        return 1.0
    return med


def _nw_scores(Xc, y1, Q, h, prior):
    """Nadaraya-Watson class-1 weight fraction with prior fallback."""
    d2 = cdist(Q, Xc, "sqeuclidean")
    W = np.exp(-d2 / (2.0 * h * h))
    den = W.sum(axis=1)
    num = W @ y1
    with np.errstate(invalid="ignore"):
        s = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), prior)
    return np.clip(s, 0.0, 1.0)


def kernel_icl_score(context: ContextSet, query, bandwidth: float) -> float:
    """Gaussian-kernel weighted class-1 fraction at a single query point.

    When the kernel mass underflows to zero for every context row the
    score falls back to the context prior pi1.
    """
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    q = np.asarray(query, dtype=np.float64).reshape(1, -1)
    if q.shape[1] != context.features.shape[1]:
        raise DimensionMismatchError(
            f"query has {q.shape[1]} features, context has {context.features.shape[1]}"
        )
    y1 = (context.labels == 1).astype(np.float64)
    return float(_nw_scores(context.features, y1, q, bandwidth, context.pi1)[0])


class KernelICLClassifier(BaseEstimator, ClassifierMixin):
    """Nadaraya-Watson in-context classifier with a Gaussian kernel.

    The predicted probability is the kernel-weighted fraction of class-1
    rows in the context, so the score inherits the context's class
    prior; an imbalanced context drags scores toward the majority class
    exactly the way an in-context learner's posterior does. Queries far
    from all context rows (kernel underflow) fall back to the prior.

    Parameters
    ----------
    bandwidth : float or {"cv", "median", "scaled"}
        Kernel width. A float is used as-is. "median" uses the median
        pairwise distance of the context; "scaled" shrinks the median by
        n**(-1/(d+4)) (density-estimation rate); "cv" (default) picks the
        width minimizing the leave-one-out Brier score over a log-spaced
        grid around the median. The CV rule is deliberately fit to the
        context: duplicated rows shrink its leave-one-out error and pull
        the width down, mirroring how in-context learners sharpen around
        repeated samples.
    """

    def __init__(self, bandwidth="cv"):
        self.bandwidth = bandwidth

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        y = np.asarray(y, dtype=np.int64)
        if not np.isin(y, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        order = _canonical_order(X, y)
        self.X_ = np.ascontiguousarray(X[order], dtype=np.float64)
        self.y1_ = (y[order] == 1).astype(np.float64)
        self.pi1_ = float(self.y1_.mean())
        self.classes_ = np.array([0, 1])
        self.bandwidth_ = self._resolve_bandwidth()
        return self

    def _resolve_bandwidth(self) -> float:
        b = self.bandwidth
        if isinstance(b, (int, float)) and not isinstance(b, bool):
            if b <= 0:
                raise ValueError("bandwidth must be positive")
            return float(b)
        if b not in _BANDWIDTH_RULES:
            raise ValueError(f"bandwidth must be positive or one of {_BANDWIDTH_RULES}")
        med = _median_pairwise(self.X_)
        if med <= 0.0:
            warnings.warn(
                "all context rows identical; using bandwidth 1.0",
                DegenerateContextWarning,
                stacklevel=2,
            )
            return 1.0
        n, d = self.X_.shape
        if b == "median" or n < 3:
            return med
        if b == "scaled":
            return med * n ** (-1.0 / (d + 4))
        return self._loo_cv_bandwidth(med)

    def _loo_cv_bandwidth(self, med: float) -> float:
        d2 = cdist(self.X_, self.X_, "sqeuclidean")
        best_h, best_score = med, np.inf
        for mult in _CV_GRID:
            h = med * mult
            W = np.exp(-d2 / (2.0 * h * h))
            np.fill_diagonal(W, 0.0)
            den = W.sum(axis=1)
            pred = np.where(den > 0.0, (W @ self.y1_) / np.where(den > 0.0, den, 1.0), self.pi1_)
            score = float(np.mean((pred - self.y1_) ** 2))
            if score < best_score - 1e-12:
                best_score, best_h = score, h
        return best_h

    def predict_proba(self, X):
        check_is_fitted(self, "X_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.X_.shape[1]:
            raise DimensionMismatchError(
                f"queries have {X.shape[1]} features, context has {self.X_.shape[1]}"
            )
        s = _nw_scores(self.X_, self.y1_, X, self.bandwidth_, self.pi1_)
        return np.column_stack([1.0 - s, s])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] > 0.5).astype(np.int64)


class KNNProportionClassifier(BaseEstimator, ClassifierMixin):
    """Smoothed class-1 vote fraction among the k nearest context rows.

    Scores are (votes + alpha) / (k + 2 * alpha); the default alpha=1
    keeps scores strictly inside (0, 1) so ROC thresholds stay
    informative. Distance ties resolve by canonical context order.
    """

    def __init__(self, k=5, alpha=1.0):
        self.k = k
        self.alpha = alpha

    def fit(self, X, y):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        X, y = check_X_y(X, y)
        y = np.asarray(y, dtype=np.int64)
        if not np.isin(y, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        order = _canonical_order(X, y)
        self.X_ = np.ascontiguousarray(X[order], dtype=np.float64)
        self.y1_ = (y[order] == 1).astype(np.float64)
        self.classes_ = np.array([0, 1])
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "X_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.X_.shape[1]:
            raise DimensionMismatchError(
                f"queries have {X.shape[1]} features, context has {self.X_.shape[1]}"
            )
        k = min(self.k, self.X_.shape[0])
        d = cdist(X, self.X_)
        nn = np.argsort(d, axis=1, kind="stable")[:, :k]
        votes = self.y1_[nn].sum(axis=1)
        s = (votes + self.alpha) / (k + 2.0 * self.alpha)
        return np.column_stack([1.0 - s, s])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] > 0.5).astype(np.int64)


class DiagonalGaussianNB(BaseEstimator, ClassifierMixin):
    """Gaussian naive Bayes with per-class diagonal covariance.

    Class priors are the context frequencies; per-feature variances are
    floored at ``var_floor`` to avoid singularities.
    """

    def __init__(self, var_floor=1e-9):
        self.var_floor = var_floor

    def fit(self, X, y):
        if self.var_floor <= 0:
            raise ValueError("var_floor must be positive")
        X, y = check_X_y(X, y)
        y = np.asarray(y, dtype=np.int64)
        if not np.isin(y, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        order = _canonical_order(X, y)
        X, y = X[order], y[order]
        self.classes_ = np.array([0, 1])
        self.theta_ = np.zeros((2, X.shape[1]))
        self.var_ = np.ones((2, X.shape[1]))
        self.log_prior_ = np.full(2, -np.inf)
        n = y.shape[0]
        for c in (0, 1):
            rows = X[y == c]
            if rows.shape[0] == 0:
                continue
            self.theta_[c] = rows.mean(axis=0)
            self.var_[c] = np.maximum(rows.var(axis=0), self.var_floor)
            self.log_prior_[c] = np.log(rows.shape[0] / n)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "theta_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.theta_.shape[1]:
            raise DimensionMismatchError(
                f"queries have {X.shape[1]} features, context has {self.theta_.shape[1]}"
            )
        joint = np.empty((X.shape[0], 2))
        for c in (0, 1):
            if np.isneginf(self.log_prior_[c]):
                joint[:, c] = -np.inf
                continue
            z = (X - self.theta_[c]) ** 2 / self.var_[c]
            log_like = -0.5 * (z + np.log(2.0 * np.pi * self.var_[c])).sum(axis=1)
            joint[:, c] = self.log_prior_[c] + log_like
        shift = np.max(joint, axis=1, keepdims=True)
        p = np.exp(joint - shift)
        p /= p.sum(axis=1, keepdims=True)
        return p

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] > 0.5).astype(np.int64)


class _PipeReader(threading.Thread):
    """Drains a pipe into a queue (stdout) or a bounded tail (stderr)."""

    def __init__(self, stream, sink):
        super().__init__(daemon=True)
        self.stream = stream
        self.sink = sink
        self.start()

    def run(self):
        try:
            for line in self.stream:
                self.sink(line)
        except ValueError:
            pass  # stream closed underneath us


class SidecarClassifier(BaseEstimator, ClassifierMixin):
    """Client for an external scoring process.

    The child process speaks one JSON object per line on stdin/stdout:

        -> {"op": "fit", "features": [[...]], "labels": [0, 1, ...]}
        <- {"ok": true}
        -> {"op": "predict", "features": [[...]]}
        <- {"ok": true, "scores": [0.73, ...]}
        -> {"op": "shutdown"}
        <- {"ok": true}

    Any ``{"ok": false, "error": ...}`` response, malformed reply, crash
    or timeout raises :class:`BackendFailureError` with the captured
    stderr tail. A handle drives exactly one child and must not be
    shared between workers.
    """

    def __init__(self, command="", timeout=120.0):
        self.command = command
        self.timeout = timeout

    # -- process management -------------------------------------------

    def _ensure_process(self):
        if getattr(self, "_proc", None) is not None and self._proc.poll() is None:
            return
        if not self.command:
            raise BackendFailureError("no sidecar command configured")
        argv = shlex.split(self.command) if isinstance(self.command, str) else list(self.command)
        self._proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )
        import queue

        self._lines = queue.Queue()
        self._stderr_tail = deque(maxlen=64)
        self._out_reader = _PipeReader(self._proc.stdout, self._lines.put)
        self._err_reader = _PipeReader(self._proc.stderr, self._stderr_tail.append)

    def _diagnostics(self) -> str:
        return "".join(getattr(self, "_stderr_tail", []))[-4096:]

    def _request(self, payload: dict) -> dict:
        import queue

        self._ensure_process()
        try:
            self._proc.stdin.write(json.dumps(payload) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BackendFailureError(f"backend pipe closed: {exc}", self._diagnostics())
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            self.close(force=True)
            raise BackendFailureError(
                f"backend did not respond within {self.timeout}s", self._diagnostics()
            )
        try:
            reply = json.loads(line)
        except json.JSONDecodeError:
            raise BackendFailureError(
                f"backend sent a non-JSON line: {line!r}", self._diagnostics()
            )
        if not isinstance(reply, dict) or not reply.get("ok", False):
            err = reply.get("error", "unspecified error") if isinstance(reply, dict) else reply
            raise BackendFailureError(f"backend error: {err}", self._diagnostics())
        return reply

    def close(self, force=False):
        proc = getattr(self, "_proc", None)
        if proc is None:
            return
        try:
            if proc.poll() is None and not force:
                try:
                    proc.stdin.write(json.dumps({"op": "shutdown"}) + "\n")
                    proc.stdin.flush()
                except (BrokenPipeError, OSError):
                    pass
            proc.stdin.close()
            try:
                proc.wait(timeout=5.0)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()
        finally:
            self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        try:
            self.close(force=True)
        except Exception:
            pass

    # -- estimator surface ---------------------------------------------

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        y = np.asarray(y, dtype=np.int64)
        self._request(
            {"op": "fit", "features": np.asarray(X, dtype=float).tolist(), "labels": y.tolist()}
        )
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatchError(
                f"queries have {X.shape[1]} features, context had {self.n_features_in_}"
            )
        reply = self._request({"op": "predict", "features": X.tolist()})
        scores = reply.get("scores")
        if not isinstance(scores, list) or len(scores) != X.shape[0]:
            raise BackendFailureError(
                f"backend returned {0 if scores is None else len(scores)} scores "
                f"for {X.shape[0]} queries",
                self._diagnostics(),
            )
        s = np.asarray(scores, dtype=np.float64)
        if np.isnan(s).any() or s.min() < 0.0 or s.max() > 1.0:
            raise BackendFailureError("backend scores outside [0, 1]", self._diagnostics())
        return np.column_stack([1.0 - s, s])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] > 0.5).astype(np.int64)


# --------------------------------------------------------------------------
# backend selection
# --------------------------------------------------------------------------

_BACKENDS = ("kernel_icl", "gaussian_nb", "knn", "external")


@dataclass(frozen=True)
class SoftClassifierSpec:
    """Validated choice of scoring backend plus its parameters."""

    backend: str = "kernel_icl"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.backend not in _BACKENDS:
            raise ValueError(f"backend must be one of {_BACKENDS}, got {self.backend!r}")
        object.__setattr__(self, "params", dict(self.params))
        build_classifier(self)  # fail fast on bad params


def build_classifier(spec: SoftClassifierSpec):
    """Instantiate the estimator a spec describes (unfitted)."""
    p = spec.params
    if spec.backend == "kernel_icl":
        b = p.get("bandwidth", "cv")
        if isinstance(b, (int, float)) and not isinstance(b, bool):
            if b <= 0:
                raise ValueError("bandwidth must be positive")
        elif b not in _BANDWIDTH_RULES:
            raise ValueError(f"bandwidth must be positive or one of {_BANDWIDTH_RULES}")
        return KernelICLClassifier(bandwidth=b)
    if spec.backend == "gaussian_nb":
        floor = p.get("var_floor", 1e-9)
        if floor <= 0:
            raise ValueError("var_floor must be positive")
        return DiagonalGaussianNB(var_floor=floor)
    if spec.backend == "knn":
        k = int(p.get("k", 5))
        alpha = float(p.get("alpha", 1.0))
        if k < 1:
            raise ValueError("k must be >= 1")
        if alpha < 0:
            raise ValueError("alpha must be >= 0")
        return KNNProportionClassifier(k=k, alpha=alpha)
    command = p.get("command", "")
    if not command:
        raise ValueError("external backend needs a 'command'")
    timeout = float(p.get("timeout", 120.0))
    if timeout <= 0:
        raise ValueError("timeout must be positive")
    return SidecarClassifier(command=command, timeout=timeout)


def predict_proba(spec: SoftClassifierSpec, context: ContextSet, queries) -> SoftScores:
    """Score queries against a context with the backend a spec selects."""
    Q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if Q.shape[1] != context.features.shape[1]:
        raise DimensionMismatchError(
            f"queries have {Q.shape[1]} features, context has {context.features.shape[1]}"
        )
    clf = build_classifier(spec)
    try:
        clf.fit(context.features, context.labels)
        scores = clf.predict_proba(Q)[:, 1]
    finally:
        if isinstance(clf, SidecarClassifier):
            clf.close()
    return SoftScores(scores)

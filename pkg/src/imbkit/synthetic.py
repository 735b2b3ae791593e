"""Synthetic two-Gaussian dataset with a closed-form posterior oracle.

Class-conditional distributions are isotropic unit-variance Gaussians
with means +-separation along the first feature axis. The exact
posterior P(y=1 | x) under any prior is available in closed form, which
makes this the reference fixture for threshold and calibration checks:
every qualitative claim about score-based corrections can be verified
against the analytic optimum.
"""

from __future__ import annotations

import numpy as np

from .data import ContextSet, Dataset

__all__ = [
    "make_two_gaussians",
    "sample_context",
    "true_posterior",
    "bayes_balanced_accuracy",
]


def make_two_gaussians(
    n_per_class: int = 1500,
    dim: int = 2,
    separation: float = 1.0,
    seed: int = 0,
    name: str = "two-gaussians",
) -> Dataset:
    """Generate a balanced two-Gaussian dataset.

    Class 0 is centered at -separation on the first axis, class 1 at
    +separation; remaining axes are pure noise.
    """
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = np.random.default_rng(seed)
    X0 = rng.normal(0.0, 1.0, size=(n_per_class, dim))
    X0[:, 0] -= separation
    X1 = rng.normal(0.0, 1.0, size=(n_per_class, dim))
    X1[:, 0] += separation
    X = np.vstack([X0, X1])
    y = np.concatenate(
        [np.zeros(n_per_class, dtype=np.int64), np.ones(n_per_class, dtype=np.int64)]
    )
    order = rng.permutation(X.shape[0])
    return Dataset(
        name=name,
        features=X[order],
        labels=y[order],
        feature_names=tuple(f"x{i + 1}" for i in range(dim)),
    )


def sample_context(
    n0: int, n1: int, dim: int = 2, separation: float = 1.0, seed: int = 0
) -> ContextSet:
    """Draw a context set with exact class counts from the fixture."""
    rng = np.random.default_rng(seed)
    X0 = rng.normal(0.0, 1.0, size=(n0, dim))
    X0[:, 0] -= separation
    X1 = rng.normal(0.0, 1.0, size=(n1, dim))
    X1[:, 0] += separation
    X = np.vstack([X0, X1])
    y = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    order = rng.permutation(X.shape[0])
    return ContextSet(X[order], y[order])


def true_posterior(X, pi1: float, separation: float = 1.0) -> np.ndarray:
    """Exact P(y=1 | x) under minority prior pi1.

    For unit-variance Gaussians at -+separation the log likelihood ratio
    is 2 * separation * x_1, so the posterior is a logistic function of
    the first feature shifted by the prior log odds.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    z = 2.0 * separation * X[:, 0] + np.log(pi1 / (1.0 - pi1))
    return 1.0 / (1.0 + np.exp(-z))


def bayes_balanced_accuracy(separation: float = 1.0) -> float:
    """Best achievable balanced accuracy on the fixture (boundary at 0)."""
    from scipy.stats import norm

    return float(norm.cdf(separation))

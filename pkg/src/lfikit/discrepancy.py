"""Classifier-based discrepancy: cross-validated LDA accuracy between two datasets.

Accuracy near 0.5 means the classifier cannot tell observed from simulated
data; accuracy near 1 means the datasets are easy to separate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simulators import DataSet, RngSeed, as_point, check_dataset

DEFAULT_FOLDS = 5
REG_SCALE = 1e-6


class LDAFitError(ValueError):
    """Raised when the two-class LDA problem is degenerate."""


@dataclass(frozen=True)
class LabeledSet:
    """Observed rows (label 0) stacked over simulated rows (label 1)."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        if features.ndim == 1:
            features = features[:, None]
        labels = np.asarray(self.labels).astype(np.int8)
        if features.shape[0] != labels.shape[0]:
            raise ValueError("feature rows and labels differ in count")
        if not np.all(np.isin(labels, (0, 1))):
            raise ValueError("labels must be 0 or 1")
        if not np.all(np.isfinite(features)):
            raise ValueError("features contain NaN or Inf")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_datasets(cls, obs: DataSet, sim: DataSet) -> "LabeledSet":
        obs, sim = check_dataset(obs), check_dataset(sim)
        if obs.shape[1] != sim.shape[1]:
            raise ValueError(
                f"column counts differ: observed has {obs.shape[1]}, simulated {sim.shape[1]}"
            )
        if obs.shape[0] != sim.shape[0]:
            raise ValueError(
                f"unbalanced classes ({obs.shape[0]} observed vs {sim.shape[0]} simulated); "
                "chance level would not be 0.5"
            )
        labels = np.repeat(np.array([0, 1], dtype=np.int8), obs.shape[0])
        return cls(np.vstack([obs, sim]), labels)

    def swapped(self) -> "LabeledSet":
        return LabeledSet(self.features, 1 - self.labels)


@dataclass(frozen=True)
class LDAModel:
    weights: np.ndarray
    intercept: float
    regularizer: float

    def decision_function(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        return x @ self.weights + self.intercept

    def predict(self, x) -> np.ndarray:
        # a score of exactly zero goes to class 0
        return (self.decision_function(x) > 0).astype(np.int8)


@dataclass(frozen=True)
class DiscrepancyValue:
    value: float
    n_folds: int
    eval_seed: RngSeed

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"discrepancy {self.value} outside [0, 1]")

    def __float__(self):
        return float(self.value)


def default_regularizer(pooled_cov: np.ndarray) -> float:
    return REG_SCALE * float(np.trace(pooled_cov)) / pooled_cov.shape[0]


def fit_lda(data: LabeledSet, lam: float | None = None) -> LDAModel:
    """Two-class LDA with equal priors.

    ``w = (S + lam*I)^-1 (mu1 - mu0)`` with ``S`` the pooled within-class
    covariance; the intercept puts the threshold midway between the
    projected class means. ``lam=None`` picks a tiny trace-scaled ridge.
    """
    x, y = data.features, data.labels
    x0, x1 = x[y == 0], x[y == 1]
    if len(x0) < 2 or len(x1) < 2:
        raise LDAFitError("each class needs at least two rows")
    mu0, mu1 = x0.mean(axis=0), x1.mean(axis=0)
    c0, c1 = x0 - mu0, x1 - mu1
    pooled = (c0.T @ c0 + c1.T @ c1) / (len(x) - 2)
    if lam is None:
        lam = default_regularizer(pooled)
    if lam < 0:
        raise ValueError("regularizer must be nonnegative")
    m = x.shape[1]
    a = pooled + lam * np.eye(m)
    if np.linalg.matrix_rank(a) < m:
        raise LDAFitError(
            "pooled covariance is singular; pass a positive regularizer lam"
        )
    w = np.linalg.solve(a, mu1 - mu0)
    if not np.all(np.isfinite(w)):
        raise LDAFitError("non-finite LDA weights")
    if not np.any(w):
        raise LDAFitError("class means coincide; LDA direction undefined")
    b = -0.5 * float(w @ (mu0 + mu1))
    return LDAModel(w, b, float(lam))


def stratified_folds(labels: np.ndarray, n_folds: int, seed: RngSeed) -> np.ndarray:
    """Fold index per row; each fold receives an equal share of every class.

    One permutation of all rows is drawn and every row gets its rank within
    its own class modulo ``n_folds``, so renaming the classes leaves the
    assignment unchanged.
    """
    perm = seed.generator().permutation(labels.shape[0])
    folds = np.empty(labels.shape[0], dtype=np.int64)
    for c in (0, 1):
        members = perm[labels[perm] == c]
        folds[members] = np.arange(members.shape[0]) % n_folds
    return folds


def _fold_accuracies(x, y, folds, n_folds, lam):
    # Per-fold training statistics from totals minus the held-out fold's share.
    x = x - x.mean(axis=0)
    m = x.shape[1]
    cell = folds * 2 + y
    size = 2 * n_folds
    cnt = np.bincount(cell, minlength=size).astype(float).reshape(n_folds, 2)
    s = np.stack(
        [np.bincount(cell, weights=x[:, i], minlength=size) for i in range(m)], axis=-1
    ).reshape(n_folds, 2, m)
    q = np.empty((size, m, m))
    for i in range(m):
        for j in range(i, m):
            q[:, i, j] = q[:, j, i] = np.bincount(cell, weights=x[:, i] * x[:, j], minlength=size)
    q = q.reshape(n_folds, 2, m, m)
    n_tr = cnt.sum(axis=0) - cnt  # (k, 2)
    s_tr = s.sum(axis=0) - s
    q_tr = q.sum(axis=0) - q
    mu = s_tr / n_tr[..., None]
    scatter = q_tr - n_tr[..., None, None] * mu[..., :, None] * mu[..., None, :]
    pooled = (scatter[:, 0] + scatter[:, 1]) / (n_tr.sum(axis=1) - 2)[:, None, None]
    if lam is None:
        lams = REG_SCALE * np.trace(pooled, axis1=1, axis2=2) / m
    else:
        lams = np.full(n_folds, float(lam))
    a = pooled + lams[:, None, None] * np.eye(m)
    diff = mu[:, 1] - mu[:, 0]
    try:
        w = np.linalg.solve(a, diff[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise LDAFitError(
            "pooled covariance is singular on a training split; pass a positive regularizer lam"
        ) from exc
    if not np.all(np.isfinite(w)):
        raise LDAFitError("pooled covariance is singular on a training split")
    b = -0.5 * np.einsum("km,km->k", w, mu[:, 0] + mu[:, 1])
    score = np.einsum("nm,nm->n", x, w[folds]) + b[folds]
    correct = (score > 0).astype(np.int8) == y
    hits = np.bincount(folds, weights=correct, minlength=n_folds)
    sizes = np.bincount(folds, minlength=n_folds)
    return hits / sizes


def cv_accuracy(
    data: LabeledSet, n_folds: int, seed: RngSeed, lam: float | None = None
) -> float:
    """Mean held-out LDA accuracy over stratified folds."""
    if n_folds < 2:
        raise ValueError("need at least two folds")
    counts = np.bincount(data.labels, minlength=2)
    if counts[0] != counts[1]:
        raise ValueError("classes must be balanced")
    if counts[0] < n_folds:
        raise ValueError(f"{counts[0]} rows per class is fewer than {n_folds} folds")
    folds = stratified_folds(data.labels, n_folds, seed)
    return float(np.mean(_fold_accuracies(data.features, data.labels, folds, n_folds, lam)))


def discriminability(
    obs: DataSet,
    sim: DataSet,
    n_folds: int = DEFAULT_FOLDS,
    seed: RngSeed = RngSeed(0),
    lam: float | None = None,
) -> DiscrepancyValue:
    data = LabeledSet.from_datasets(obs, sim)
    return DiscrepancyValue(cv_accuracy(data, n_folds, seed, lam), n_folds, seed)


def delta_theta(
    theta,
    simulator,
    obs: DataSet,
    n: int,
    n_folds: int = DEFAULT_FOLDS,
    seed: RngSeed = RngSeed(0),
    lam: float | None = None,
) -> DiscrepancyValue:
    """One random realisation of the discrepancy at ``theta``.

    The simulated dataset and the fold assignment use separate streams
    derived from ``seed``.
    """
    theta = as_point(theta)
    if check_dataset(obs).shape[0] != n:
        raise ValueError(f"observed data has {len(obs)} rows but n={n}")
    sim = simulator(theta, n, seed.child("sim"))
    data = LabeledSet.from_datasets(obs, sim)
    value = cv_accuracy(data, n_folds, seed.child("folds"), lam)
    return DiscrepancyValue(value, n_folds, seed)

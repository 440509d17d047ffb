"""Gaussian-process regression with a squared-exponential kernel.

Models are immutable: :func:`gp_fit` factorises ``K + noise*I`` once and
:func:`gp_extend` returns a new model with one more observation, reusing the
existing Cholesky factor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize_scalar

JITTER_START = 1e-10
JITTER_MAX = 1e-4


class GPFitError(RuntimeError):
    """Covariance matrix could not be factorised even with jitter."""


@dataclass(frozen=True)
class KernelHyper:
    signal_variance: float
    lengthscale: tuple
    noise_variance: float
    prior_mean: float = 0.5

    def __post_init__(self):
        ls = tuple(float(v) for v in np.atleast_1d(self.lengthscale))
        object.__setattr__(self, "lengthscale", ls)
        if not self.signal_variance > 0:
            raise ValueError("signal_variance must be positive")
        if not all(v > 0 for v in ls):
            raise ValueError("lengthscales must be positive")
        if not self.noise_variance >= 0:
            raise ValueError("noise_variance must be nonnegative")
        if not math.isfinite(self.prior_mean):
            raise ValueError("prior_mean must be finite")

    @property
    def dim(self) -> int:
        return len(self.lengthscale)

    def as_dict(self) -> dict:
        return {
            "signal_variance": self.signal_variance,
            "lengthscale": list(self.lengthscale),
            "noise_variance": self.noise_variance,
            "prior_mean": self.prior_mean,
        }


@dataclass(frozen=True)
class HyperBounds:
    """Closed search box for :func:`optimize_hyperparams` (natural scale)."""

    signal_variance: tuple = (1e-4, 1.0)
    lengthscale: tuple = (0.2, 20.0)
    noise_variance: tuple = (1e-6, 0.1)

    def clip(self, hyper: KernelHyper) -> KernelHyper:
        return replace(
            hyper,
            signal_variance=float(np.clip(hyper.signal_variance, *self.signal_variance)),
            lengthscale=tuple(float(np.clip(v, *self.lengthscale)) for v in hyper.lengthscale),
            noise_variance=float(np.clip(hyper.noise_variance, *self.noise_variance)),
        )

    def contains(self, hyper: KernelHyper) -> bool:
        def inside(v, box):
            return box[0] <= v <= box[1]

        return (
            inside(hyper.signal_variance, self.signal_variance)
            and all(inside(v, self.lengthscale) for v in hyper.lengthscale)
            and inside(hyper.noise_variance, self.noise_variance)
        )


@dataclass(frozen=True)
class PosteriorStats:
    mean: float
    variance: float


@dataclass(frozen=True)
class GPModel:
    inputs: np.ndarray  # (K, d)
    targets: np.ndarray  # (K,)
    hyper: KernelHyper
    factor: np.ndarray  # lower Cholesky factor of K + (noise + jitter) I
    alpha: np.ndarray = field(repr=False)
    jitter: float = 0.0

    @property
    def size(self) -> int:
        return self.inputs.shape[0]


def _as_inputs(x, dim=None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x[None, None]
    elif x.ndim == 1:
        x = x[:, None] if dim in (None, 1) else x[None, :]
    if dim is not None and x.shape[1] != dim:
        raise ValueError(f"expected {dim}-dimensional inputs, got {x.shape[1]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("inputs must be finite")
    return x


def kernel_matrix(a, b, hyper: KernelHyper) -> np.ndarray:
    a = _as_inputs(a, hyper.dim) / np.asarray(hyper.lengthscale)
    b = _as_inputs(b, hyper.dim) / np.asarray(hyper.lengthscale)
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * a @ b.T
    )
    return hyper.signal_variance * np.exp(-0.5 * np.maximum(sq, 0.0))


def kernel(x, y, hyper: KernelHyper) -> float:
    """Squared-exponential covariance between two points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape or x.shape[0] != hyper.dim:
        raise ValueError("point dimensions disagree with the kernel")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("kernel inputs must be finite")
    r = (x - y) / np.asarray(hyper.lengthscale)
    return float(hyper.signal_variance * np.exp(-0.5 * np.dot(r, r)))


def _cholesky_with_jitter(a: np.ndarray) -> tuple[np.ndarray, float]:
    try:
        return np.linalg.cholesky(a), 0.0
    except np.linalg.LinAlgError:
        pass
    jitter = JITTER_START
    eye = np.eye(a.shape[0])
    while jitter <= JITTER_MAX * (1 + 1e-9):
        try:
            return np.linalg.cholesky(a + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise GPFitError(
        f"covariance not positive definite even with jitter {JITTER_MAX:g}; "
        "add observation noise or remove duplicate inputs"
    )


def gp_fit(inputs, targets, hyper: KernelHyper) -> GPModel:
    x = _as_inputs(inputs, hyper.dim)
    y = np.asarray(targets, dtype=float).reshape(-1)
    if x.shape[0] < 1:
        raise ValueError("need at least one training point")
    if x.shape[0] != y.shape[0]:
        raise ValueError("inputs and targets differ in length")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    cov = kernel_matrix(x, x, hyper) + hyper.noise_variance * np.eye(x.shape[0])
    chol, jitter = _cholesky_with_jitter(cov)
    alpha = cho_solve((chol, True), y - hyper.prior_mean)
    return GPModel(x, y, hyper, chol, alpha, jitter)


def gp_extend(model: GPModel, x_new, y_new: float) -> GPModel:
    """Condition on one more observation via a bordered Cholesky update."""
    hyper = model.hyper
    x_new = _as_inputs(np.atleast_1d(x_new), hyper.dim)
    k = kernel_matrix(model.inputs, x_new, hyper)[:, 0]
    kss = hyper.signal_variance + hyper.noise_variance + model.jitter
    row = solve_triangular(model.factor, k, lower=True)
    d2 = kss - row @ row
    if not d2 > 0:
        return gp_fit(np.vstack([model.inputs, x_new]), np.append(model.targets, y_new), hyper)
    n = model.size
    chol = np.zeros((n + 1, n + 1))
    chol[:n, :n] = model.factor
    chol[n, :n] = row
    chol[n, n] = math.sqrt(d2)
    inputs = np.vstack([model.inputs, x_new])
    targets = np.append(model.targets, float(y_new))
    alpha = cho_solve((chol, True), targets - hyper.prior_mean)
    return GPModel(inputs, targets, hyper, chol, alpha, model.jitter)


def gp_predict_many(model: GPModel, thetas) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance of the latent function at each row of ``thetas``."""
    xs = _as_inputs(thetas, model.hyper.dim)
    ks = kernel_matrix(model.inputs, xs, model.hyper)
    mean = model.hyper.prior_mean + ks.T @ model.alpha
    v = solve_triangular(model.factor, ks, lower=True)
    var = model.hyper.signal_variance - np.sum(v * v, axis=0)
    return mean, np.maximum(var, 0.0)


def gp_predict(model: GPModel, theta) -> PosteriorStats:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    mean, var = gp_predict_many(model, theta[None, :])
    return PosteriorStats(float(mean[0]), float(var[0]))


def log_marginal_likelihood(model: GPModel) -> float:
    r = model.targets - model.hyper.prior_mean
    return float(
        -0.5 * r @ model.alpha
        - np.sum(np.log(np.diag(model.factor)))
        - 0.5 * model.size * math.log(2.0 * math.pi)
    )


def _pack(hyper: KernelHyper) -> np.ndarray:
    return np.log([hyper.signal_variance, *hyper.lengthscale, hyper.noise_variance])


def _unpack(z: np.ndarray, prior_mean: float) -> KernelHyper:
    v = np.exp(z)
    return KernelHyper(float(v[0]), tuple(float(u) for u in v[1:-1]), float(v[-1]), prior_mean)


def _log_box(bounds: HyperBounds, dim: int) -> np.ndarray:
    rows = [bounds.signal_variance] + [bounds.lengthscale] * dim + [bounds.noise_variance]
    return np.log(np.asarray(rows, dtype=float))


def neg_log_evidence(z, x, y, prior_mean: float) -> float:
    """Objective of the hyperparameter search, in log-parameter coordinates."""
    try:
        return -log_marginal_likelihood(gp_fit(x, y, _unpack(np.asarray(z), prior_mean)))
    except GPFitError:
        return math.inf


def optimize_hyperparams(
    inputs,
    targets,
    search_bounds: HyperBounds = HyperBounds(),
    defaults: KernelHyper | None = None,
    grid_points: int = 6,
    max_sweeps: int = 100,
) -> KernelHyper:
    """Maximise the evidence over a log-scale grid, then refine by coordinate descent.

    With fewer than three observations the defaults are returned unchanged.
    """
    x = _as_inputs(inputs)
    y = np.asarray(targets, dtype=float).reshape(-1)
    dim = x.shape[1]
    if defaults is None:
        defaults = KernelHyper(0.05**2, (2.0,) * dim, 0.05**2)
    if x.shape[0] < 3:
        return defaults
    prior_mean = defaults.prior_mean
    box = _log_box(search_bounds, dim)

    def objective(z):
        return neg_log_evidence(z, x, y, prior_mean)

    axes = [np.linspace(lo, hi, grid_points) for lo, hi in box]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(box))
    scores = np.array([objective(z) for z in mesh])
    if not np.any(np.isfinite(scores)):
        return search_bounds.clip(defaults)
    z = mesh[int(np.argmin(scores))].copy()
    best = float(scores.min())

    for _ in range(max_sweeps):
        start = best
        for i, (lo, hi) in enumerate(box):
            def along(t, i=i):
                trial = z.copy()
                trial[i] = t
                return objective(trial)

            res = minimize_scalar(along, bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-9, "maxiter": 500})
            if res.fun < best:
                z[i], best = res.x, float(res.fun)
        if start - best < 1e-12:
            break

    hyper = _unpack(np.clip(z, box[:, 0], box[:, 1]), prior_mean)
    if not math.isfinite(best):
        return search_bounds.clip(defaults)
    return search_bounds.clip(hyper)

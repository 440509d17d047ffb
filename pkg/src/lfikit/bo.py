"""GP-guided search for low-discrepancy parameters and a surrogate-based posterior.

Each step evaluates the stochastic discrepancy once, refits the surrogate and
picks the next point by minimising a lower confidence bound over a candidate
grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List

import numpy as np
from scipy.stats import norm

from .abc import PriorSpec
from .discrepancy import DEFAULT_FOLDS, delta_theta
from .gp import GPModel, HyperBounds, KernelHyper, gp_fit, gp_predict_many, optimize_hyperparams
from .parallel import ordered_map
from .simulators import DataSet, RngSeed, as_point


def default_beta(k: int) -> float:
    """Exploration weight for step ``k`` (1-based): 2 log(k^2 pi^2 / 0.3), at least 1."""
    return max(1.0, 2.0 * math.log(k * k * math.pi**2 / 0.3))


def _box(bounds) -> tuple[np.ndarray, np.ndarray]:
    b = np.asarray(bounds, dtype=float).reshape(-1, 2)
    if np.any(b[:, 0] >= b[:, 1]):
        raise ValueError("bounds need lo < hi on every coordinate")
    return b[:, 0], b[:, 1]


def default_hyper(bounds, prior_mean: float = 0.5) -> KernelHyper:
    lo, hi = _box(bounds)
    return KernelHyper(0.05**2, tuple((hi - lo) / 10.0), 0.05**2, prior_mean)


def default_hyper_bounds(bounds) -> HyperBounds:
    lo, hi = _box(bounds)
    width = float(np.min(hi - lo))
    return HyperBounds(
        signal_variance=(1e-4, 1.0),
        lengthscale=(width / 100.0, width),
        noise_variance=(1e-6, 0.1),
    )


@dataclass(frozen=True)
class AcquisitionConfig:
    rule: str = "lcb"
    beta: Callable[[int], float] = default_beta
    candidate_grid_size: int = 512
    initial_design_size: int = 2
    optimize_from: int = 5  # refit hyperparameters once this many points exist
    prior_mean: float = 0.5

    def __post_init__(self):
        if self.rule != "lcb":
            raise ValueError(f"unknown acquisition rule {self.rule!r}")
        if self.candidate_grid_size < 100:
            raise ValueError("candidate_grid_size must be at least 100")
        if self.initial_design_size < 1:
            raise ValueError("initial_design_size must be at least 1")


def lcb(model: GPModel, thetas, beta: float) -> np.ndarray:
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    mean, var = gp_predict_many(model, thetas)
    return mean - math.sqrt(beta) * np.sqrt(var)


def uniform_grid(bounds, size: int) -> np.ndarray:
    """Tensor grid with about ``size`` points in total."""
    lo, hi = _box(bounds)
    per_axis = max(2, int(round(size ** (1.0 / lo.shape[0]))))
    axes = [np.linspace(a, b, per_axis) for a, b in zip(lo, hi)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lo.shape[0])
    return np.round(mesh, 12)


def candidate_grid(bounds, size: int, seed: RngSeed) -> np.ndarray:
    """Uniform grid followed by ``size // 4`` seeded uniform points."""
    lo, hi = _box(bounds)
    extra = seed.generator().uniform(lo, hi, size=(size // 4, lo.shape[0]))
    return np.vstack([uniform_grid(bounds, size), extra])


def acquire_next(
    model: GPModel, bounds, config: AcquisitionConfig, step: int, seed: RngSeed
) -> np.ndarray:
    """Candidate minimising mean - sqrt(beta_step) * sd; ties go to the lowest index."""
    cands = candidate_grid(bounds, config.candidate_grid_size, seed)
    scores = lcb(model, cands, config.beta(step))
    return cands[int(np.argmin(scores))].copy()


@dataclass(frozen=True)
class StepRecord:
    k: int
    theta: np.ndarray
    delta: float
    seed: RngSeed
    hyper: KernelHyper
    mean: np.ndarray  # surrogate mean on the trace's evaluation grid after step k
    variance: np.ndarray
    incumbent: np.ndarray


@dataclass
class BOTrace:
    grid: np.ndarray
    steps: List[StepRecord] = field(default_factory=list)
    model: GPModel | None = None

    @property
    def thetas(self) -> np.ndarray:
        return np.array([s.theta for s in self.steps])

    @property
    def deltas(self) -> np.ndarray:
        return np.array([s.delta for s in self.steps])

    @property
    def incumbent(self) -> np.ndarray:
        return self.steps[-1].incumbent

    def step(self, k: int) -> StepRecord:
        rec = self.steps[k - 1]
        assert rec.k == k
        return rec


class BOLFIError(RuntimeError):
    """A step failed; ``partial`` holds the trace up to the failure."""

    def __init__(self, message: str, partial: BOTrace):
        super().__init__(message)
        self.partial = partial


def fit_surrogate(thetas, deltas, bounds, config: AcquisitionConfig) -> GPModel:
    defaults = default_hyper(bounds, config.prior_mean)
    if len(deltas) >= config.optimize_from:
        hyper = optimize_hyperparams(thetas, deltas, default_hyper_bounds(bounds), defaults)
    else:
        hyper = defaults
    return gp_fit(thetas, deltas, hyper)


def bolfi_run(
    simulator,
    obs: DataSet,
    bounds,
    total_acquisitions: int,
    config: AcquisitionConfig = AcquisitionConfig(),
    root_seed: int = 0,
    n_folds: int = DEFAULT_FOLDS,
    eval_grid_size: int = 401,
    lam: float | None = None,
) -> BOTrace:
    """Run ``total_acquisitions`` discrepancy evaluations; the first few form a uniform design."""
    lo, hi = _box(bounds)
    if total_acquisitions < config.initial_design_size:
        raise ValueError("total_acquisitions must cover the initial design")
    root = RngSeed(root_seed)
    n = obs.shape[0]
    design = root.child("design").generator().uniform(
        lo, hi, size=(config.initial_design_size, lo.shape[0])
    )
    trace = BOTrace(uniform_grid(bounds, eval_grid_size))

    def evaluate(k: int, theta) -> float:
        return delta_theta(theta, simulator, obs, n, n_folds, root.child("eval", k), lam).value

    try:
        init = ordered_map(lambda i: evaluate(i + 1, design[i]), range(len(design)))
        thetas: list = []
        deltas: list = []
        theta = design[0]
        for k in range(1, total_acquisitions + 1):
            if k <= len(design):
                theta, delta = design[k - 1], init[k - 1]
            else:
                delta = evaluate(k, theta)
            thetas.append(as_point(theta, lo.shape[0]))
            deltas.append(delta)
            model = fit_surrogate(np.array(thetas), np.array(deltas), bounds, config)
            mean, var = gp_predict_many(model, trace.grid)
            trace.steps.append(StepRecord(
                k, thetas[-1], delta, root.child("eval", k), model.hyper,
                mean, var, trace.grid[int(np.argmin(mean))].copy(),
            ))
            trace.model = model
            if k >= len(design) and k < total_acquisitions:
                theta = acquire_next(model, bounds, config, k, root.child("acquire", k + 1))
    except Exception as exc:
        raise BOLFIError(f"step {len(trace.steps) + 1} failed: {exc}", trace) from exc
    return trace


@dataclass(frozen=True)
class ApproxPosterior:
    grid: np.ndarray
    unnormalized_density: np.ndarray
    epsilon_model: float

    @property
    def normalized(self) -> np.ndarray:
        total = self.unnormalized_density.sum()
        if not total > 0:
            raise ValueError("posterior has zero mass on the grid")
        return self.unnormalized_density / total

    @property
    def mode(self) -> np.ndarray:
        return self.grid[int(np.argmax(self.unnormalized_density))]


def approx_posterior(
    model: GPModel, prior: PriorSpec, grid, epsilon: float | None = None
) -> ApproxPosterior:
    """Prior times the surrogate probability that the discrepancy falls below a threshold.

    The threshold defaults to the smallest surrogate mean over ``grid``.
    """
    grid = np.asarray(grid, dtype=float).reshape(-1, prior.dim)
    if grid.shape[0] == 0:
        raise ValueError("empty grid")
    mean, var = gp_predict_many(model, grid)
    eps = float(mean.min()) if epsilon is None else float(epsilon)
    sd = np.sqrt(var + model.hyper.noise_variance)
    if np.any(sd == 0):
        raise ValueError("surrogate predictive variance vanished; add observation noise")
    density = prior.pdf(grid) * norm.cdf((eps - mean) / sd)
    return ApproxPosterior(grid, density, eps)

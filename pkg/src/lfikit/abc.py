"""Rejection ABC with a classifier discrepancy.

Proposals come from a uniform box prior. Proposal ``i`` and its discrepancy
evaluation use streams derived from ``(root_seed, i)``, so results do not
depend on evaluation order or thread count.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from .discrepancy import DEFAULT_FOLDS, delta_theta
from .parallel import ordered_map, thread_count
from .simulators import DataSet, RngSeed


class BudgetExhausted(RuntimeError):
    """Raised when ``max_proposals`` is spent before ``N`` acceptances."""

    def __init__(self, partial: "SampleSet"):
        self.partial = partial
        super().__init__(
            f"accepted {len(partial.accepted)} of the required samples after "
            f"{partial.proposals_used} proposals"
        )


@dataclass(frozen=True)
class PriorSpec:
    """Independent uniform priors on each coordinate."""

    bounds: tuple

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if not bounds:
            raise ValueError("prior needs at least one coordinate")
        for lo, hi in bounds:
            if not lo < hi:
                raise ValueError(f"empty prior interval [{lo}, {hi}]")
        object.__setattr__(self, "bounds", bounds)

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def lower(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds])

    def sample(self, seed: RngSeed) -> np.ndarray:
        return seed.generator().uniform(self.lower, self.upper)

    def pdf(self, thetas) -> np.ndarray:
        x = np.asarray(thetas, dtype=float).reshape(-1, self.dim)
        inside = np.all((x >= self.lower) & (x <= self.upper), axis=1)
        return inside / float(np.prod(self.upper - self.lower))


@dataclass(frozen=True)
class ABCConfig:
    N: int
    epsilon: float = 0.55
    max_proposals: int = 10_000
    n: int = 50
    n_folds: int = DEFAULT_FOLDS
    root_seed: int = 0
    lam: float | None = None

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be at least 1")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.max_proposals < self.N:
            raise ValueError("max_proposals must be at least N")


@dataclass(frozen=True)
class ABCRecord:
    index: int
    theta: np.ndarray
    delta: float
    seed: RngSeed
    accepted: bool


@dataclass
class SampleSet:
    accepted: np.ndarray  # (N_accepted, d)
    proposals_used: int
    records: List[ABCRecord] = field(default_factory=list)

    @property
    def acceptance_rate(self) -> float:
        if self.proposals_used == 0:
            return 0.0
        return len(self.accepted) / self.proposals_used

    @property
    def accepted_records(self) -> List[ABCRecord]:
        return [r for r in self.records if r.accepted]


def proposal_seeds(root: RngSeed, index: int) -> tuple[RngSeed, RngSeed]:
    """(prior draw stream, discrepancy stream) for proposal ``index``."""
    return root.child("proposal", index), root.child("eval", index)


def abc_rejection(
    prior: PriorSpec, config: ABCConfig, simulator, obs: DataSet, threads: int | None = None
) -> SampleSet:
    """Propose from the prior until ``config.N`` draws have discrepancy <= epsilon."""
    root = RngSeed(config.root_seed)
    threads = thread_count() if threads is None else threads
    batch = max(1, threads) * 4 if threads > 1 else 1

    def evaluate(i: int) -> ABCRecord:
        draw_seed, eval_seed = proposal_seeds(root, i)
        theta = prior.sample(draw_seed)
        d = delta_theta(theta, simulator, obs, config.n, config.n_folds, eval_seed, config.lam)
        return ABCRecord(i, theta, d.value, eval_seed, d.value <= config.epsilon)

    records: List[ABCRecord] = []
    n_acc = 0
    i = 0
    while n_acc < config.N and i < config.max_proposals:
        chunk = range(i, min(i + batch, config.max_proposals))
        for rec in ordered_map(evaluate, chunk, threads):
            records.append(rec)
            n_acc += rec.accepted
            if n_acc == config.N:
                break
        i = records[-1].index + 1

    accepted = np.array([r.theta for r in records if r.accepted]).reshape(-1, prior.dim)
    result = SampleSet(accepted, len(records), records)
    if n_acc < config.N:
        raise BudgetExhausted(result)
    return result


def replay(record: ABCRecord, simulator, obs: DataSet, config: ABCConfig) -> float:
    """Recompute the discrepancy stored in ``record``."""
    return delta_theta(
        record.theta, simulator, obs, config.n, config.n_folds, record.seed, config.lam
    ).value

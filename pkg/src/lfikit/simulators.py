"""Seeded simulators and the Gaussian toy model.

A simulator is any callable ``sim(theta, n, seed) -> (n, m) array`` that is a
pure function of its arguments. Randomness is drawn only from generators
built from an :class:`RngSeed`.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass
from functools import lru_cache
from typing import Protocol, Sequence, Union

import numpy as np

ParameterPoint = np.ndarray  # shape (d,)
DataSet = np.ndarray  # shape (n, m)

_U64 = 2**64

# Canonical seed for the observed dataset of the toy experiments.
OBSERVED_SEED = 20150101


def _key_to_int(key: Union[int, str]) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    key = int(key)
    if key < 0:
        raise ValueError("stream keys must be non-negative")
    return key


@dataclass(frozen=True)
class RngSeed:
    """A (seed, stream_id) pair; together they fix every downstream draw."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not (0 <= int(v) < _U64):
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v}")
            object.__setattr__(self, name, int(v))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, *keys: Union[int, str]) -> "RngSeed":
        """Deterministically derive a new stream from this one and ``keys``."""
        ss = np.random.SeedSequence(
            self.seed, spawn_key=(self.stream_id, *(_key_to_int(k) for k in keys))
        )
        return RngSeed(self.seed, int(ss.generate_state(1, np.uint64)[0]))

    def as_dict(self) -> dict:
        return {"seed": self.seed, "stream_id": self.stream_id}


@dataclass(frozen=True)
class SimulatorSpec:
    dimension: int
    bounds: tuple  # ((lo, hi), ...) one pair per coordinate
    sample_size: int

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        if len(self.bounds) != self.dimension:
            raise ValueError("need one (lo, hi) pair per coordinate")
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        for lo, hi in bounds:
            if not lo < hi:
                raise ValueError(f"empty interval [{lo}, {hi}]")
        object.__setattr__(self, "bounds", bounds)
        if self.sample_size < 2:
            raise ValueError("sample_size must be at least 2")

    @property
    def lower(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds])

    def contains(self, theta) -> bool:
        theta = as_point(theta, self.dimension)
        return bool(np.all(theta >= self.lower) and np.all(theta <= self.upper))


class Simulator(Protocol):
    spec: SimulatorSpec

    def __call__(self, theta, n: int, seed: RngSeed) -> DataSet: ...


def as_point(theta, dimension: int | None = None) -> ParameterPoint:
    """Coerce ``theta`` to a finite 1-D float array, checking its length."""
    point = np.atleast_1d(np.asarray(theta, dtype=float))
    if point.ndim != 1:
        raise ValueError(f"parameter point must be 1-D, got shape {point.shape}")
    if dimension is not None and point.shape[0] != dimension:
        raise ValueError(f"expected {dimension} coordinates, got {point.shape[0]}")
    if not np.all(np.isfinite(point)):
        raise ValueError(f"parameter point must be finite, got {point}")
    return point


def check_dataset(values) -> DataSet:
    data = np.asarray(values, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if data.ndim != 2:
        raise ValueError(f"dataset must be an (n, m) matrix, got shape {data.shape}")
    if data.shape[0] < 2:
        raise ValueError("dataset needs at least two rows")
    if not np.all(np.isfinite(data)):
        raise ValueError("dataset contains non-finite entries")
    return data


def simulate_gaussian(theta, n: int, seed: RngSeed) -> DataSet:
    """Draw ``n`` i.i.d. samples from Normal(theta, 1) as an (n, 1) matrix."""
    mean = as_point(theta, 1)[0]
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    z = seed.generator().standard_normal(int(n))
    return (mean + z)[:, None]


@lru_cache(maxsize=64)
def _observed(n: int, seed: RngSeed) -> DataSet:
    data = simulate_gaussian(0.0, n, seed)
    data.setflags(write=False)
    return data


def observed_data(n: int, seed: RngSeed) -> DataSet:
    """The fixed observed dataset (true mean 0); cached so repeated calls share it."""
    return _observed(int(n), seed)


@dataclass(frozen=True)
class GaussianSimulator:
    """Unit-variance Gaussian with unknown mean: the toy model."""

    spec: SimulatorSpec = SimulatorSpec(1, ((-10.0, 10.0),), 50)

    def __call__(self, theta, n: int, seed: RngSeed) -> DataSet:
        return simulate_gaussian(theta, n, seed)


def split_seeds(root: RngSeed, count: int, label: str = "eval") -> Sequence[RngSeed]:
    """Distinct streams for ``count`` concurrent evaluations, derived from ``root``."""
    return [root.child(label, i) for i in range(count)]

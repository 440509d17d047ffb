"""Pilot: step-10 incumbents and step-20 surrogate fit over root seeds."""
import sys
import time

import numpy as np

from lfikit import GaussianSimulator, RngSeed, bolfi_run, delta_theta, observed_data
from lfikit.simulators import OBSERVED_SEED


def mc_mean(theta, obs, draws, seed=RngSeed(987654321)):
    sim = GaussianSimulator()
    return np.mean([
        delta_theta(theta, sim, obs, len(obs), 5, seed.child(int(round((theta + 100) * 1000)), i)).value
        for i in range(draws)
    ])


def main(seeds=10, draws=1000):
    obs = observed_data(50, RngSeed(OBSERVED_SEED))
    print("obs mean", obs.mean())
    sim = GaussianSimulator()
    for s in range(seeds):
        t = time.time()
        tr = bolfi_run(sim, obs, [(-10, 10)], 20, root_seed=s)
        inc10 = tr.step(10).incumbent[0]
        mask = np.abs(tr.grid[:, 0]) <= 1 + 1e-9
        pts = tr.grid[mask, 0][::4]
        mu = tr.step(20).mean[mask][::4]
        ref = np.array([mc_mean(p, obs, draws) for p in pts]) if draws else mu
        print(f"seed {s}: inc10={inc10:+.3f} inc20={tr.incumbent[0]:+.3f} "
              f"maxerr20={np.max(np.abs(mu-ref)):.3f} hyper={tr.step(20).hyper} "
              f"thetas={np.round(tr.thetas[:, 0], 2)} t={time.time()-t:.1f}s")


if __name__ == "__main__":
    main(*map(int, sys.argv[1:]))

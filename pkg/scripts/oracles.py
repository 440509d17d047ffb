"""Independent Monte Carlo / closed-form checks used to calibrate the test suite.

Run once before trusting the frozen values in tests/; prints each quantity.
"""
import numpy as np
from scipy import integrate
from scipy.stats import norm

from lfikit import GaussianSimulator, RngSeed, delta_theta, observed_data, simulate_gaussian
from lfikit.simulators import OBSERVED_SEED


def clt_check(seeds=100, n=10_000):
    worst_mean = max(abs(simulate_gaussian(0.0, n, RngSeed(s)).mean()) for s in range(seeds))
    worst_var = max(abs(simulate_gaussian(0.0, n, RngSeed(s)).var(ddof=1) - 1) for s in range(seeds))
    worst_shift = max(abs(simulate_gaussian(6.0, n, RngSeed(s)).mean() - 6) for s in range(seeds))
    print(f"CLT over {seeds} seeds: max|mean|={worst_mean:.4f} max|var-1|={worst_var:.4f} "
          f"max|mean-6|={worst_shift:.4f} (bound 0.05)")


def bayes_accuracy_by_quadrature(sep):
    # accuracy of the midpoint rule between N(0,1) and N(sep,1)
    half = sep / 2
    p0, _ = integrate.quad(norm.pdf, -np.inf, half)
    p1, _ = integrate.quad(lambda x: norm.pdf(x, sep), half, np.inf)
    return 0.5 * (p0 + p1)


def bayes_table():
    for t in (0, 0.5, 1, 2, 4, 6):
        print(f"theta={t}: Phi(|t|/2)={norm.cdf(t / 2):.6f} quad={bayes_accuracy_by_quadrature(t):.6f}")
    print(f"ABC boundary 2*Phi^-1(0.55) = {2 * norm.ppf(0.55):.4f}")


def delta_moments(theta, draws, n=50, fresh_obs=True):
    sim = GaussianSimulator()
    vals = np.empty(draws)
    fixed = observed_data(n, RngSeed(OBSERVED_SEED))
    for i in range(draws):
        obs = simulate_gaussian(0.0, n, RngSeed(424242, i)) if fresh_obs else fixed
        vals[i] = delta_theta(theta, sim, obs, n, 5, RngSeed(777, i)).value
    return vals


if __name__ == "__main__":
    clt_check()
    bayes_table()
    v = delta_moments(0.0, 100_000)
    print(f"theta=0 n=50 fresh X, 1e5 draws: mean={v.mean():.4f} sd={v.std():.4f} "
          f"q05={np.quantile(v, .05):.3f} q95={np.quantile(v, .95):.3f}")
    v = delta_moments(0.0, 20_000, fresh_obs=False)
    print(f"theta=0 n=50 canonical X: mean={v.mean():.4f} sd={v.std():.4f}")
    v = delta_moments(6.0, 20_000)
    print(f"theta=6 n=50: min={v.min():.3f} q001={np.quantile(v, .001):.3f} mean={v.mean():.4f}")
    v = delta_moments(0.5, 2_000, n=10_000)
    print(f"theta=0.5 n=10000: mean={v.mean():.4f} sd={v.std():.4f} range=[{v.min():.3f}, {v.max():.3f}]")
    for t in (0.0, 0.25, 0.35, 0.5):
        v = delta_moments(t, 500, n=10_000)
        print(f"n=10000 theta={t}: P(delta<=0.55)={np.mean(v <= 0.55):.3f}")

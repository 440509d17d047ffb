import math

import numpy as np
import pytest
from scipy.stats import norm

from lfikit.abc import PriorSpec
from lfikit.bo import (
    AcquisitionConfig,
    BOLFIError,
    acquire_next,
    approx_posterior,
    bolfi_run,
    candidate_grid,
    default_beta,
    lcb,
)
from lfikit.gp import KernelHyper, gp_fit, gp_predict_many
from lfikit.simulators import GaussianSimulator, RngSeed, observed_data, simulate_gaussian

BOX = [(-10.0, 10.0)]


@pytest.fixture(scope="module")
def obs():
    return observed_data(50, RngSeed(20150101))


@pytest.fixture(scope="module")
def traces(obs):
    return [bolfi_run(GaussianSimulator(), obs, BOX, 12, root_seed=s) for s in range(10)]


def test_beta_schedule():
    assert default_beta(1) == pytest.approx(2 * math.log(math.pi**2 / 0.3))
    assert all(default_beta(k) >= 1 for k in range(1, 50))


def test_near_zero_variance_picks_mean_minimum():
    x = np.linspace(-10, 10, 81)[:, None]
    y = 0.5 + 0.01 * (x[:, 0] - 2.0) ** 2
    model = gp_fit(x, y, KernelHyper(1.0, (1.0,), 0.0, 0.5))
    cfg = AcquisitionConfig()
    seed = RngSeed(1)
    got = acquire_next(model, BOX, cfg, 10, seed)
    mu, var = gp_predict_many(model, candidate_grid(BOX, cfg.candidate_grid_size, seed))
    assert var.max() < 1e-6
    assert gp_predict_many(model, got[None, :])[0][0] <= mu.min() + 1e-3
    assert abs(got[0] - 2.0) <= 0.1


def test_large_beta_explores_away_from_data():
    model = gp_fit([[0.0]], [0.5], KernelHyper(0.01, (2.0,), 1e-4, 0.5))
    cfg = AcquisitionConfig(beta=lambda k: 1e6)
    got = acquire_next(model, BOX, cfg, 1, RngSeed(0))
    assert abs(got[0]) >= 5.0


def two_point_lcb(t, beta):
    # closed form for inputs {0, 1}, targets {0.5, 0.6}, sf2=1, l=1, sn2=0.01, c=0.5
    a = math.exp(-0.5)
    det = 1.01**2 - a * a
    k0, k1 = np.exp(-0.5 * t**2), np.exp(-0.5 * (t - 1) ** 2)
    w0 = (1.01 * k0 - a * k1) / det
    w1 = (-a * k0 + 1.01 * k1) / det
    mu = 0.5 + 0.1 * w1
    var = 1.0 - (k0 * w0 + k1 * w1)
    return mu - math.sqrt(beta) * np.sqrt(np.maximum(var, 0))


def test_two_point_model_matches_grid_oracle():
    bounds = [(-1.0, 2.0)]
    model = gp_fit([[0.0], [1.0]], [0.5, 0.6], KernelHyper(1.0, (1.0,), 0.01, 0.5))
    cfg = AcquisitionConfig(beta=lambda k: 4.0)
    got = acquire_next(model, bounds, cfg, 3, RngSeed(5))
    fine = np.linspace(-1, 2, 300_001)
    oracle = two_point_lcb(fine, 4.0)
    best = fine[np.argmin(oracle)]
    resolution = 3.0 / (cfg.candidate_grid_size - 1)
    assert abs(got[0] - best) <= resolution
    assert two_point_lcb(got[0], 4.0) <= oracle.min() + 1e-4


def test_lcb_dominance_and_containment(traces):
    cfg = AcquisitionConfig()
    for tr in traces:
        assert np.all((tr.thetas >= -10) & (tr.thetas <= 10))
        assert [s.k for s in tr.steps] == list(range(1, 13))
        for k in range(cfg.initial_design_size, len(tr.steps)):
            prev = tr.step(k)
            model = gp_fit(tr.thetas[:k], tr.deltas[:k], prev.hyper)
            cands = candidate_grid(BOX, cfg.candidate_grid_size,
                                   RngSeed(tr.steps[0].seed.seed).child("acquire", k + 1))
            chosen = lcb(model, tr.step(k + 1).theta[None, :], default_beta(k))[0]
            assert chosen <= lcb(model, cands, default_beta(k)).min() + 1e-12


def test_incumbent_improves(traces, obs):
    # objective at the incumbent: Bayes accuracy against the observed sample mean
    def objective(tr, k):
        return norm.cdf(abs(tr.step(k).incumbent[0] - obs.mean()) / 2)

    start = np.median([objective(tr, 2) for tr in traces])
    later = np.median([objective(tr, 10) for tr in traces])
    assert later <= start


def test_determinism(obs):
    a = bolfi_run(GaussianSimulator(), obs, BOX, 8, root_seed=42)
    b = bolfi_run(GaussianSimulator(), obs, BOX, 8, root_seed=42)
    assert np.array_equal(a.thetas, b.thetas)
    assert np.array_equal(a.deltas, b.deltas)
    assert all(np.array_equal(s.mean, t.mean) for s, t in zip(a.steps, b.steps))


class CountingSimulator:
    def __init__(self, fail_at=None):
        self.calls = 0
        self.fail_at = fail_at

    def __call__(self, theta, n, seed):
        self.calls += 1
        if self.calls == self.fail_at:
            raise RuntimeError("simulator crashed")
        return simulate_gaussian(theta, n, seed)


def test_budget_accounting(obs):
    sim = CountingSimulator()
    tr = bolfi_run(sim, obs, BOX, 9, root_seed=1)
    assert sim.calls == len(tr.steps) == 9


def test_partial_trace_on_failure(obs):
    with pytest.raises(BOLFIError) as info:
        bolfi_run(CountingSimulator(fail_at=5), obs, BOX, 9, root_seed=1)
    assert len(info.value.partial.steps) == 4


def test_flat_surrogate_gives_prior():
    model = gp_fit([[0.0]], [0.5], KernelHyper(0.01, (1e-3,), 0.01, 0.5))
    grid = np.linspace(-5, 5, 101)
    post = approx_posterior(model, PriorSpec([(-5.0, 5.0)]), grid[grid != 0])
    assert np.allclose(post.normalized, 1 / post.grid.shape[0])


def test_posterior_respects_prior_support(traces):
    grid = np.linspace(-10, 10, 401)
    post = approx_posterior(traces[0].model, PriorSpec([(-1.0, 1.0)]), grid)
    outside = np.abs(grid) > 1
    assert np.all(post.unnormalized_density[outside] == 0)
    assert np.all(post.unnormalized_density >= 0)
    assert post.normalized.sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        approx_posterior(traces[0].model, PriorSpec([(-1.0, 1.0)]), [])


def test_config_validation():
    with pytest.raises(ValueError):
        AcquisitionConfig(candidate_grid_size=50)
    with pytest.raises(ValueError):
        AcquisitionConfig(rule="ei")
    with pytest.raises(ValueError):
        bolfi_run(GaussianSimulator(), simulate_gaussian(0, 50, RngSeed(0)), BOX, 1)


def test_posterior_mode_after_twenty_steps(obs):
    from lfikit.abc import ABCConfig, abc_rejection
    from lfikit.harness import sample_mode

    tr = bolfi_run(GaussianSimulator(), obs, BOX, 20, root_seed=0)
    post = approx_posterior(tr.model, PriorSpec(BOX), tr.grid)
    abc = abc_rejection(PriorSpec(BOX), ABCConfig(N=100, epsilon=0.55, n=50, root_seed=0),
                        GaussianSimulator(), obs)
    abc_mode = sample_mode(abc.accepted, BOX)
    assert abs(post.mode[0]) <= 0.5
    assert abs(post.mode[0] - abc_mode) <= 0.5

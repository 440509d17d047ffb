import numpy as np
import pytest
from scipy import stats

from lfikit.abc import ABCConfig, BudgetExhausted, PriorSpec, abc_rejection, proposal_seeds, replay
from lfikit.simulators import GaussianSimulator, RngSeed, observed_data

PRIOR = PriorSpec([(-10.0, 10.0)])
SIM = GaussianSimulator()


@pytest.fixture(scope="module")
def obs50():
    return observed_data(50, RngSeed(5))


def test_epsilon_one_recovers_prior(obs50):
    cfg = ABCConfig(N=100, epsilon=1.0, max_proposals=100, n=50, root_seed=3)
    out = abc_rejection(PRIOR, cfg, SIM, obs50)
    assert out.acceptance_rate == 1.0
    assert abs(out.accepted.mean()) <= 1.0
    ks = stats.kstest(out.accepted[:, 0], stats.uniform(-10, 20).cdf)
    assert ks.pvalue > 0.01
    first = [PRIOR.sample(proposal_seeds(RngSeed(3), i)[0]) for i in range(100)]
    assert np.array_equal(out.accepted, np.array(first))


def test_tight_epsilon_large_n():
    # accepting requires |theta| <~ 2 * Phi^-1(0.55) = 0.25 at n = 10000
    obs = observed_data(10_000, RngSeed(5))
    cfg = ABCConfig(N=50, epsilon=0.55, max_proposals=20_000, n=10_000, root_seed=1)
    out = abc_rejection(PRIOR, cfg, SIM, obs)
    assert len(out.accepted) == 50
    assert np.all(np.abs(out.accepted) <= 0.5)
    assert out.acceptance_rate == 50 / out.proposals_used


def test_zero_epsilon_exhausts_budget(obs50):
    cfg = ABCConfig(N=5, epsilon=0.0, max_proposals=1000, n=50)
    with pytest.raises(BudgetExhausted) as info:
        abc_rejection(PRIOR, cfg, SIM, obs50)
    assert len(info.value.partial.accepted) == 0
    assert info.value.partial.proposals_used == 1000


def test_invalid_config():
    with pytest.raises(ValueError):
        ABCConfig(N=5, epsilon=1.5)
    with pytest.raises(ValueError):
        ABCConfig(N=5, max_proposals=4)
    with pytest.raises(ValueError):
        ABCConfig(N=0)
    with pytest.raises(ValueError):
        PriorSpec([(1.0, 1.0)])


def test_records_replay(obs50):
    cfg = ABCConfig(N=10, epsilon=0.6, max_proposals=5000, n=50, root_seed=9)
    out = abc_rejection(PRIOR, cfg, SIM, obs50)
    for rec in out.accepted_records:
        assert rec.delta <= cfg.epsilon
        assert replay(rec, SIM, obs50, cfg) == rec.delta


def test_epsilon_monotone(obs50):
    def accepted(eps):
        cfg = ABCConfig(N=300, epsilon=eps, max_proposals=300, n=50, root_seed=4)
        try:
            out = abc_rejection(PRIOR, cfg, SIM, obs50)
        except BudgetExhausted as exc:
            out = exc.partial
        return {r.index for r in out.accepted_records}

    loose, tight = accepted(0.7), accepted(0.55)
    assert tight and tight <= loose


def test_parallel_matches_serial(obs50):
    cfg = ABCConfig(N=8, epsilon=0.6, max_proposals=5000, n=50, root_seed=11)
    a = abc_rejection(PRIOR, cfg, SIM, obs50, threads=1)
    b = abc_rejection(PRIOR, cfg, SIM, obs50, threads=3)
    assert a.proposals_used == b.proposals_used
    assert np.array_equal(a.accepted, b.accepted)
    assert [r.delta for r in a.records] == [r.delta for r in b.records]


def test_prior_pdf():
    p = PriorSpec([(-1.0, 1.0)])
    assert np.allclose(p.pdf([[-2.0], [0.0], [1.0], [1.5]]), [0, 0.5, 0.5, 0])

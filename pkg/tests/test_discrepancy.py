import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from lfikit.discrepancy import (
    LabeledSet,
    LDAFitError,
    LDAModel,
    cv_accuracy,
    delta_theta,
    discriminability,
    fit_lda,
    stratified_folds,
)
from lfikit.simulators import GaussianSimulator, RngSeed, observed_data, simulate_gaussian


def _two_classes(mu0, mu1, n, seed=0):
    return LabeledSet.from_datasets(
        simulate_gaussian(mu0, n, RngSeed(seed, 1)), simulate_gaussian(mu1, n, RngSeed(seed, 2))
    )


def _best_threshold(data):
    # brute force: the cut on x maximising training accuracy (class 1 above)
    x, y = data.features[:, 0], data.labels
    grid = np.linspace(1.0, 5.0, 4001)
    acc = [np.mean((x > t) == y) for t in grid]
    return grid[int(np.argmax(acc))]


def test_lda_threshold_midpoint():
    data = _two_classes(0.0, 6.0, 5000)
    model = fit_lda(data)
    threshold = -model.intercept / model.weights[0]
    assert abs(threshold - 3.0) <= 0.1
    assert abs(_best_threshold(data) - 3.0) <= 0.1


def test_lda_weight_sign():
    model = fit_lda(_two_classes(0.0, 1.0, 500))
    assert model.weights[0] > 0
    assert fit_lda(_two_classes(1.0, 0.0, 500)).weights[0] < 0


def test_tie_goes_to_class_zero():
    m = LDAModel(np.array([1.0]), 0.0, 0.0)
    assert m.predict(np.array([[0.0]]))[0] == 0
    assert m.predict(np.array([[1e-300]]))[0] == 1


def test_identical_datasets():
    x = simulate_gaussian(0.0, 2000, RngSeed(5))
    with pytest.raises(LDAFitError):
        fit_lda(LabeledSet.from_datasets(x, x))
    assert abs(discriminability(x, x, 5, RngSeed(1)).value - 0.5) <= 0.03


def test_singular_covariance_needs_regulariser():
    x = np.ones((10, 1))
    y = np.full((10, 1), 2.0)
    data = LabeledSet.from_datasets(x, y)
    with pytest.raises(LDAFitError, match="regulari"):
        fit_lda(data, lam=0.0)
    assert fit_lda(data, lam=1e-3).weights[0] > 0


def test_rejects_bad_features():
    with pytest.raises(ValueError):
        LabeledSet(np.array([[0.0], [np.nan]]), np.array([0, 1]))
    with pytest.raises(ValueError):
        discriminability(np.zeros((10, 1)), np.zeros((10, 2)), 5, RngSeed(0))
    with pytest.raises(ValueError):
        discriminability(np.zeros((3, 1)), np.ones((3, 1)), 5, RngSeed(0))
    with pytest.raises(ValueError, match="unbalanced"):
        discriminability(np.zeros((10, 1)), np.ones((12, 1)), 5, RngSeed(0))


def test_cv_matches_per_fold_fit_lda():
    for s in range(5):
        data = _two_classes(0.0, 0.4, 60, seed=s)
        folds = stratified_folds(data.labels, 5, RngSeed(s, 99))
        accs = []
        for f in range(5):
            train = folds != f
            model = fit_lda(LabeledSet(data.features[train], data.labels[train]))
            accs.append(np.mean(model.predict(data.features[~train]) == data.labels[~train]))
        assert cv_accuracy(data, 5, RngSeed(s, 99)) == pytest.approx(np.mean(accs), abs=1e-12)


def test_folds_are_balanced():
    labels = np.repeat([0, 1], 53)
    folds = stratified_folds(labels, 5, RngSeed(4))
    for f in range(5):
        counts = np.bincount(labels[folds == f], minlength=2)
        assert counts[0] == counts[1]


@given(seed=st.integers(0, 2**32), shift=st.floats(-3, 3), m=st.integers(1, 3))
def test_label_swap_symmetry(seed, shift, m):
    rng = np.random.default_rng(seed)
    obs = rng.normal(size=(40, m))
    sim = rng.normal(size=(40, m)) + shift
    data = LabeledSet.from_datasets(obs, sim)
    s = RngSeed(seed)
    assert cv_accuracy(data, 5, s) == cv_accuracy(data.swapped(), 5, s)


@given(seed=st.integers(0, 2**32), theta=st.floats(-8, 8), n=st.integers(5, 80))
def test_range_and_determinism(seed, theta, n):
    obs = simulate_gaussian(0.0, n, RngSeed(seed, 1))
    a = delta_theta(theta, GaussianSimulator(), obs, n, 5, RngSeed(seed, 2))
    b = delta_theta(theta, GaussianSimulator(), obs, n, 5, RngSeed(seed, 2))
    assert 0.0 <= a.value <= 1.0
    assert a.value == b.value


def test_toy_model_values():
    obs = observed_data(10_000, RngSeed(31))
    sim = GaussianSimulator()
    assert delta_theta(6.0, sim, obs, 10_000, 5, RngSeed(1)).value >= 0.98
    assert 0.55 <= delta_theta(0.5, sim, obs, 10_000, 5, RngSeed(2)).value <= 0.65
    assert 0.48 <= delta_theta(0.0, sim, obs, 10_000, 5, RngSeed(3)).value <= 0.52


def test_small_sample_distribution():
    # 1e5-draw oracle (scripts/oracles.py): mean 0.500, sd 0.063 at theta=0
    sim = GaussianSimulator()
    obs = observed_data(50, RngSeed(31))
    at0 = np.array([delta_theta(0.0, sim, obs, 50, 5, RngSeed(8, i)).value for i in range(100)])
    assert 0.45 <= at0.mean() <= 0.60
    assert at0.std() > 0.02
    # oracle minimum over 2e4 draws at theta=6 was 0.970
    at6 = [delta_theta(6.0, sim, obs, 50, 5, RngSeed(9, i)).value for i in range(100)]
    assert min(at6) >= 0.9


def test_chance_level_at_truth_many_seeds():
    sim = GaussianSimulator()
    vals = [
        delta_theta(0.0, sim, observed_data(10_000, RngSeed(100 + i)), 10_000, 5, RngSeed(i)).value
        for i in range(100)
    ]
    assert abs(np.mean(vals) - 0.5) <= 0.03


@pytest.mark.parametrize("theta", [0, 0.5, 1, 2, 4, 6])
def test_bayes_accuracy_oracle(theta):
    obs = observed_data(10_000, RngSeed(77))
    v = delta_theta(theta, GaussianSimulator(), obs, 10_000, 5, RngSeed(theta * 10)).value
    assert abs(v - norm.cdf(abs(theta) / 2)) <= 0.03

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from magss import diagnostics as Dg
from magss import targets as T
from magss.errors import CapabilityError, ContractError


def gauss_score(X):
    return -np.asarray(X)


# ------------------------------------------------------------------ W1

def test_w1_examples():
    assert Dg.wasserstein_1d([0.0, 1.0, 5.0], [5.0, 0.0, 1.0]) == 0.0
    assert Dg.wasserstein_1d([0.0], [1.0]) == 1.0
    assert Dg.wasserstein_1d([0.0, 1.0], [0.0, 3.0]) == 1.0


def test_w1_contract():
    with pytest.raises(ContractError):
        Dg.wasserstein_1d([], [])
    with pytest.raises(ContractError):
        Dg.wasserstein_1d([1.0, 2.0], [1.0])


triples = st.integers(1, 30).flatmap(
    lambda n: st.tuples(*[arrays(np.float64, n, elements=st.floats(-1e3, 1e3)) for _ in range(3)]))


@settings(max_examples=200, deadline=None)
@given(triples)
def test_w1_is_a_metric(abc):
    a, b, c = abc
    ab = Dg.wasserstein_1d(a, b)
    assert ab >= 0
    assert ab == Dg.wasserstein_1d(b, a)
    assert ab <= Dg.wasserstein_1d(a, c) + Dg.wasserstein_1d(c, b) + 1e-12 * (1 + ab)
    assert (ab == 0) == (np.array_equal(np.sort(a), np.sort(b)))


def test_marginal_w1():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(500, 3))
    per, mean = Dg.marginal_w1(X, X)
    assert per == [0.0, 0.0, 0.0] and mean == 0.0
    Y = X.copy()
    Y[:, 1] += 0.7
    per, mean = Dg.marginal_w1(X, Y)
    assert per[0] == 0.0 and per[2] == 0.0
    assert per[1] == pytest.approx(0.7, abs=1e-12)
    with pytest.raises(ContractError):
        Dg.marginal_w1(X, X[:, :2])


def test_w1_noise_floor():
    rng = np.random.default_rng(1)
    _, mean = Dg.marginal_w1(rng.normal(size=(10_000, 1)), rng.normal(size=(10_000, 1)))
    assert mean < 0.05


def test_match_sizes():
    rng = np.random.default_rng(0)
    a, b = Dg.match_sizes(np.arange(10.0), np.arange(4.0), rng)
    assert a.shape == b.shape == (4,)
    assert set(a) <= set(range(10))


# ------------------------------------------------------------------ KSD

def test_ksd_matches_naive_loop():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(50, 3)) * 1.3 + 0.2
    fast = Dg.ksd_vstat(X, gauss_score(X))
    slow = Dg.ksd_naive(X, gauss_score(X))
    assert abs(fast - slow) <= 1e-12 * max(1.0, abs(slow))
    # the pure-numpy blocked path agrees as well
    assert abs(Dg._ksd_numpy(X, gauss_score(X), block=7) - slow) <= 1e-12 * max(1.0, abs(slow))


@pytest.mark.parametrize("D", [1, 2, 5])
def test_ksd_single_point_at_mode(D):
    x = np.zeros((1, D))
    assert Dg.ksd_vstat(x, np.zeros((1, D))) == float(D)
    assert Dg.ksd_naive(x, np.zeros((1, D))) == float(D)


def test_ksd_permutation_invariance():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(80, 2))
    p = rng.permutation(80)
    a = Dg.ksd_vstat(X, gauss_score(X))
    b = Dg.ksd_vstat(X[p], gauss_score(X[p]))
    assert a == pytest.approx(b, rel=1e-13)


def test_ksd_detects_shift():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(1000, 2))
    assert Dg.ksd_vstat(X, gauss_score(X)) < Dg.ksd_vstat(X + 2, gauss_score(X + 2))


def test_ksd_callable_score_and_contract():
    t = T.GaussianTarget(2)
    X = np.random.default_rng(5).normal(size=(20, 2))
    assert Dg.ksd_vstat(X, t.grad_log_density) == pytest.approx(Dg.ksd_vstat(X, -X), rel=1e-13)
    with pytest.raises(ContractError):
        Dg.ksd_vstat(X, np.zeros((20, 3)))
    with pytest.raises(ContractError):
        Dg.ksd_vstat(np.zeros((0, 2)), np.zeros((0, 2)))


# ------------------------------------------------------------------ ESS

def test_ess_iid():
    x = np.random.default_rng(6).normal(size=10_000)
    assert 0.9 <= Dg.effective_sample_size(x) / x.size <= 1.1


def test_ess_duplicated_pairs():
    base = np.random.default_rng(7).normal(size=5000)
    x = np.repeat(base, 2)
    rho = Dg.autocorrelation(x)
    # direct lag-one correlation of the construction
    assert np.corrcoef(x[:-1], x[1:])[0, 1] == pytest.approx(0.5, abs=0.03)
    assert rho[1] == pytest.approx(0.5, abs=0.03)
    assert abs(rho[2]) < 0.03
    # tau = 1 + 2 * 1/2 = 2
    assert Dg.effective_sample_size(x) == pytest.approx(x.size / 2, rel=0.15)


def test_ess_constant_and_short():
    assert Dg.effective_sample_size(np.full(50, 3.0)) == 1.0
    with pytest.raises(ContractError):
        Dg.effective_sample_size(np.arange(9.0))


def ar1(n, rho, rng):
    e = rng.normal(size=n)
    x = np.empty(n)
    x[0] = e[0] / np.sqrt(1 - rho * rho)
    for i in range(1, n):
        x[i] = rho * x[i - 1] + e[i]
    return x


@pytest.mark.parametrize("k", [5, 10, 20])
def test_ess_thinning_ar1(k):
    x = ar1(400_000, 0.95, np.random.default_rng(8))
    full = Dg.effective_sample_size(x) / x.size
    thin = x[::k]
    assert Dg.effective_sample_size(thin) / thin.size >= 0.8 * k * full


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.integers(10, 200), elements=st.floats(-100, 100)))
def test_ess_bounded_by_n(x):
    ess = Dg.effective_sample_size(x)
    assert 1.0 <= ess <= x.size


# ------------------------------------------------------------ jump rate

def label_first(X):
    return (X[:, 0] > 0).astype(int)


def test_jump_rate_examples():
    alt = np.array([[1.0], [-1.0]] * 10)
    assert Dg.jump_rate(alt, label_first) == 100.0
    assert Dg.jump_rate(np.ones((10, 1)), label_first) == 0.0
    # averaged per chain
    assert Dg.jump_rate([alt, np.ones((10, 1))], label_first) == 50.0
    with pytest.raises(CapabilityError):
        Dg.jump_rate(alt, None)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 50), st.just(1)), elements=st.floats(-1, 1)))
def test_jump_rate_range(X):
    assert 0.0 <= Dg.jump_rate(X, label_first) <= 100.0


def test_label_rate():
    X = np.array([[1.0], [1.0], [-1.0], [1.0]])
    assert Dg.label_rate(X, label_first) == {0: 0.25, 1: 0.75}


# --------------------------------------------------------------- report

def test_report_rejects_negative():
    with pytest.raises(ContractError):
        Dg.DiagnosticReport(n_samples=10, ksd=-1.0)
    with pytest.raises(ContractError):
        Dg.DiagnosticReport(n_samples=10, w1_per_dim=[0.1, float("nan")])


def test_diagnose():
    t = T.two_gaussians(2)
    rng = np.random.default_rng(10)
    chains = [t.reference_sample(300, rng) for _ in range(2)]
    rep = Dg.diagnose(chains, t, wall_clock=1.5, rng=np.random.default_rng(0))
    d = rep.to_dict()
    assert d["n_samples"] == 600 and d["wall_clock"] == 1.5
    assert d["w1_mean"] < 0.2
    assert d["jump_rate"] > 10  # independent draws jump often
    assert d["min_ess"] > 300
    assert d["ksd_chain_std"] is not None

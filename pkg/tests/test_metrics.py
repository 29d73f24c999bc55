import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from magss import metrics as M
from magss import targets as T
from magss.errors import ConfigurationError, EvaluationError


def metric_family(target):
    return [M.EuclideanMetric(target), M.MongeMetric(target, 0.1), M.MongeMetric(target, 1.0),
            M.InverseMongeMetric(target, 0.1), M.GenerativeMetric(target, 1.0, 1.0),
            M.InverseGenerativeMetric(target, 0.1, 0.5)]


def logistic(D=3):
    return T.LogisticRegressionTarget(*T.synthetic_logistic_data(50, D, seed=0))


def near_modes(target, rng):
    if target.name == "two_gaussians":
        return rng.choice([-1, 1]) * np.ones(target.dim) + 0.15 * rng.standard_normal(target.dim)
    return rng.uniform(-2, 2, target.dim)


CASES = [(tg, m) for tg in (T.FunnelTarget(3), T.two_gaussians(3)) for m in metric_family(tg)]
CASES.append((logistic(), M.FisherLogisticMetric(logistic())))


@pytest.mark.parametrize("target,metric", CASES, ids=lambda o: getattr(o, "name", ""))
def test_algebra(target, metric):
    rng = np.random.default_rng(4)
    I = np.eye(target.dim)
    for _ in range(20):
        x = near_modes(target, rng)
        G = metric.tensor(x)
        Gi = metric.inverse(x)
        z = rng.standard_normal(target.dim)
        np.testing.assert_allclose(G, G.T, atol=1e-14)
        assert np.all(np.linalg.eigvalsh(G) > 0)
        assert np.max(np.abs(G @ Gi - I)) < 1e-10
        np.testing.assert_allclose(metric.inv_sqrt_apply(x, metric.inv_sqrt_apply(x, z)), Gi @ z,
                                   rtol=0, atol=1e-10 * max(1.0, np.abs(Gi @ z).max()))
        assert abs(metric.log_det(x) - np.linalg.slogdet(G)[1]) < 1e-8
        S = metric.sqrt(x)
        assert np.max(np.abs(S @ S - G)) < 1e-10 * max(1.0, np.abs(G).max())


def test_flat_examples():
    tg = T.GaussianTarget(2)
    x = np.array([0.3, -0.2])
    e = M.EuclideanMetric(tg)
    np.testing.assert_array_equal(e.tensor(x), np.eye(2))
    assert e.log_det(x) == 0.0
    np.testing.assert_array_equal(e.acceleration(x, [1.0, 2.0]), [0.0, 0.0])
    # at the mode the rank-one Monge term vanishes
    np.testing.assert_array_equal(M.MongeMetric(tg, 0.7).tensor(np.zeros(2)), np.eye(2))
    np.testing.assert_array_equal(M.MongeMetric(tg, 0.7).acceleration(np.zeros(2), [1.0, 1.0]), 0.0)
    g = M.GenerativeMetric(tg, 0.3, float(np.exp(tg.log_density(x))))
    np.testing.assert_allclose(g.tensor(x), np.eye(2), atol=1e-15)
    for cls in (M.GenerativeMetric, M.InverseGenerativeMetric):
        np.testing.assert_allclose(cls(tg).acceleration(np.zeros(2), [0.4, -1.0]), 0.0, atol=1e-15)


def test_inverse_monge_log_det():
    tg = T.FunnelTarget(2)
    x = np.array([0.5, 0.7])
    g = tg.grad_log_density(x)
    m = M.InverseMongeMetric(tg, 0.1)
    assert m.log_det(x) == pytest.approx(-np.log1p(0.1 * g @ g), rel=1e-14)


@pytest.mark.parametrize("target", [T.FunnelTarget(3), T.two_gaussians(3)], ids=lambda t: t.name)
def test_inverse_pair_duality(target):
    rng = np.random.default_rng(5)
    pairs = [(M.MongeMetric(target, 0.3), M.InverseMongeMetric(target, 0.3)),
             (M.GenerativeMetric(target, 0.2, 1.5), M.InverseGenerativeMetric(target, 0.2, 1.5))]
    for _ in range(20):
        x = near_modes(target, rng)
        for a, b in pairs:
            np.testing.assert_allclose(b.tensor(x), a.inverse(x), rtol=0,
                                       atol=1e-12 * max(1.0, np.abs(a.inverse(x)).max()))
            assert abs(b.log_det(x) + a.log_det(x)) <= 1e-12 * max(1.0, abs(a.log_det(x)))


@pytest.mark.parametrize("cls", [M.MongeMetric, M.InverseMongeMetric])
def test_sqrt_near_zero_gradient(cls):
    # |grad l|^2 below 1e-14: the conjugate form must not cancel
    tg = T.GaussianTarget(3)
    m = cls(tg, 1.0)
    for x in (np.full(3, 1e-8), np.array([3e-8, 0.0, -1e-9]), np.zeros(3)):
        G = m.tensor(x)
        S = m.sqrt(x)
        assert np.max(np.abs(S @ S - G)) < 1e-10
        Si = np.linalg.inv(S)
        assert np.max(np.abs(Si @ Si - m.inverse(x))) < 1e-10
        z = np.array([1.0, -2.0, 0.5])
        np.testing.assert_allclose(m.inv_sqrt_apply(x, m.inv_sqrt_apply(x, z)), m.inverse(x) @ z,
                                   atol=1e-12)


@pytest.mark.parametrize("D", [2, 3])
@pytest.mark.parametrize("target_name", ["funnel", "two_gaussians", "logistic"])
def test_acceleration_matches_oracle(D, target_name):
    rng = np.random.default_rng(D)
    if target_name == "funnel":
        tg = T.FunnelTarget(D)
    elif target_name == "two_gaussians":
        tg = T.two_gaussians(D)
    else:
        tg = logistic(D)
    mets = metric_family(tg)[1:]
    if target_name == "logistic":
        mets.append(M.FisherLogisticMetric(tg))
    for m in mets:
        for _ in range(30):
            x = near_modes(tg, rng) if target_name != "logistic" else rng.standard_normal(D)
            v = rng.standard_normal(D)
            a = m.acceleration(x, v)
            o = M.christoffel_oracle(m.tensor, x, v)
            assert np.linalg.norm(a - o) <= 1e-4 * max(np.linalg.norm(o), 1e-8), m.name


def test_oracle_on_constant_tensors():
    x = np.array([0.2, 0.3])
    v = np.array([1.0, -1.0])
    np.testing.assert_array_equal(M.christoffel_oracle(lambda y: np.eye(2), x, v), 0.0)
    np.testing.assert_array_equal(M.christoffel_oracle(lambda y: 4.0 * np.eye(2), x, v), 0.0)
    with pytest.raises(EvaluationError):
        M.christoffel_oracle(lambda y: np.zeros((2, 2)), x, v)
    with pytest.raises(ConfigurationError):
        M.christoffel_oracle(lambda y: np.eye(17), np.zeros(17), np.zeros(17))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([0, 1, 2, 3, 4, 5]))
def test_unit_tangent_has_unit_norm(seed, which):
    tg = T.FunnelTarget(3)
    m = metric_family(tg)[which]
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2, 2, 3)
    v = M.sample_unit_tangent(m, x, rng)
    assert abs(np.sqrt(m.norm_sq(x, v)) - 1.0) < 1e-10


def test_unit_tangent_scaling():
    # Generative with p = 0 everywhere relevant gives G = ((p0 + lam) / lam)^2 I
    tg = T.GaussianTarget(2, mean=[50.0, 50.0])
    m = M.GenerativeMetric(tg, lam=1.0, p0=1.0)
    c = np.sqrt(m.tensor(np.zeros(2))[0, 0])
    v = M.sample_unit_tangent(m, np.zeros(2), np.random.default_rng(0))
    assert np.linalg.norm(v) == pytest.approx(1.0 / c, abs=1e-10)


def test_unit_tangent_isotropy():
    tg = T.GaussianTarget(3)
    m = M.EuclideanMetric(tg)
    rng = np.random.default_rng(9)
    V = np.array([M.sample_unit_tangent(m, np.zeros(3), rng) for _ in range(100_000)])
    assert np.all(np.abs(V.mean(0)) < 0.02)
    C = np.corrcoef(V.T)
    assert np.all(np.abs(C[np.triu_indices(3, 1)]) < 0.02)


def test_make_metric_validation():
    tg = T.GaussianTarget(2)
    assert M.make_metric("inverse_monge", tg, alpha2=0.1).alpha2 == 0.1
    assert M.make_metric("generative", tg, **{"lambda": 0.5}).lam == 0.5
    with pytest.raises(ConfigurationError):
        M.make_metric("riemann", tg)
    with pytest.raises(ConfigurationError):
        M.make_metric("monge", tg, lam=1.0)
    with pytest.raises(ConfigurationError):
        M.MongeMetric(tg, -1.0)
    with pytest.raises(ConfigurationError):
        M.GenerativeMetric(tg, p0=0.0)
    with pytest.raises(ConfigurationError):
        M.FisherLogisticMetric(tg)


def test_lambda_zero_warns(caplog):
    M.GenerativeMetric(T.GaussianTarget(1), lam=0.0)
    assert "lambda=0" in caplog.text


def test_oracle_five_point_stencil():
    # G(x) = diag(1 + x^4): the five-point stencil is exact up to rounding for quartics
    fn = lambda y: np.diag(1.0 + y ** 4)
    x = np.array([0.7, -1.1])
    v = np.array([1.0, 0.5])
    exact = -np.array([2 * x[0] ** 3 * v[0] ** 2, 2 * x[1] ** 3 * v[1] ** 2]) / (1.0 + x ** 4)
    np.testing.assert_allclose(M.christoffel_oracle(fn, x, v, h=1e-2, order=4), exact, rtol=1e-10)
    assert np.abs(M.christoffel_oracle(fn, x, v, h=1e-2) - exact).max() > 1e-6
    with pytest.raises(ConfigurationError):
        M.christoffel_oracle(fn, x, v, order=3)

import numpy as np
import pytest

from magss import metrics as M
from magss import targets as T
from magss.errors import ConfigurationError, ContractError, IntegrationError
from magss.geodesics import METHODS, GeodesicCurve, IntegratorConfig, make_curve


def unit(metric, x, seed=0):
    return M.sample_unit_tangent(metric, np.asarray(x, dtype=float), np.random.default_rng(seed))


@pytest.mark.parametrize("kind", sorted(METHODS))
def test_euclidean_integration_is_exact(kind):
    tg = T.GaussianTarget(3)
    m = M.EuclideanMetric(tg)
    x0 = np.array([0.1, -0.4, 2.0])
    v0 = unit(m, x0)
    c = make_curve(m, x0, v0, IntegratorConfig(kind=kind, h=0.05), force_integration=True)
    for t in (-3.0, -0.37, 0.5, 2.9):
        x, v = c.eval_with_velocity(t)
        np.testing.assert_allclose(x, x0 + t * v0, rtol=0, atol=1e-12)
        np.testing.assert_allclose(v, v0, rtol=0, atol=1e-12)


def test_closed_form_euclidean():
    m = M.EuclideanMetric(T.GaussianTarget(2))
    c = make_curve(m, [1.0, 2.0], [0.6, 0.8])
    np.testing.assert_array_equal(c.eval(2.0), np.array([1.0, 2.0]) + 2.0 * np.array([0.6, 0.8]))
    assert c.n_steps == 0


def test_origin_exact():
    tg = T.FunnelTarget(2)
    m = M.MongeMetric(tg, 1.0)
    x0 = np.array([0.3, 0.5])
    v0 = unit(m, x0)
    c = make_curve(m, x0, v0)
    x, v = c.eval_with_velocity(0.0)
    np.testing.assert_array_equal(x, x0)
    np.testing.assert_array_equal(v, v0)


def test_velocity_norm_contract():
    m = M.MongeMetric(T.FunnelTarget(2), 1.0)
    with pytest.raises(ContractError):
        make_curve(m, [0.0, 0.0], [1.0, 1.0])


@pytest.mark.parametrize("metric_fn", [
    lambda t: M.MongeMetric(t, 1.0),
    lambda t: M.GenerativeMetric(t, 0.1, 0.1),
    lambda t: M.InverseGenerativeMetric(t, 1.0),
    lambda t: M.InverseMongeMetric(t, 0.1),
], ids=["monge", "generative", "inverse_generative", "inverse_monge"])
def test_time_reversal(metric_fn):
    tg = T.FunnelTarget(2)
    m = metric_fn(tg)
    x0 = np.array([0.2, 0.4])
    v0 = unit(m, x0, 3)
    fwd = make_curve(m, x0, v0)
    bwd = make_curve(m, x0, -v0)
    for t in (0.3, 1.0, 2.0):
        np.testing.assert_allclose(fwd.eval(-t), bwd.eval(t), rtol=0, atol=1e-9)


def test_generative_straight_in_flat_region():
    # far from the mode the density underflows, so log f is locally constant
    tg = T.GaussianTarget(2, scale=0.1)
    m = M.GenerativeMetric(tg, 1.0)
    x0 = np.array([50.0, 50.0])
    v0 = unit(m, x0)
    c = make_curve(m, x0, v0)
    for t in (1.0, 5.0):
        np.testing.assert_allclose(c.eval(t), x0 + t * v0, atol=1e-9)


def test_speed_conservation_monge_funnel():
    tg = T.FunnelTarget(2)
    m = M.MongeMetric(tg, 1.0)
    rng = np.random.default_rng(0)
    for k in range(3):
        x0 = tg.reference_sample(1, k)[0]
        c = make_curve(m, x0, unit(m, x0, k))
        for t in rng.uniform(-5, 5, 100):
            x, v = c.eval_with_velocity(t)
            assert abs(np.sqrt(m.norm_sq(x, v)) - 1.0) < 1e-3


def test_inverse_generative_velocity_identity():
    tg = T.GaussianMixtureTarget([[-2.0], [2.0]], [0.5, 0.5])
    lam = 0.1
    m = M.InverseGenerativeMetric(tg, lam)
    x0 = np.array([-2.0])
    c = make_curve(m, x0, unit(m, x0))
    p = lambda x: np.exp(tg.log_density(x))
    ref = np.abs(c.v0[0]) * (p(x0) + lam)
    for t in np.linspace(-6, 6, 121):
        x, v = c.eval_with_velocity(t)
        assert abs(np.abs(v[0]) * (p(x) + lam) / ref - 1.0) < 1e-3


def test_inverse_monge_from_mode_speeds_up():
    tg = T.GaussianTarget(2)
    m = M.InverseMongeMetric(tg, 0.1)
    x0 = np.zeros(2)
    for seed in range(3):
        c = make_curve(m, x0, unit(m, x0, seed))
        n0 = np.linalg.norm(c.v0)
        for t in np.linspace(-3, 3, 61):
            _, v = c.eval_with_velocity(t)
            assert np.linalg.norm(v) >= n0 - 1e-6


def test_cache_monotone_and_repeatable():
    tg = T.FunnelTarget(2)
    m = M.MongeMetric(tg, 1.0)
    x0 = np.array([0.1, 0.2])
    v0 = unit(m, x0)
    c = make_curve(m, x0, v0)
    a = c.eval(5.0)
    n = c.n_steps
    c.eval(3.0)
    c.eval(-0.0)
    assert c.n_steps == n
    np.testing.assert_array_equal(c.eval(5.0), a)
    assert c.cached_range()[1] >= 5.0
    # same inputs, same trajectory
    d = make_curve(m, x0, v0)
    np.testing.assert_array_equal(d.eval(3.0), c.eval(3.0))
    np.testing.assert_array_equal(d.eval(-2.5), c.eval(-2.5))


@pytest.mark.parametrize("tg,metric_fn", [
    (T.FunnelTarget(2), lambda t: M.MongeMetric(t, 1.0)),
    (T.two_gaussians(2), lambda t: M.GenerativeMetric(t, 1.0)),
    (T.two_gaussians(2), lambda t: M.InverseGenerativeMetric(t, 1.0)),
], ids=["monge-funnel", "generative-2g", "inverse_generative-2g"])
def test_self_convergence(tg, metric_fn):
    m = metric_fn(tg)
    x0 = tg.reference_sample(1, 1)[0]
    v0 = unit(m, x0, 2)
    a = make_curve(m, x0, v0, IntegratorConfig(rtol=1e-8, atol=1e-9))
    b = make_curve(m, x0, v0, IntegratorConfig(rtol=5e-9, atol=5e-10))
    for t in np.linspace(-5, 5, 41):
        assert np.max(np.abs(a.eval(t) - b.eval(t))) < 1e-6


def test_euler_first_order():
    tg = T.GaussianTarget(2)
    m = M.GenerativeMetric(tg, 1.0)
    x0 = np.array([0.5, -0.3])
    v0 = unit(m, x0, 4)
    truth = make_curve(m, x0, v0, IntegratorConfig(rtol=1e-10, atol=1e-12)).eval(1.0)
    e1 = np.linalg.norm(make_curve(m, x0, v0, IntegratorConfig("euler_fixed", h=0.01, speed_tol=0))
                        .eval(1.0) - truth)
    e2 = np.linalg.norm(make_curve(m, x0, v0, IntegratorConfig("euler_fixed", h=0.005, speed_tol=0))
                        .eval(1.0) - truth)
    assert 2 / 1.5 <= e1 / e2 <= 2 * 1.5


def test_t_max_and_budget_errors():
    tg = T.FunnelTarget(2)
    m = M.MongeMetric(tg, 1.0)
    x0 = np.zeros(2)
    c = make_curve(m, x0, unit(m, x0), IntegratorConfig(t_max=2.0))
    with pytest.raises(IntegrationError):
        c.eval(2.5)
    c = make_curve(m, x0, unit(m, x0), IntegratorConfig("rk4_fixed", h=0.01, max_steps=50))
    c.eval(0.4)
    with pytest.raises(IntegrationError) as info:
        c.eval(1.0)
    assert info.value.last_valid_t == pytest.approx(0.5)


def test_knots_signed():
    tg = T.FunnelTarget(2)
    m = M.MongeMetric(tg, 1.0)
    c = GeodesicCurve(m, np.zeros(2), unit(m, np.zeros(2)))
    c.eval(-1.0)
    ts, xs, vs = c.knots(forward=False)
    assert ts[0] == 0.0 and np.all(np.diff(ts) < 0)
    np.testing.assert_allclose(xs[-1], c.eval(ts[-1]), atol=1e-12)


def test_integrator_config_validation():
    with pytest.raises(ConfigurationError):
        IntegratorConfig(kind="dopri8")
    with pytest.raises(ConfigurationError):
        IntegratorConfig(h=0.0)
    with pytest.raises(ConfigurationError):
        IntegratorConfig(rtol=-1.0)
